#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace mulqg {

using Tokens = std::vector<std::string>;

struct Paragraph {
  Tokens title;
  std::vector<Tokens> sentences;
};

// Answer location; token_start/token_end index into the named sentence.
struct AnswerSpan {
  Tokens text;
  int paragraph_idx = 0;
  int sentence_idx = 0;
  int token_start = 0;
  int token_end = 0;
};

struct Example {
  std::string id;
  std::vector<Paragraph> paragraphs;
  AnswerSpan answer;
  Tokens question;

  // Throws DataError when a structural invariant does not hold.
  void validate() const;
};

struct Dataset {
  std::vector<Example> examples;
  // Entity surface forms; filled by the synthetic generator, empty otherwise.
  std::vector<Tokens> lexicon;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

// Lowercases and splits on whitespace.
Tokens tokenize(const std::string& text);
std::string join(const Tokens& tokens, const std::string& sep = " ");

// JSON Lines reader accepting HotpotQA-style records ({id|_id, context,
// answer, question}) and the internal schema (detected by "paragraphs").
Dataset load_hotpot_jsonl(const std::string& path);
Dataset parse_hotpot_jsonl(const std::string& text);
void save_dataset_jsonl(const Dataset& data, const std::string& path);

std::vector<Tokens> load_lexicon(const std::string& path);
void save_lexicon(const std::vector<Tokens>& lexicon, const std::string& path);

// Deterministic entity names; the first `size` names do not depend on any seed.
std::vector<Tokens> entity_pool(std::size_t size);

// Bridge examples: paragraph A "<T> ... <C> .", paragraph B "<C> ... <H> .",
// answer <H>, question asking where <T> is located. Each distractor adds a
// paragraph relating two entities outside the chain; 0 keeps two paragraphs.
Dataset generate_synthetic(std::uint64_t seed, std::size_t count, std::size_t entity_pool_size,
                           std::size_t distractors = 0);

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kSos = 2;
  static constexpr int kEos = 3;
  static constexpr int kReserved = 4;

  Vocab();
  explicit Vocab(const std::vector<std::string>& non_reserved);

  int id(const std::string& token) const;
  bool contains(const std::string& token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  // Tokens after the reserved block, in id order.
  std::vector<std::string> entries() const;

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// Keeps the max_size - 4 most frequent tokens of contexts and questions;
// frequency ties resolve lexicographically.
Vocab build_vocab(const Dataset& data, int max_size);
Vocab build_vocab(const std::vector<Example>& examples, int max_size);

enum Tag : int { kTagO = 0, kTagB = 1, kTagI = 2 };

struct TokenOrigin {
  int paragraph = 0;
  int sentence = -1;  // -1 marks a title token
  int token = 0;
};

// Context flattened as paragraph order, title tokens then sentence tokens.
struct FlatContext {
  Tokens tokens;
  std::vector<TokenOrigin> origin;
  int answer_start = 0;
  int answer_end = 0;
};

// Truncates to max_len by dropping trailing tokens of non-answer paragraphs
// (last paragraph first), then answer-paragraph tokens outside the span.
FlatContext flatten_context(const Example& ex, std::size_t max_len);

struct EncodedExample {
  std::string id;
  Tokens context_tokens;
  std::vector<int> context_ids;
  std::vector<int> tag_ids;
  std::vector<int> answer_ids;
  std::vector<int> question_ids;  // ends with EOS
  Tokens question_tokens;
  std::map<int, std::string> oov_map;  // context position -> surface form
  int answer_start = 0;
  int answer_end = 0;
};

EncodedExample encode_example(const Example& ex, const Vocab& vocab, std::size_t max_context_len);
// Maps ids back to tokens, stopping at EOS and skipping SOS/PAD.
Tokens decode_ids(const std::vector<int>& ids, const Vocab& vocab);

}  // namespace mulqg
