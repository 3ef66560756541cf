#include "mulqg/corpus.hpp"
#include "mulqg/errors.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

using namespace mulqg;

namespace {

bool contains_seq(const Tokens& hay, const Tokens& needle) {
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

bool paragraph_contains(const Paragraph& p, const Tokens& needle) {
  if (contains_seq(p.title, needle)) return true;
  return std::any_of(p.sentences.begin(), p.sentences.end(),
                     [&](const Tokens& s) { return contains_seq(s, needle); });
}

Example tiny_example(const Tokens& sentence, int start, int end) {
  Example ex;
  ex.id = "t";
  Paragraph p;
  p.sentences.push_back(sentence);
  ex.paragraphs.push_back(p);
  ex.answer.text = Tokens(sentence.begin() + start, sentence.begin() + end);
  ex.answer.paragraph_idx = 0;
  ex.answer.sentence_idx = 0;
  ex.answer.token_start = start;
  ex.answer.token_end = end;
  ex.question = {"q"};
  return ex;
}

std::string write_temp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << text;
  return path.string();
}

}  // namespace

TEST(Tokenize, LowercasesAndSplitsOnWhitespace) {
  EXPECT_EQ(tokenize("  Marine Corps\tAir  Station\n"), (Tokens{"marine", "corps", "air", "station"}));
  EXPECT_TRUE(tokenize("   ").empty());
  EXPECT_EQ(join({"a", "b"}), "a b");
}

TEST(Hotpot, LocatesMultiTokenAnswerInSecondParagraph) {
  const std::string line =
      R"({"_id": "h1", "question": "Where is the air station located?", "answer": "Havelock, North Carolina",)"
      R"( "context": [["Cherry Point", ["Marine Corps Air Station Cherry Point is an airfield ."]],)"
      R"( ["Havelock", ["The town is near the coast .", "It is Havelock, North Carolina ."]]]})";
  const Dataset d = parse_hotpot_jsonl(line);
  ASSERT_EQ(d.examples.size(), 1u);
  const Example& ex = d.examples[0];
  EXPECT_EQ(ex.answer.paragraph_idx, 1);
  EXPECT_EQ(ex.answer.sentence_idx, 1);
  EXPECT_EQ(ex.answer.text, (Tokens{"havelock,", "north", "carolina"}));
  EXPECT_EQ(ex.answer.token_start, 2);
  EXPECT_EQ(ex.paragraphs[0].title, (Tokens{"cherry", "point"}));
}

TEST(Hotpot, FirstOccurrenceWins) {
  const std::string line =
      R"({"id": "h2", "question": "q", "answer": "paris",)"
      R"( "context": [["A", ["x y .", "in paris ."]], ["B", ["paris again ."]]]})";
  const Example ex = parse_hotpot_jsonl(line).examples.at(0);
  EXPECT_EQ(ex.answer.paragraph_idx, 0);
  EXPECT_EQ(ex.answer.sentence_idx, 1);
}

TEST(Hotpot, YesNoAndUnlocatableAnswersAreSkippedAndCounted) {
  const std::string text =
      R"({"_id": "y", "question": "q", "answer": "yes", "context": [["A", ["yes it is ."]]]})"
      "\n"
      R"({"_id": "u", "question": "q", "answer": "nowhere", "context": [["A", ["some text ."]]]})"
      "\n"
      R"({"_id": "k", "question": "q", "answer": "text", "context": [["A", ["some text ."]]]})"
      "\n";
  const Dataset d = parse_hotpot_jsonl(text);
  EXPECT_EQ(d.examples.size(), 1u);
  EXPECT_EQ(d.skipped, 2u);
  EXPECT_EQ(d.warnings.size(), 2u);
}

TEST(Hotpot, EmptyInputIsZeroRecordError) {
  EXPECT_THROW(parse_hotpot_jsonl(""), DataError);
  EXPECT_THROW(parse_hotpot_jsonl(R"({"_id": "y", "question": "q", "answer": "no", "context": [["A", ["no ."]]]})"),
               DataError);
}

TEST(Hotpot, MalformedLineReportsLineNumber) {
  const std::string text =
      R"({"_id": "k", "question": "q", "answer": "text", "context": [["A", ["some text ."]]]})"
      "\n{not json\n";
  try {
    parse_hotpot_jsonl(text);
    FAIL() << "expected a data error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Hotpot, InternalSchemaRoundTrip) {
  const Dataset d = generate_synthetic(5, 4, 20);
  const auto path = write_temp("mulqg_roundtrip.jsonl", "");
  save_dataset_jsonl(d, path);
  const Dataset back = load_hotpot_jsonl(path);
  ASSERT_EQ(back.examples.size(), d.examples.size());
  for (std::size_t i = 0; i < d.examples.size(); ++i) {
    EXPECT_EQ(back.examples[i].id, d.examples[i].id);
    EXPECT_EQ(back.examples[i].question, d.examples[i].question);
    EXPECT_EQ(back.examples[i].answer.token_start, d.examples[i].answer.token_start);
    EXPECT_EQ(back.examples[i].paragraphs.size(), d.examples[i].paragraphs.size());
  }
  std::filesystem::remove(path);
}

TEST(Synthetic, SeedSevenSingleExampleHasBridgeStructure) {
  const Dataset d = generate_synthetic(7, 1, 50);
  ASSERT_EQ(d.examples.size(), 1u);
  const Example& ex = d.examples[0];
  ASSERT_EQ(ex.paragraphs.size(), 2u);
  const int b = ex.answer.paragraph_idx;
  const Paragraph& pb = ex.paragraphs[b];
  const Paragraph& pa = ex.paragraphs[1 - b];
  // Answer only in B; question names T (title of A) and nothing from B.
  EXPECT_TRUE(paragraph_contains(pb, ex.answer.text));
  EXPECT_FALSE(paragraph_contains(pa, ex.answer.text));
  EXPECT_TRUE(contains_seq(ex.question, pa.title));
  EXPECT_FALSE(contains_seq(ex.question, pb.title));
  EXPECT_FALSE(contains_seq(ex.question, ex.answer.text));
  // Bridge: B's title appears in A's first sentence.
  EXPECT_TRUE(contains_seq(pa.sentences[0], pb.title));
  EXPECT_EQ(ex.question.back(), "?");
}

TEST(Synthetic, Deterministic) {
  const Dataset a = generate_synthetic(3, 20, 30);
  const Dataset b = generate_synthetic(3, 20, 30);
  ASSERT_EQ(a.examples.size(), b.examples.size());
  for (std::size_t i = 0; i < a.examples.size(); ++i) {
    EXPECT_EQ(a.examples[i].question, b.examples[i].question);
    EXPECT_EQ(a.examples[i].paragraphs[0].sentences, b.examples[i].paragraphs[0].sentences);
  }
}

TEST(Synthetic, Preconditions) {
  EXPECT_THROW(generate_synthetic(1, 0, 10), DataError);
  EXPECT_THROW(generate_synthetic(1, 5, 2), DataError);
  EXPECT_THROW(generate_synthetic(1, 5, 6, 2), DataError);
}

TEST(Synthetic, CorpusInvariantsHoldOnEveryExample) {
  const Dataset d = generate_synthetic(21, 300, 50);
  std::size_t multi = 0;
  for (const auto& e : d.lexicon) multi += e.size() > 1;
  EXPECT_GT(multi, 5u);
  EXPECT_LT(multi, 30u);
  for (const auto& ex : d.examples) {
    EXPECT_NO_THROW(ex.validate());
    EXPECT_FALSE(contains_seq(ex.question, ex.answer.text)) << ex.id;
    const Paragraph& pb = ex.paragraphs[ex.answer.paragraph_idx];
    const Paragraph& pa = ex.paragraphs[1 - ex.answer.paragraph_idx];
    EXPECT_TRUE(paragraph_contains(pa, pb.title)) << ex.id;
    EXPECT_TRUE(paragraph_contains(pb, pb.title)) << ex.id;
  }
}

TEST(Synthetic, DistractorsKeepTheChainIntact) {
  const Dataset d = generate_synthetic(8, 50, 50, 2);
  for (const auto& ex : d.examples) {
    ASSERT_EQ(ex.paragraphs.size(), 4u);
    EXPECT_NO_THROW(ex.validate());
    const Paragraph& pb = ex.paragraphs[ex.answer.paragraph_idx];
    int bridges = 0;
    for (std::size_t p = 0; p < ex.paragraphs.size(); ++p) {
      if (static_cast<int>(p) == ex.answer.paragraph_idx) continue;
      bridges += paragraph_contains(ex.paragraphs[p], pb.title);
      EXPECT_FALSE(paragraph_contains(ex.paragraphs[p], ex.answer.text)) << ex.id;
    }
    EXPECT_EQ(bridges, 1) << ex.id;
  }
}

TEST(EntityPool, NoEntityIsContainedInAnother) {
  const auto pool = entity_pool(200);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (std::size_t j = 0; j < pool.size(); ++j) {
      if (i != j) EXPECT_FALSE(contains_seq(pool[i], pool[j])) << join(pool[i]) << " / " << join(pool[j]);
    }
  }
  EXPECT_EQ(entity_pool(10), entity_pool(10));
}

TEST(Vocab, FrequencyOrderAndReservedIds) {
  Example ex = tiny_example({"a", "a", "a", "b"}, 0, 1);
  ex.question = {};
  const Vocab v = build_vocab(std::vector<Example>{ex}, 6);
  EXPECT_EQ(v.id("a"), 4);
  EXPECT_EQ(v.id("b"), 5);
  EXPECT_EQ(v.token(Vocab::kPad), "<pad>");
  EXPECT_EQ(v.id("<pad>"), Vocab::kUnk);  // reserved names never come from text
  EXPECT_EQ(v.id("zzz"), Vocab::kUnk);
  EXPECT_EQ(v.token(Vocab::kEos), "<eos>");

  const Vocab small = build_vocab(std::vector<Example>{ex}, 5);
  EXPECT_EQ(small.size(), 5);
  EXPECT_EQ(small.id("b"), Vocab::kUnk);
}

TEST(Vocab, TiesAreLexicographic) {
  Example ex = tiny_example({"b", "a", "b", "a"}, 0, 1);
  ex.question = {};
  const Vocab v = build_vocab(std::vector<Example>{ex}, 10);
  EXPECT_EQ(v.id("a"), 4);
  EXPECT_EQ(v.id("b"), 5);
}

TEST(Vocab, RejectsTinyMaxSize) {
  const Example ex = tiny_example({"a"}, 0, 1);
  EXPECT_THROW(build_vocab(std::vector<Example>{ex}, 4), Error);
}

TEST(Vocab, FileRoundTripUsesLineNumberPlusFour) {
  const Vocab v(std::vector<std::string>{"x", "y", "z"});
  const auto path = (std::filesystem::temp_directory_path() / "mulqg_vocab.txt").string();
  v.save(path);
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(first, "x");
  const Vocab back = Vocab::load(path);
  EXPECT_EQ(back.id("z"), 6);
  EXPECT_EQ(back.entries(), v.entries());
  std::filesystem::remove(path);
}

TEST(Encode, BioTagsOnAnswerSpan) {
  const Example ex = tiny_example({"w0", "w1", "w2", "w3", "w4", "w5"}, 3, 5);
  const Vocab v = build_vocab(std::vector<Example>{ex}, 100);
  const EncodedExample enc = encode_example(ex, v, 400);
  EXPECT_EQ(enc.tag_ids, (std::vector<int>{kTagO, kTagO, kTagO, kTagB, kTagI, kTagO}));
  EXPECT_EQ(enc.answer_ids.size(), 2u);
  EXPECT_EQ(enc.question_ids.back(), Vocab::kEos);

  const Example one = tiny_example({"w0", "w1", "w2"}, 1, 2);
  const EncodedExample e1 = encode_example(one, v, 400);
  EXPECT_EQ(std::count(e1.tag_ids.begin(), e1.tag_ids.end(), kTagB), 1);
  EXPECT_EQ(std::count(e1.tag_ids.begin(), e1.tag_ids.end(), kTagI), 0);
}

TEST(Encode, OovPositionsKeepSurfaceForm) {
  const Example train = tiny_example({"the", "river", "flows"}, 1, 2);
  const Vocab v = build_vocab(std::vector<Example>{train}, 100);
  const Example ex = tiny_example({"the", "goulburn", "river"}, 2, 3);
  const EncodedExample enc = encode_example(ex, v, 400);
  EXPECT_EQ(enc.context_ids[1], Vocab::kUnk);
  ASSERT_TRUE(enc.oov_map.count(1));
  EXPECT_EQ(enc.oov_map.at(1), "goulburn");
  EXPECT_EQ(enc.oov_map.size(), 1u);
}

TEST(Encode, TitlesPrecedeSentencesAndRoundTrip) {
  Example ex = tiny_example({"c", "d"}, 0, 1);
  ex.paragraphs[0].title = {"t"};
  Paragraph p2;
  p2.title = {"u"};
  p2.sentences = {{"e", "f"}};
  ex.paragraphs.push_back(p2);
  const Vocab v = build_vocab(std::vector<Example>{ex}, 100);
  const EncodedExample enc = encode_example(ex, v, 400);
  EXPECT_EQ(enc.context_tokens, (Tokens{"t", "c", "d", "u", "e", "f"}));
  EXPECT_EQ(decode_ids(enc.context_ids, v), enc.context_tokens);
  EXPECT_EQ(enc.answer_start, 1);
}

TEST(Encode, TruncationDropsNonAnswerParagraphFirstAndKeepsSpan) {
  Example ex = tiny_example({"a0", "a1", "a2", "a3"}, 2, 3);
  Paragraph other;
  other.sentences = {{"x0", "x1", "x2", "x3", "x4"}};
  ex.paragraphs.insert(ex.paragraphs.begin(), other);
  ex.answer.paragraph_idx = 1;
  const FlatContext flat = flatten_context(ex, 6);
  EXPECT_EQ(flat.tokens.size(), 6u);
  // Four answer-paragraph tokens survive; two from the other paragraph remain.
  EXPECT_EQ(flat.tokens, (Tokens{"x0", "x1", "a0", "a1", "a2", "a3"}));
  EXPECT_EQ(flat.tokens[static_cast<std::size_t>(flat.answer_start)], "a2");

  const FlatContext tight = flatten_context(ex, 2);
  EXPECT_EQ(tight.tokens.size(), 2u);
  EXPECT_EQ(tight.tokens[static_cast<std::size_t>(tight.answer_start)], "a2");

  Example wide = tiny_example({"a", "b", "c"}, 0, 3);
  EXPECT_THROW(flatten_context(wide, 2), DataError);
}

TEST(Encode, PureFunction) {
  const Dataset d = generate_synthetic(2, 3, 20);
  const Vocab v = build_vocab(d, 100);
  const EncodedExample a = encode_example(d.examples[1], v, 400);
  const EncodedExample b = encode_example(d.examples[1], v, 400);
  EXPECT_EQ(a.context_ids, b.context_ids);
  EXPECT_EQ(a.tag_ids, b.tag_ids);
  EXPECT_EQ(a.question_ids, b.question_ids);
}

TEST(Lexicon, FileRoundTrip) {
  const std::vector<Tokens> lex = {{"new", "south", "wales"}, {"paris"}};
  const auto path = (std::filesystem::temp_directory_path() / "mulqg_lex.txt").string();
  save_lexicon(lex, path);
  EXPECT_EQ(load_lexicon(path), lex);
  std::filesystem::remove(path);
}
