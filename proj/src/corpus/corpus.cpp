#include "mulqg/corpus.hpp"

#include "mulqg/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <numeric>
#include <cctype>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace mulqg {

using nlohmann::json;

void Example::validate() const {
  if (paragraphs.empty()) throw DataError("example '" + id + "' has no paragraphs");
  for (std::size_t p = 0; p < paragraphs.size(); ++p) {
    for (std::size_t s = 0; s < paragraphs[p].sentences.size(); ++s) {
      if (paragraphs[p].sentences[s].empty()) {
        throw DataError("example '" + id + "' has an empty sentence at paragraph " +
                        std::to_string(p) + ", sentence " + std::to_string(s));
      }
    }
  }
  const auto& a = answer;
  if (a.paragraph_idx < 0 || a.paragraph_idx >= static_cast<int>(paragraphs.size())) {
    throw DataError("example '" + id + "' answer paragraph out of range");
  }
  const auto& sents = paragraphs[a.paragraph_idx].sentences;
  if (a.sentence_idx < 0 || a.sentence_idx >= static_cast<int>(sents.size())) {
    throw DataError("example '" + id + "' answer sentence out of range");
  }
  const auto& sent = sents[a.sentence_idx];
  if (a.token_start < 0 || a.token_end <= a.token_start ||
      a.token_end > static_cast<int>(sent.size())) {
    throw DataError("example '" + id + "' answer span out of range");
  }
  const Tokens at(sent.begin() + a.token_start, sent.begin() + a.token_end);
  if (at != a.text) throw DataError("example '" + id + "' answer text does not match its span");
}

Tokens tokenize(const std::string& text) {
  Tokens out;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) {
    std::transform(tok.begin(), tok.end(), tok.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.push_back(std::move(tok));
  }
  return out;
}

std::string join(const Tokens& tokens, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

namespace {

Tokens lower_tokens(const json& j) {
  Tokens out;
  for (const auto& t : j) {
    Tokens part = tokenize(t.get<std::string>());
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

Example parse_internal(const json& j) {
  Example ex;
  ex.id = j.at("id").get<std::string>();
  for (const auto& p : j.at("paragraphs")) {
    Paragraph para;
    para.title = lower_tokens(p.at("title"));
    for (const auto& s : p.at("sentences")) para.sentences.push_back(lower_tokens(s));
    ex.paragraphs.push_back(std::move(para));
  }
  const auto& a = j.at("answer");
  ex.answer.text = lower_tokens(a.at("text"));
  ex.answer.paragraph_idx = a.at("paragraph_idx").get<int>();
  ex.answer.sentence_idx = a.at("sentence_idx").get<int>();
  const auto span = a.at("token_span").get<std::vector<int>>();
  if (span.size() != 2) throw DataError("token_span must have two entries");
  ex.answer.token_start = span[0];
  ex.answer.token_end = span[1];
  ex.question = lower_tokens(j.at("question"));
  return ex;
}

// Returns false when the answer cannot be located in any sentence.
bool locate_answer(Example& ex) {
  const Tokens& needle = ex.answer.text;
  if (needle.empty()) return false;
  for (std::size_t p = 0; p < ex.paragraphs.size(); ++p) {
    const auto& sents = ex.paragraphs[p].sentences;
    for (std::size_t s = 0; s < sents.size(); ++s) {
      const auto it = std::search(sents[s].begin(), sents[s].end(), needle.begin(), needle.end());
      if (it != sents[s].end()) {
        ex.answer.paragraph_idx = static_cast<int>(p);
        ex.answer.sentence_idx = static_cast<int>(s);
        ex.answer.token_start = static_cast<int>(it - sents[s].begin());
        ex.answer.token_end = ex.answer.token_start + static_cast<int>(needle.size());
        return true;
      }
    }
  }
  return false;
}

}  // namespace

Dataset parse_hotpot_jsonl(const std::string& text) {
  Dataset data;
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("malformed JSON on line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      if (j.contains("paragraphs")) {
        Example ex = parse_internal(j);
        ex.validate();
        data.examples.push_back(std::move(ex));
        continue;
      }
      Example ex;
      ex.id = j.contains("id") ? j.at("id").get<std::string>() : j.at("_id").get<std::string>();
      for (const auto& entry : j.at("context")) {
        if (!entry.is_array() || entry.size() != 2) {
          throw DataError("context entries must be [title, sentences]");
        }
        Paragraph para;
        para.title = tokenize(entry[0].get<std::string>());
        for (const auto& s : entry[1]) {
          Tokens sent = tokenize(s.get<std::string>());
          if (!sent.empty()) para.sentences.push_back(std::move(sent));
        }
        ex.paragraphs.push_back(std::move(para));
      }
      ex.answer.text = tokenize(j.at("answer").get<std::string>());
      ex.question = tokenize(j.at("question").get<std::string>());
      const std::string ans = join(ex.answer.text);
      if (ans == "yes" || ans == "no") {
        ++data.skipped;
        data.warnings.push_back("line " + std::to_string(line_no) + ": yes/no answer skipped");
        continue;
      }
      if (!locate_answer(ex)) {
        ++data.skipped;
        data.warnings.push_back("line " + std::to_string(line_no) +
                                ": answer not found in any sentence, skipped");
        continue;
      }
      ex.validate();
      data.examples.push_back(std::move(ex));
    } catch (const json::exception& e) {
      throw DataError("malformed record on line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (data.examples.empty()) throw DataError("dataset contains zero usable records");
  return data;
}

Dataset load_hotpot_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_hotpot_jsonl(buf.str());
}

void save_dataset_jsonl(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset '" + path + "'");
  for (const auto& ex : data.examples) {
    json j;
    j["id"] = ex.id;
    json paras = json::array();
    for (const auto& p : ex.paragraphs) {
      paras.push_back({{"title", p.title}, {"sentences", p.sentences}});
    }
    j["paragraphs"] = std::move(paras);
    j["answer"] = {{"text", ex.answer.text},
                   {"paragraph_idx", ex.answer.paragraph_idx},
                   {"sentence_idx", ex.answer.sentence_idx},
                   {"token_span", {ex.answer.token_start, ex.answer.token_end}}};
    j["question"] = ex.question;
    out << j.dump() << '\n';
  }
}

std::vector<Tokens> load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon '" + path + "'");
  std::vector<Tokens> out;
  std::string line;
  while (std::getline(in, line)) {
    Tokens t = tokenize(line);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

void save_lexicon(const std::vector<Tokens>& lexicon, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write lexicon '" + path + "'");
  for (const auto& e : lexicon) out << join(e) << '\n';
}

// ---------------------------------------------------------------------------
// Synthetic bridge corpus

namespace {

const std::vector<std::string> kStems = {
    "al",  "bel", "cor", "dun", "el",   "fen", "gar", "hal", "ir",  "jor", "kel", "lor",
    "mor", "nor", "or",  "pel", "quin", "ros", "sel", "tor", "ul",  "vel", "wes", "yor",
    "ash", "bram", "crag", "dor", "esk", "fal", "glen", "har", "ingle", "kin", "lan", "mar"};
const std::vector<std::string> kSuffixes = {"ton",   "burg", "ford", "ville", "mouth",
                                            "field", "dale", "wick", "stead", "port"};
const std::vector<std::string> kQualifiers = {"north", "south", "east", "west",
                                              "upper", "lower", "old",  "new"};

// Paragraph A relation and its matching question, paragraph B relation.
struct BridgeTemplate {
  std::string statement;  // uses {S} and {O}
  std::string question;   // uses {T}
};

const std::vector<BridgeTemplate> kFirstHop = {
    {"{S} is located in {O} .", "what city is {T} located in ?"},
    {"{S} is situated in {O} .", "what city is {T} situated in ?"},
    {"{S} can be found in {O} .", "in what city can {T} be found ?"},
    {"{S} lies within {O} .", "what city does {T} lie within ?"},
};
const std::vector<std::string> kSecondHop = {
    "{S} is located in {O} .",
    "{S} is situated in {O} .",
    "{S} is a district of {O} .",
    "{S} lies within {O} .",
};
const std::vector<std::string> kFiller = {
    "it has a long history .",
    "it is known for its markets .",
    "many people visit it every year .",
    "the area is quiet and green .",
};

Tokens fill(const std::string& tmpl, const Tokens& s, const Tokens& o) {
  Tokens out;
  for (const auto& tok : tokenize(tmpl)) {
    if (tok == "{s}" || tok == "{t}") {
      out.insert(out.end(), s.begin(), s.end());
    } else if (tok == "{o}") {
      out.insert(out.end(), o.begin(), o.end());
    } else {
      out.push_back(tok);
    }
  }
  return out;
}

}  // namespace

std::vector<Tokens> entity_pool(std::size_t size) {
  const std::size_t capacity = kStems.size() * kSuffixes.size();
  if (size > capacity) {
    throw DataError("entity pool size " + std::to_string(size) + " exceeds capacity " +
                    std::to_string(capacity));
  }
  // Each stem+suffix base word is used by at most one entity, so no entity is
  // a token subsequence of another.
  std::mt19937_64 rng(0x5eedULL);
  std::vector<std::string> bases;
  for (const auto& s : kStems) {
    for (const auto& x : kSuffixes) bases.push_back(s + x);
  }
  std::shuffle(bases.begin(), bases.end(), rng);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> qual(0, kQualifiers.size() - 1);
  std::vector<Tokens> pool;
  pool.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    if (unif(rng) < 0.3) {
      pool.push_back({kQualifiers[qual(rng)], bases[i]});
    } else {
      pool.push_back({bases[i]});
    }
  }
  return pool;
}

Dataset generate_synthetic(std::uint64_t seed, std::size_t count, std::size_t entity_pool_size,
                           std::size_t distractors) {
  if (count == 0) throw DataError("generate_synthetic: count must be >= 1");
  if (entity_pool_size < 3) throw DataError("generate_synthetic: entity pool needs >= 3 names");
  if (distractors > 0 && entity_pool_size < 3 + 2 * distractors) {
    throw DataError("generate_synthetic: entity pool too small for " + std::to_string(distractors) +
                    " distractor paragraphs");
  }
  Dataset data;
  data.lexicon = entity_pool(entity_pool_size);
  const auto& pool = data.lexicon;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::uniform_int_distribution<std::size_t> first_hop(0, kFirstHop.size() - 1);
  std::uniform_int_distribution<std::size_t> second_hop(0, kSecondHop.size() - 1);
  std::uniform_int_distribution<std::size_t> filler(0, kFiller.size() - 1);
  std::bernoulli_distribution coin(0.5);

  for (std::size_t k = 0; k < count; ++k) {
    std::size_t t = pick(rng);
    std::size_t c = pick(rng);
    while (c == t) c = pick(rng);
    std::size_t h = pick(rng);
    while (h == t || h == c) h = pick(rng);
    const BridgeTemplate& hop1 = kFirstHop[first_hop(rng)];
    const std::string& hop2 = kSecondHop[second_hop(rng)];

    Paragraph a;
    a.title = pool[t];
    a.sentences.push_back(fill(hop1.statement, pool[t], pool[c]));
    Paragraph b;
    b.title = pool[c];
    b.sentences.push_back(fill(hop2, pool[c], pool[h]));
    if (coin(rng)) a.sentences.push_back(tokenize(kFiller[filler(rng)]));
    if (coin(rng)) b.sentences.push_back(tokenize(kFiller[filler(rng)]));
    const bool b_first = coin(rng);

    Example ex;
    ex.id = "syn-" + std::to_string(seed) + "-" + std::to_string(k);
    if (b_first) {
      ex.paragraphs = {b, a};
    } else {
      ex.paragraphs = {a, b};
    }
    int answer_paragraph = b_first ? 0 : 1;
    if (distractors > 0) {
      // Distractors reuse the first-hop phrasing over entities disjoint from
      // the chain, so only the bridge identifies paragraph A.
      std::vector<std::size_t> used = {t, c, h};
      auto fresh = [&]() {
        std::size_t e = pick(rng);
        while (std::find(used.begin(), used.end(), e) != used.end()) e = pick(rng);
        used.push_back(e);
        return e;
      };
      for (std::size_t d = 0; d < distractors; ++d) {
        const std::size_t x = fresh();
        const std::size_t y = fresh();
        Paragraph p;
        p.title = pool[x];
        p.sentences.push_back(fill(kFirstHop[first_hop(rng)].statement, pool[x], pool[y]));
        if (coin(rng)) p.sentences.push_back(tokenize(kFiller[filler(rng)]));
        ex.paragraphs.push_back(std::move(p));
      }
      std::vector<std::size_t> order(ex.paragraphs.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      std::vector<Paragraph> shuffled;
      const auto original = static_cast<std::size_t>(answer_paragraph);
      for (std::size_t i = 0; i < order.size(); ++i) {
        if (order[i] == original) answer_paragraph = static_cast<int>(i);
        shuffled.push_back(ex.paragraphs[order[i]]);
      }
      ex.paragraphs = std::move(shuffled);
    }
    const Tokens& hs = pool[h];
    const Tokens& sent = b.sentences[0];
    const auto it = std::search(sent.begin(), sent.end(), hs.begin(), hs.end());
    ex.answer.text = hs;
    ex.answer.paragraph_idx = answer_paragraph;
    ex.answer.sentence_idx = 0;
    ex.answer.token_start = static_cast<int>(it - sent.begin());
    ex.answer.token_end = ex.answer.token_start + static_cast<int>(hs.size());
    ex.question = fill(hop1.question, pool[t], {});
    ex.validate();
    data.examples.push_back(std::move(ex));
  }
  return data;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocab::Vocab() : Vocab(std::vector<std::string>{}) {}

Vocab::Vocab(const std::vector<std::string>& non_reserved) {
  tokens_ = {"<pad>", "<unk>", "<sos>", "<eos>"};
  for (const auto& t : non_reserved) {
    if (ids_.count(t) || t == "<pad>" || t == "<unk>" || t == "<sos>" || t == "<eos>") {
      throw DataError("duplicate vocabulary token '" + t + "'");
    }
    tokens_.push_back(t);
  }
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) ids_.emplace(tokens_[i], i);
}

int Vocab::id(const std::string& token) const {
  const auto it = ids_.find(token);
  if (it == ids_.end() || it->second < kReserved) return kUnk;
  return it->second;
}

bool Vocab::contains(const std::string& token) const { return id(token) != kUnk; }

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw ContractError("vocab id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<std::string> Vocab::entries() const {
  return {tokens_.begin() + kReserved, tokens_.end()};
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocab '" + path + "'");
  for (const auto& t : entries()) out << t << '\n';
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocab '" + path + "'");
  std::vector<std::string> toks;
  std::string line;
  while (std::getline(in, line)) toks.push_back(line);
  return Vocab(toks);
}

Vocab build_vocab(const std::vector<Example>& examples, int max_size) {
  if (max_size < 5) throw DataError("build_vocab: max_size must be >= 5");
  std::map<std::string, long> freq;
  for (const auto& ex : examples) {
    for (const auto& p : ex.paragraphs) {
      for (const auto& t : p.title) ++freq[t];
      for (const auto& s : p.sentences) {
        for (const auto& t : s) ++freq[t];
      }
    }
    for (const auto& t : ex.question) ++freq[t];
  }
  std::vector<std::pair<std::string, long>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep =
      std::min(ranked.size(), static_cast<std::size_t>(max_size - Vocab::kReserved));
  std::vector<std::string> toks;
  toks.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) toks.push_back(ranked[i].first);
  return Vocab(toks);
}

Vocab build_vocab(const Dataset& data, int max_size) { return build_vocab(data.examples, max_size); }

// ---------------------------------------------------------------------------
// Flattening and encoding

FlatContext flatten_context(const Example& ex, std::size_t max_len) {
  const int np = static_cast<int>(ex.paragraphs.size());
  std::vector<std::vector<std::pair<std::string, TokenOrigin>>> paras(np);
  int answer_offset = 0;
  for (int p = 0; p < np; ++p) {
    const auto& para = ex.paragraphs[p];
    for (int t = 0; t < static_cast<int>(para.title.size()); ++t) {
      paras[p].push_back({para.title[t], {p, -1, t}});
    }
    for (int s = 0; s < static_cast<int>(para.sentences.size()); ++s) {
      if (p == ex.answer.paragraph_idx && s == ex.answer.sentence_idx) {
        answer_offset = static_cast<int>(paras[p].size()) + ex.answer.token_start;
      }
      for (int t = 0; t < static_cast<int>(para.sentences[s].size()); ++t) {
        paras[p].push_back({para.sentences[s][t], {p, s, t}});
      }
    }
  }
  const int ap = ex.answer.paragraph_idx;
  const int alen = ex.answer.token_end - ex.answer.token_start;
  std::vector<int> lo(np, 0);
  std::vector<int> hi(np);
  std::size_t total = 0;
  for (int p = 0; p < np; ++p) {
    hi[p] = static_cast<int>(paras[p].size());
    total += paras[p].size();
  }
  auto excess = [&]() { return total > max_len ? total - max_len : 0; };
  for (int p = np - 1; p >= 0 && excess() > 0; --p) {
    if (p == ap) continue;
    const int drop = static_cast<int>(std::min<std::size_t>(excess(), hi[p] - lo[p]));
    hi[p] -= drop;
    total -= static_cast<std::size_t>(drop);
  }
  if (excess() > 0) {
    const int drop = static_cast<int>(std::min<std::size_t>(excess(), hi[ap] - (answer_offset + alen)));
    hi[ap] -= drop;
    total -= static_cast<std::size_t>(drop);
  }
  if (excess() > 0) {
    const int drop = static_cast<int>(std::min<std::size_t>(excess(), answer_offset));
    lo[ap] += drop;
    total -= static_cast<std::size_t>(drop);
  }
  if (excess() > 0) {
    throw DataError("example '" + ex.id + "': answer span cannot survive truncation to " +
                    std::to_string(max_len) + " tokens");
  }
  FlatContext flat;
  for (int p = 0; p < np; ++p) {
    if (p == ap) flat.answer_start = static_cast<int>(flat.tokens.size()) + answer_offset - lo[p];
    for (int i = lo[p]; i < hi[p]; ++i) {
      flat.tokens.push_back(paras[p][i].first);
      flat.origin.push_back(paras[p][i].second);
    }
  }
  flat.answer_end = flat.answer_start + alen;
  return flat;
}

EncodedExample encode_example(const Example& ex, const Vocab& vocab, std::size_t max_context_len) {
  FlatContext flat = flatten_context(ex, max_context_len);
  EncodedExample enc;
  enc.id = ex.id;
  enc.answer_start = flat.answer_start;
  enc.answer_end = flat.answer_end;
  const int n = static_cast<int>(flat.tokens.size());
  enc.context_ids.resize(n);
  enc.tag_ids.assign(n, kTagO);
  for (int i = 0; i < n; ++i) {
    const int id = vocab.id(flat.tokens[i]);
    enc.context_ids[i] = id;
    if (id == Vocab::kUnk) enc.oov_map[i] = flat.tokens[i];
  }
  for (int i = flat.answer_start; i < flat.answer_end; ++i) {
    enc.tag_ids[i] = i == flat.answer_start ? kTagB : kTagI;
  }
  for (const auto& t : ex.answer.text) enc.answer_ids.push_back(vocab.id(t));
  for (const auto& t : ex.question) enc.question_ids.push_back(vocab.id(t));
  enc.question_ids.push_back(Vocab::kEos);
  enc.question_tokens = ex.question;
  enc.context_tokens = std::move(flat.tokens);
  return enc;
}

Tokens decode_ids(const std::vector<int>& ids, const Vocab& vocab) {
  Tokens out;
  for (int id : ids) {
    if (id == Vocab::kEos) break;
    if (id == Vocab::kSos || id == Vocab::kPad) continue;
    out.push_back(vocab.token(id));
  }
  return out;
}

}  // namespace mulqg
