#include "mulqg/diagnostics.hpp"

#include "mulqg/decoder.hpp"
#include "mulqg/encoder.hpp"
#include "mulqg/errors.hpp"
#include "mulqg/loss.hpp"

#include <algorithm>
#include <random>

namespace mulqg {

nlohmann::json ModelGradCheck::to_json() const {
  nlohmann::json groups_json = nlohmann::json::array();
  for (const auto& g : groups) {
    groups_json.push_back({{"group", g.group},
                           {"tensors", g.tensors},
                           {"max_rel_error", g.max_rel_error},
                           {"worst", g.worst}});
  }
  return {{"module", module},
          {"eps", eps},
          {"values", values},
          {"max_rel_error", max_rel_error},
          {"worst", report.worst},
          {"groups", std::move(groups_json)}};
}

namespace {

struct GroupSpec {
  const char* group;
  std::vector<const char*> prefixes;
  bool encoder;
  bool decoder;
};

const std::vector<GroupSpec>& group_specs() {
  static const std::vector<GroupSpec> specs = {
      {"embedding", {"embed."}, true, true},
      {"context_encoder", {"enc.context."}, true, false},
      {"answer_encoder", {"enc.answer."}, true, false},
      {"coattention_pass1", {"coatt1."}, true, false},
      {"coattention_pass2", {"coatt2."}, true, false},
      {"mask_projection", {"mask."}, true, false},
      {"gat_layer0", {"gat.l0."}, true, false},
      {"gat_layer1", {"gat.l1."}, true, false},
      {"bi_attention", {"biatt."}, true, false},
      {"gate", {"gate."}, true, false},
      {"decoder", {"dec.lstm.", "dec.init.", "dec.combine.", "dec.out."}, false, true},
      {"pointer", {"dec.att."}, false, true},
  };
  return specs;
}

bool has_prefix(const std::string& s, const char* p) { return s.rfind(p, 0) == 0; }

}  // namespace

ModelGradCheck grad_check_model(const std::string& module, const GradCheckSetup& s) {
  if (module != "all" && module != "encoder" && module != "decoder") {
    throw ConfigError("grad-check module must be all, encoder, or decoder (got '" + module + "')");
  }
  if (s.context_len < s.entities * 2 + 2 || s.answer_len < 1 || s.answer_len > s.context_len) {
    throw ConfigError("grad-check instance is too small for the requested entity count");
  }
  std::mt19937_64 rng(s.seed);
  std::vector<std::string> words;
  for (int k = 0; k < 12; ++k) words.push_back("w" + std::to_string(k));
  const Vocab vocab(words);

  // Random context with a few out-of-vocabulary positions so the copy path
  // reaches extended ids.
  EncodedExample enc;
  enc.id = "grad-check";
  std::uniform_int_distribution<int> word(Vocab::kReserved, vocab.size() - 1);
  const char* oov[] = {"oova", "oovb"};
  for (int i = 0; i < s.context_len; ++i) {
    const bool is_oov = i % 5 == 3;
    enc.context_ids.push_back(is_oov ? Vocab::kUnk : word(rng));
    enc.context_tokens.push_back(is_oov ? oov[(i / 5) % 2] : vocab.token(enc.context_ids.back()));
    if (is_oov) enc.oov_map[i] = enc.context_tokens.back();
  }
  enc.answer_start = s.context_len - s.answer_len;
  enc.answer_end = s.context_len;
  enc.tag_ids.assign(static_cast<std::size_t>(s.context_len), kTagO);
  for (int i = enc.answer_start; i < enc.answer_end; ++i) {
    enc.tag_ids[static_cast<std::size_t>(i)] = i == enc.answer_start ? kTagB : kTagI;
    enc.answer_ids.push_back(enc.context_ids[static_cast<std::size_t>(i)]);
  }

  // Entity k spans tokens [2k, 2k+2); a chain plus one chord, rooted at 0.
  EntityGraph graph;
  graph.g = s.entities;
  graph.adj.assign(static_cast<std::size_t>(s.entities), std::vector<bool>(static_cast<std::size_t>(s.entities)));
  for (int k = 0; k < s.entities; ++k) {
    Mention m;
    m.entity_idx = k;
    m.start = 2 * k;
    m.end = 2 * k + 2;
    m.surface = Tokens(enc.context_tokens.begin() + m.start, enc.context_tokens.begin() + m.end);
    graph.mentions.push_back(m);
    if (k + 1 < s.entities) graph.adj[k][k + 1] = graph.adj[k + 1][k] = true;
  }
  if (s.entities > 3) graph.adj[0][3] = graph.adj[3][0] = true;
  graph.answer_entities = {0};
  const Matrix spans = span_map(graph.mentions, s.context_len, s.entities);
  // One hop leaves some entities outside the mask, so both BCE branches count.
  const BfsMask bfs = bfs_mask(graph, 1);

  const ExtendedVocab ext(enc, vocab);
  std::vector<int> targets;
  std::uniform_int_distribution<int> any(Vocab::kReserved, ext.size() - 1);
  for (int t = 0; t < s.question_len; ++t) targets.push_back(any(rng));
  targets.push_back(ext.base_size());  // first OOV surface, copy only
  targets.push_back(Vocab::kEos);

  EncoderDims ed;
  ed.vocab = vocab.size();
  ed.embed = s.embed;
  ed.hidden = s.hidden;
  ed.tag_dim = s.tag_dim;
  ed.gcn_layers = 2;
  const EncoderParams ep = EncoderParams::init(ed, rng);
  DecoderDims dd;
  dd.vocab = vocab.size();
  dd.embed = s.embed;
  dd.hidden = s.hidden;
  const DecoderParams dp = DecoderParams::init(dd, ep.word_embedding, rng);
  ParamSet all;
  ep.register_into(all);
  dp.register_into(all);

  auto loss_fn = [&]() {
    const EncoderOutputs out = encode(enc, graph, spans, ep);
    const DecodeContext ctx = make_decode_context(out.C_final, ext, dp);
    const Tensor dists = teacher_forced(init_state(out.C_final, dp), targets, ctx, dp);
    return compute_loss(dists, targets, out.soft_mask, bfs.mask, s.lambda, bfs.empty_roots).total;
  };

  ModelGradCheck result;
  result.module = module;
  result.eps = s.eps;
  ParamSet selected;
  std::vector<std::pair<const GroupSpec*, std::string>> membership;
  for (const auto& spec : group_specs()) {
    const bool wanted = module == "all" || (module == "encoder" ? spec.encoder : spec.decoder);
    if (!wanted) continue;
    for (const auto& [name, t] : all.items()) {
      const bool match = std::any_of(spec.prefixes.begin(), spec.prefixes.end(),
                                     [&](const char* p) { return has_prefix(name, p); });
      if (!match || selected.contains(name)) continue;
      selected.add(name, t);
      membership.emplace_back(&spec, name);
    }
  }
  result.values = selected.num_values();
  result.report = grad_check(loss_fn, selected, s.eps);
  result.max_rel_error = result.report.max_rel_error;
  for (const auto& spec : group_specs()) {
    GroupCheck gc;
    gc.group = spec.group;
    for (const auto& [owner, name] : membership) {
      if (owner != &spec) continue;
      gc.tensors.push_back(name);
      for (const auto& e : result.report.entries) {
        if (e.name == name && (gc.worst.empty() || e.max_rel_error > gc.max_rel_error)) {
          gc.max_rel_error = e.max_rel_error;
          gc.worst = name;
        }
      }
    }
    if (!gc.tensors.empty()) result.groups.push_back(std::move(gc));
  }
  return result;
}

}  // namespace mulqg
