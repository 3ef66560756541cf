#include "mulqg/model.hpp"

#include "mulqg/errors.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace mulqg {

using nlohmann::json;

Model::Model(const Config& config, Vocab vocab, std::vector<Tokens> lexicon)
    : config_(config), vocab_(std::move(vocab)), lexicon_(std::move(lexicon)) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  EncoderDims ed;
  ed.vocab = vocab_.size();
  ed.embed = config_.dims.embed;
  ed.hidden = config_.dims.hidden;
  ed.tag_dim = config_.dims.tag_dim;
  ed.gcn_layers = config_.gcn_layers;
  enc_ = EncoderParams::init(ed, rng);
  DecoderDims dd;
  dd.vocab = vocab_.size();
  dd.embed = config_.dims.embed;
  dd.hidden = config_.dims.hidden;
  dec_ = DecoderParams::init(dd, enc_.word_embedding, rng);
  enc_.register_into(params_);
  dec_.register_into(params_);
}

PreparedExample Model::prepare(const Example& ex) const {
  PreparedExample p;
  p.source = ex;
  const auto max_len = static_cast<std::size_t>(config_.max_context_len);
  p.encoded = encode_example(ex, vocab_, max_len);
  const FlatContext flat = flatten_context(ex, max_len);
  p.graph = build_example_graph(ex, flat, lexicon_, config_.graph_options(), &p.dropped_mentions);
  p.span_map = span_map(p.graph.mentions, static_cast<int>(flat.tokens.size()), p.graph.g);
  p.bfs = bfs_mask(p.graph, config_.effective_bfs_hops());
  p.ext = ExtendedVocab(p.encoded, vocab_);
  const std::size_t qlen = std::min(ex.question.size(), static_cast<std::size_t>(config_.max_question_len));
  for (std::size_t i = 0; i < qlen; ++i) p.targets.push_back(p.ext.lookup(ex.question[i], vocab_));
  p.targets.push_back(Vocab::kEos);
  return p;
}

ForwardResult Model::forward(const PreparedExample& ex, const ForwardOptions& opts) const {
  EncoderOptions eo;
  eo.training = opts.training;
  eo.dropout_lstm = config_.dropout_lstm;
  eo.dropout_gcn = config_.dropout_gcn;
  eo.bypass_graph = config_.bypass_graph;
  eo.mask_every_layer = config_.mask_every_layer;
  eo.rng = opts.rng;
  ForwardResult out;
  out.encoder = encode(ex.encoded, ex.graph, ex.span_map, enc_, eo);
  DecoderOptions dopt;
  dopt.training = opts.training;
  dopt.dropout_lstm = config_.dropout_lstm;
  dopt.rng = opts.rng;
  const DecodeContext ctx = make_decode_context(out.encoder.C_final, ex.ext, dec_);
  out.dists = teacher_forced(init_state(out.encoder.C_final, dec_), ex.targets, ctx, dec_, dopt);
  const bool skip_bfs = opts.lambda == 0.0 || config_.bypass_graph || ex.bfs.empty_roots;
  out.loss = compute_loss(out.dists, ex.targets, out.encoder.soft_mask, skip_bfs ? std::vector<double>{} : ex.bfs.mask,
                          opts.lambda, skip_bfs);
  return out;
}

Generation Model::generate(const PreparedExample& ex, int beam, int max_len) const {
  NoGradGuard ng;
  EncoderOptions eo;
  eo.bypass_graph = config_.bypass_graph;
  eo.mask_every_layer = config_.mask_every_layer;
  const EncoderOutputs enc = encode(ex.encoded, ex.graph, ex.span_map, enc_, eo);
  return beam_decode(enc.C_final, ex.ext, vocab_, dec_, beam, max_len);
}

json checkpoint_json(const Model& model, long step, int epoch) {
  json lex = json::array();
  for (const auto& e : model.lexicon()) lex.push_back(join(e));
  return {{"version", kCheckpointVersion},
          {"config", config_to_json(model.config())},
          {"vocab", model.vocab().entries()},
          {"lexicon", std::move(lex)},
          {"params", model.params_json()},
          {"step", step},
          {"epoch", epoch}};
}

void save_checkpoint(const Model& model, long step, int epoch, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw DataError("cannot write checkpoint '" + tmp + "'");
    out << checkpoint_json(model, step, epoch).dump();
    if (!out) throw DataError("failed writing checkpoint '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("checkpoint '" + path + "' is not valid JSON: " + e.what());
  }
  if (j.value("version", 0) != kCheckpointVersion) {
    throw DataError("checkpoint '" + path + "' has unsupported version");
  }
  Checkpoint c;
  c.config = config_from_json(j.at("config"));
  c.vocab = Vocab(j.at("vocab").get<std::vector<std::string>>());
  for (const auto& e : j.at("lexicon")) c.lexicon.push_back(tokenize(e.get<std::string>()));
  c.params = j.at("params");
  c.step = j.at("step").get<long>();
  c.epoch = j.at("epoch").get<int>();
  return c;
}

Model load_model(const Checkpoint& ckpt) {
  Model m(ckpt.config, ckpt.vocab, ckpt.lexicon);
  m.load_params_json(ckpt.params);
  return m;
}

}  // namespace mulqg
