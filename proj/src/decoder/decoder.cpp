#include "mulqg/decoder.hpp"

#include "mulqg/errors.hpp"
#include "mulqg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mulqg {

DecoderParams DecoderParams::init(const DecoderDims& dims, const Tensor& shared_embedding,
                                  std::mt19937_64& rng) {
  const Index d = dims.hidden;
  DecoderParams p;
  p.dims = dims;
  p.embedding = shared_embedding;
  for (int l = 0; l < dims.layers; ++l) {
    p.lstm.push_back(LstmParams::init(l == 0 ? dims.embed + d : d, d, rng));
  }
  p.init_w = uniform_param(2 * dims.layers * d, d, d, rng);
  p.init_b = uniform_param(2 * dims.layers * d, 1, d, rng);
  p.att_w = uniform_param(d, d, d, rng);
  p.combine_w = uniform_param(d, 2 * d, 2 * d, rng);
  p.out_w = uniform_param(dims.vocab, d, d, rng);
  p.out_b = uniform_param(dims.vocab, 1, d, rng);
  return p;
}

void DecoderParams::register_into(ParamSet& set) const {
  for (std::size_t l = 0; l < lstm.size(); ++l) lstm[l].register_into(set, "dec.lstm.l" + std::to_string(l));
  set.add("dec.init.w", init_w);
  set.add("dec.init.b", init_b);
  set.add("dec.att.w", att_w);
  set.add("dec.combine.w", combine_w);
  set.add("dec.out.w", out_w);
  set.add("dec.out.b", out_b);
}

ExtendedVocab::ExtendedVocab(const EncodedExample& enc, const Vocab& vocab) : base_(vocab.size()) {
  std::map<std::string, int> seen;
  position_ids_.resize(enc.context_ids.size());
  for (std::size_t i = 0; i < enc.context_ids.size(); ++i) {
    const int id = enc.context_ids[i];
    if (id != Vocab::kUnk) {
      position_ids_[i] = id;
      continue;
    }
    const auto it = enc.oov_map.find(static_cast<int>(i));
    const std::string surface = it == enc.oov_map.end() ? vocab.token(Vocab::kUnk) : it->second;
    auto [pos, inserted] = seen.emplace(surface, base_ + static_cast<int>(oov_.size()));
    if (inserted) oov_.push_back(surface);
    position_ids_[i] = pos->second;
  }
}

int ExtendedVocab::lookup(const std::string& token, const Vocab& vocab) const {
  const int id = vocab.id(token);
  if (id != Vocab::kUnk) return id;
  for (std::size_t k = 0; k < oov_.size(); ++k) {
    if (oov_[k] == token) return base_ + static_cast<int>(k);
  }
  return Vocab::kUnk;
}

std::string ExtendedVocab::render(int id, const Vocab& vocab) const {
  if (id >= base_) return oov_.at(static_cast<std::size_t>(id - base_));
  return vocab.token(id);
}

std::map<int, double> maxout_copy_scores(const std::vector<double>& raw_scores,
                                         const std::vector<int>& position_ids) {
  if (raw_scores.size() != position_ids.size()) {
    throw DimensionError("maxout_copy_scores: " + std::to_string(raw_scores.size()) +
                         " scores for " + std::to_string(position_ids.size()) + " positions");
  }
  std::map<int, double> out;
  for (std::size_t k = 0; k < raw_scores.size(); ++k) {
    auto [it, inserted] = out.emplace(position_ids[k], raw_scores[k]);
    if (!inserted && raw_scores[k] > it->second) it->second = raw_scores[k];
  }
  return out;
}

DecodeContext make_decode_context(const Tensor& C_final, const ExtendedVocab& ext,
                                  const DecoderParams& params) {
  DecodeContext ctx;
  ctx.memory = C_final;
  ctx.keys = matmul(params.att_w, C_final);
  ctx.ext_size = ext.size();
  std::map<int, Index> slot_of;
  const auto& ids = ext.position_ids();
  if (static_cast<Index>(ids.size()) != C_final.cols()) {
    throw DimensionError("make_decode_context: extended ids do not cover the context");
  }
  ctx.copy_group.resize(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto [it, inserted] = slot_of.emplace(ids[i], static_cast<Index>(ctx.slot_target.size()));
    if (inserted) ctx.slot_target.push_back(ids[i]);
    ctx.copy_group[i] = it->second;
  }
  return ctx;
}

DecoderState init_state(const Tensor& C_final, const DecoderParams& params) {
  const Index d = params.dims.hidden;
  Tensor pooled = mean(C_final, Axis::kRows);
  Tensor all = tanh(add(matmul(params.init_w, pooled), params.init_b));
  DecoderState s;
  for (int l = 0; l < params.dims.layers; ++l) {
    s.layers.push_back({slice(all, 2 * l * d, d, 0, 1), slice(all, (2 * l + 1) * d, d, 0, 1)});
  }
  s.feed = Tensor::zeros(d, 1);
  return s;
}

StepOutput decoder_step(const DecoderState& state, int prev_token, const DecodeContext& ctx,
                        const DecoderParams& params, const DecoderOptions& opts) {
  const int token = prev_token >= params.dims.vocab ? Vocab::kUnk : prev_token;
  Tensor x = concat_rows({embedding_lookup(params.embedding, {token}), state.feed});
  StepOutput out;
  for (std::size_t l = 0; l < params.lstm.size(); ++l) {
    if (opts.training && opts.dropout_lstm > 0.0 && opts.rng) x = dropout(x, opts.dropout_lstm, *opts.rng);
    LstmCellState next = lstm_step(params.lstm[l], matmul(params.lstm[l].w_in, x), state.layers[l]);
    out.state.layers.push_back(next);
    x = next.h;
  }
  const Tensor& h = x;
  out.raw_scores = matmul(transpose(h), ctx.keys);  // 1 x n
  out.attention = softmax(out.raw_scores, Axis::kRows);
  Tensor context = matmul(ctx.memory, transpose(out.attention));  // d x 1
  Tensor feed = tanh(matmul(params.combine_w, concat_rows({h, context})));
  out.state.feed = feed;

  Tensor gen = add(matmul(params.out_w, feed), params.out_b);  // |V| x 1
  const Index slots = static_cast<Index>(ctx.slot_target.size());
  out.copy_logits = segment_max(transpose(out.raw_scores), ctx.copy_group, slots);
  Tensor joint = softmax(concat_rows({gen, out.copy_logits}), Axis::kCols);
  std::vector<Index> target(static_cast<std::size_t>(params.dims.vocab + slots));
  for (Index v = 0; v < params.dims.vocab; ++v) target[static_cast<std::size_t>(v)] = v;
  for (Index k = 0; k < slots; ++k) target[static_cast<std::size_t>(params.dims.vocab + k)] = ctx.slot_target[k];
  out.dist = scatter_add_rows(joint, target, ctx.ext_size);
  return out;
}

Tensor teacher_forced(const DecoderState& init, const std::vector<int>& targets,
                      const DecodeContext& ctx, const DecoderParams& params,
                      const DecoderOptions& opts) {
  if (targets.empty()) throw ContractError("teacher_forced: empty target sequence");
  std::vector<Tensor> dists;
  DecoderState state = init;
  int prev = Vocab::kSos;
  for (int tgt : targets) {
    StepOutput s = decoder_step(state, prev, ctx, params, opts);
    dists.push_back(s.dist);
    state = std::move(s.state);
    prev = tgt;
  }
  return concat_cols(dists);
}

namespace {

Generation finish(const std::vector<int>& ids, double logprob, const ExtendedVocab& ext,
                  const Vocab& vocab) {
  Generation g;
  g.logprob = logprob;
  for (int id : ids) {
    if (id == Vocab::kEos) break;
    g.ids.push_back(id);
    g.tokens.push_back(ext.render(id, vocab));
  }
  return g;
}

// Both decoders take logs through this one routine so their scores agree bitwise.
std::vector<double> log_probs(const Matrix& dist) {
  std::vector<double> out(static_cast<std::size_t>(dist.rows()));
  for (Index i = 0; i < dist.rows(); ++i) {
    out[static_cast<std::size_t>(i)] =
        dist(i, 0) > 0.0 ? std::log(dist(i, 0)) : -std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace

Generation beam_decode(const Tensor& C_final, const ExtendedVocab& ext, const Vocab& vocab,
                       const DecoderParams& params, int beam, int max_len) {
  if (beam < 1 || max_len < 1) throw ContractError("beam_decode: beam and max_len must be >= 1");
  NoGradGuard ng;
  const DecodeContext ctx = make_decode_context(C_final, ext, params);
  auto step = [&](const DecoderState& s, int prev) {
    StepOutput out = decoder_step(s, prev, ctx, params);
    return std::make_pair(log_probs(out.dist.value()), std::move(out.state));
  };
  BeamOptions opts{beam, max_len, Vocab::kSos, Vocab::kEos};
  auto best = beam_search(init_state(C_final, params), step, opts);
  return finish(best.tokens, best.logprob, ext, vocab);
}

Generation greedy_decode(const Tensor& C_final, const ExtendedVocab& ext, const Vocab& vocab,
                         const DecoderParams& params, int max_len) {
  NoGradGuard ng;
  const DecodeContext ctx = make_decode_context(C_final, ext, params);
  DecoderState state = init_state(C_final, params);
  std::vector<int> ids;
  double logprob = 0.0;
  int prev = Vocab::kSos;
  for (int t = 0; t < max_len; ++t) {
    StepOutput out = decoder_step(state, prev, ctx, params);
    const std::vector<double> logp = log_probs(out.dist.value());
    const auto best = std::max_element(logp.begin(), logp.end()) - logp.begin();
    logprob += logp[static_cast<std::size_t>(best)];
    ids.push_back(static_cast<int>(best));
    if (best == Vocab::kEos) break;
    state = std::move(out.state);
    prev = static_cast<int>(best);
  }
  return finish(ids, logprob, ext, vocab);
}

}  // namespace mulqg
