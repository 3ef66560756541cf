#include "mulqg/encoder.hpp"

#include "mulqg/errors.hpp"
#include "mulqg/ops.hpp"

#include <fstream>
#include <sstream>

namespace mulqg {

EncoderParams EncoderParams::init(const EncoderDims& dims, std::mt19937_64& rng) {
  if (dims.hidden % 2 != 0) throw ConfigError("hidden size must be even");
  if (dims.vocab <= Vocab::kReserved) throw ConfigError("vocabulary is empty");
  const Index d = dims.hidden;
  EncoderParams p;
  p.dims = dims;
  p.word_embedding = uniform_param(dims.vocab, dims.embed, dims.embed, rng);
  p.tag_embedding = uniform_param(3, dims.tag_dim, dims.tag_dim, rng);
  for (int l = 0; l < dims.lstm_layers; ++l) {
    p.context_lstm.push_back(BiLstmParams::init(l == 0 ? dims.embed + dims.tag_dim : d, d, rng));
  }
  for (int l = 0; l < dims.lstm_layers; ++l) {
    p.answer_lstm.push_back(BiLstmParams::init(l == 0 ? dims.embed : d, d, rng));
  }
  p.fusion1 = BiLstmParams::init(3 * d, d, rng);
  p.fusion2 = BiLstmParams::init(3 * d, d, rng);
  p.mask_proj = uniform_param(d, 2 * d, 2 * d, rng);
  for (int l = 0; l < dims.gcn_layers; ++l) {
    GatLayerParams layer;
    layer.w = uniform_param(2 * d, 2 * d, 2 * d, rng);
    layer.u = uniform_param(4 * d, 1, 4 * d, rng);
    p.gat.push_back(layer);
  }
  p.entity_proj = uniform_param(d, 2 * d, 2 * d, rng);
  p.biatt_out = uniform_param(d, 4 * d, 4 * d, rng);
  p.gate_w0 = uniform_param(d, 1, d, rng);
  p.gate_w1 = uniform_param(d, 1, d, rng);
  p.gate_w2 = uniform_param(d, 1, d, rng);
  p.gate_b = uniform_param(1, 1, d, rng);
  return p;
}

void EncoderParams::register_into(ParamSet& set) const {
  set.add("embed.word", word_embedding);
  set.add("embed.tag", tag_embedding);
  for (std::size_t l = 0; l < context_lstm.size(); ++l) {
    context_lstm[l].register_into(set, "enc.context.l" + std::to_string(l));
  }
  for (std::size_t l = 0; l < answer_lstm.size(); ++l) {
    answer_lstm[l].register_into(set, "enc.answer.l" + std::to_string(l));
  }
  fusion1.register_into(set, "coatt1.fusion");
  fusion2.register_into(set, "coatt2.fusion");
  set.add("mask.proj", mask_proj);
  for (std::size_t l = 0; l < gat.size(); ++l) {
    set.add("gat.l" + std::to_string(l) + ".w", gat[l].w);
    set.add("gat.l" + std::to_string(l) + ".u", gat[l].u);
  }
  set.add("biatt.entity_proj", entity_proj);
  set.add("biatt.out", biatt_out);
  set.add("gate.w0", gate_w0);
  set.add("gate.w1", gate_w1);
  set.add("gate.w2", gate_w2);
  set.add("gate.b", gate_b);
}

namespace {

Tensor maybe_dropout(const Tensor& x, double p, const EncoderOptions& opts) {
  if (!opts.training || p <= 0.0 || opts.rng == nullptr) return x;
  return dropout(x, p, *opts.rng);
}

Tensor run_stack(const std::vector<BiLstmParams>& stack, Tensor x, const EncoderOptions& opts) {
  for (const auto& layer : stack) x = run_bilstm(layer, maybe_dropout(x, opts.dropout_lstm, opts));
  return x;
}

}  // namespace

InitialEncoding encode_initial(const EncodedExample& enc, const EncoderParams& params,
                               const EncoderOptions& opts) {
  if (enc.context_ids.empty()) throw DataError("encode_initial: empty context (n = 0)");
  if (enc.answer_ids.empty()) throw DataError("encode_initial: empty answer (m = 0)");
  Tensor words = embedding_lookup(params.word_embedding, enc.context_ids);
  Tensor tags = embedding_lookup(params.tag_embedding, enc.tag_ids);
  Tensor ctx_in = concat_rows({words, tags});
  Tensor ans_in = embedding_lookup(params.word_embedding, enc.answer_ids);
  return {run_stack(params.context_lstm, ctx_in, opts), run_stack(params.answer_lstm, ans_in, opts)};
}

Tensor coattention_pass(const Tensor& C_in, const Tensor& A_in, const BiLstmParams& fusion,
                        const EncoderOptions& opts, CoattentionTrace* trace) {
  if (C_in.rows() != A_in.rows()) {
    throw DimensionError("coattention_pass: context " + C_in.shape_str() + " vs answer " +
                         A_in.shape_str());
  }
  Tensor S = matmul(transpose(C_in), A_in);                // n x m
  Tensor over_context = softmax(S, Axis::kCols);           // per answer token
  Tensor over_answer = softmax(transpose(S), Axis::kCols); // m x n, per context token
  Tensor attended = matmul(C_in, over_context);            // d x m
  Tensor fused = matmul(concat_rows({A_in, attended}), over_answer);  // 2d x n
  if (trace) *trace = {S, over_context, over_answer, attended, fused};
  Tensor x = concat_rows({fused, C_in});
  return run_bilstm(fusion, maybe_dropout(x, opts.dropout_lstm, opts));
}

Tensor entity_encode(const Tensor& C1, const Matrix& span_map) {
  if (span_map.rows() != C1.cols()) {
    throw DimensionError("entity_encode: span map has " + std::to_string(span_map.rows()) +
                         " rows for " + std::to_string(C1.cols()) + " tokens");
  }
  std::vector<Tensor> cols;
  for (Index j = 0; j < span_map.cols(); ++j) {
    std::vector<Index> idx;
    for (Index i = 0; i < span_map.rows(); ++i) {
      if (span_map(i, j) != 0.0) idx.push_back(i);
    }
    if (idx.empty()) throw DimensionError("entity_encode: entity " + std::to_string(j) + " has an empty span");
    Tensor span = gather_cols(C1, idx);
    cols.push_back(concat_rows({mean(span, Axis::kRows), max(span, Axis::kRows)}));
  }
  if (cols.empty()) return Tensor::zeros(2 * C1.rows(), 0);
  return concat_cols(cols);
}

Tensor soft_mask(const Tensor& A0, const Tensor& E0, const Tensor& mask_proj) {
  Tensor a0 = mean(A0, Axis::kRows);  // d x 1
  return sigmoid(matmul(matmul(transpose(a0), mask_proj), E0));
}

Tensor gat_propagate(const Tensor& E0, const Tensor& mask, const Matrix& adjacency,
                     const std::vector<GatLayerParams>& layers, const EncoderOptions& opts,
                     std::vector<Tensor>* attention, const Tensor* A0, const Tensor* mask_proj) {
  const Index g = E0.cols();
  if (g == 0) return E0;
  if (layers.empty()) throw ConfigError("gat_propagate: at least one layer is required");
  if (mask.rows() != 1 || mask.cols() != g || adjacency.rows() != g || adjacency.cols() != g) {
    throw DimensionError("gat_propagate: mask " + mask.shape_str() + " / adjacency " +
                         std::to_string(adjacency.rows()) + "x" + std::to_string(adjacency.cols()) +
                         " inconsistent with " + std::to_string(g) + " entities");
  }
  Matrix neighborhood = adjacency;
  for (Index i = 0; i < g; ++i) neighborhood(i, i) = 1.0;
  const Index width = E0.rows();
  Tensor E = mul(E0, broadcast(mask, width, g));
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (l > 0 && opts.mask_every_layer && A0 && mask_proj) {
      E = mul(E, broadcast(soft_mask(*A0, E, *mask_proj), width, g));
    }
    Tensor x = E;
    if (opts.training && opts.dropout_gcn > 0.0 && opts.rng) x = dropout(x, opts.dropout_gcn, *opts.rng);
    Tensor H = matmul(layers[l].w, x);  // 2d x g
    Tensor src = matmul(transpose(slice(layers[l].u, 0, width, 0, 1)), H);      // 1 x g
    Tensor dst = matmul(transpose(slice(layers[l].u, width, width, 0, 1)), H);  // 1 x g
    Tensor scores = add(broadcast(transpose(src), g, g), broadcast(dst, g, g));
    Tensor alpha = softmax(leaky_relu(scores, opts.leaky_slope), Axis::kRows, neighborhood);
    if (attention) attention->push_back(alpha);
    E = relu(matmul(H, transpose(alpha)));
  }
  return E;
}

Tensor bi_attention(const Tensor& A0, const Tensor& E_M, const Tensor& entity_proj,
                    const Tensor& out_proj, BiAttentionTrace* trace) {
  if (E_M.cols() == 0) throw ContractError("bi_attention: no entities");
  const Index d = A0.rows();
  const Index m = A0.cols();
  Tensor projected = matmul(entity_proj, E_M);          // d x g
  Tensor sim = matmul(transpose(A0), projected);        // m x g
  Tensor p = softmax(sim, Axis::kRows);
  Tensor attended = matmul(projected, transpose(p));    // d x m
  Tensor beta = softmax(max(sim, Axis::kRows), Axis::kCols);  // m x 1
  Tensor pooled = broadcast(matmul(A0, beta), d, m);
  if (trace) *trace = {sim, p, beta};
  Tensor G = concat_rows({A0, attended, mul(A0, attended), mul(A0, pooled)});
  return matmul(out_proj, G);
}

GateResult reason_gate(const Tensor& C0, const Tensor& C1, const Tensor& C2, const Tensor& w0,
                       const Tensor& w1, const Tensor& w2, const Tensor& b) {
  if (C0.rows() != C1.rows() || C1.rows() != C2.rows() || C0.cols() != C1.cols() ||
      C1.cols() != C2.cols()) {
    throw DimensionError("reason_gate: encodings " + C0.shape_str() + ", " + C1.shape_str() +
                         ", " + C2.shape_str() + " disagree");
  }
  const Index d = C1.rows();
  const Index n = C1.cols();
  Tensor logits = add(add(matmul(transpose(w2), C2), matmul(transpose(w1), C1)),
                      matmul(transpose(w0), C0));
  Tensor gate = sigmoid(add(logits, broadcast(b, 1, n)));
  Tensor gb = broadcast(gate, d, n);
  Tensor keep = mul(gb, C1);
  Tensor rest = mul(add_scalar(scale(gb, -1.0), 1.0), C2);
  return {add(keep, rest), gate};
}

EncoderOutputs encode(const EncodedExample& enc, const EntityGraph& graph, const Matrix& span_map,
                      const EncoderParams& params, const EncoderOptions& opts) {
  if (span_map.rows() != static_cast<Index>(enc.context_ids.size())) {
    throw DimensionError("encode: span map rows " + std::to_string(span_map.rows()) +
                         " vs context length " + std::to_string(enc.context_ids.size()));
  }
  if (span_map.cols() != graph.g) throw DimensionError("encode: span map columns vs entity count");
  EncoderOutputs out;
  InitialEncoding init = encode_initial(enc, params, opts);
  out.C0 = init.C0;
  out.A0 = init.A0;
  out.C1 = coattention_pass(out.C0, out.A0, params.fusion1, opts, &out.pass1);
  out.E0 = entity_encode(out.C1, span_map);
  if (graph.g == 0 || opts.bypass_graph) {
    out.graph_bypassed = true;
    out.soft_mask = graph.g == 0 ? Tensor::zeros(1, 0) : soft_mask(out.A0, out.E0, params.mask_proj);
    out.E_M = out.E0;
    out.A1 = out.A0;
  } else {
    out.soft_mask = soft_mask(out.A0, out.E0, params.mask_proj);
    out.E_M = gat_propagate(out.E0, out.soft_mask, graph.adjacency(), params.gat, opts,
                            &out.gat_attention, &out.A0, &params.mask_proj);
    out.A1 = bi_attention(out.A0, out.E_M, params.entity_proj, params.biatt_out, &out.biatt);
  }
  out.C2 = coattention_pass(out.C1, out.A1, params.fusion2, opts, &out.pass2);
  GateResult gate =
      reason_gate(out.C0, out.C1, out.C2, params.gate_w0, params.gate_w1, params.gate_w2, params.gate_b);
  out.C_final = gate.C_final;
  out.gate = gate.gate;
  return out;
}

std::size_t load_word2vec_text(const std::string& path, const Vocab& vocab, Tensor& embedding) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings '" + path + "'");
  const Index dim = embedding.cols();
  std::string line;
  std::size_t line_no = 0;
  std::size_t loaded = 0;
  Matrix& table = embedding.mutable_value();
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream is(line);
    std::string token;
    if (!(is >> token)) continue;
    std::vector<double> vals;
    double v = 0.0;
    while (is >> v) vals.push_back(v);
    if (line_no == 1 && vals.size() == 1) continue;  // "count dim" header
    if (static_cast<Index>(vals.size()) != dim) {
      throw DataError("embeddings line " + std::to_string(line_no) + " has " +
                      std::to_string(vals.size()) + " values, expected " + std::to_string(dim));
    }
    const int id = vocab.id(token);
    if (id == Vocab::kUnk) continue;
    for (Index k = 0; k < dim; ++k) table(id, k) = vals[static_cast<std::size_t>(k)];
    ++loaded;
  }
  return loaded;
}

}  // namespace mulqg
