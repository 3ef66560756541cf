#pragma once

#include "mulqg/corpus.hpp"
#include "mulqg/entgraph.hpp"
#include "mulqg/lstm.hpp"
#include "mulqg/params.hpp"

#include <random>
#include <string>
#include <vector>

namespace mulqg {

struct EncoderDims {
  Index vocab = 0;
  Index embed = 32;
  Index hidden = 64;  // d; each direction carries d/2
  Index tag_dim = 16;
  int gcn_layers = 2;
  int lstm_layers = 2;
};

struct GatLayerParams {
  Tensor w;  // 2d x 2d
  Tensor u;  // 4d x 1, scores u^T [W e_i; W e_j]
};

struct EncoderParams {
  EncoderDims dims;
  Tensor word_embedding;  // |V| x embed
  Tensor tag_embedding;   // 3 x tag_dim
  std::vector<BiLstmParams> context_lstm;
  std::vector<BiLstmParams> answer_lstm;
  BiLstmParams fusion1;  // 3d -> d, first co-attention pass
  BiLstmParams fusion2;  // second pass, separate weights
  Tensor mask_proj;      // d x 2d
  std::vector<GatLayerParams> gat;
  Tensor entity_proj;    // d x 2d
  Tensor biatt_out;      // d x 4d
  Tensor gate_w0, gate_w1, gate_w2;  // d x 1 each
  Tensor gate_b;                     // 1 x 1

  static EncoderParams init(const EncoderDims& dims, std::mt19937_64& rng);
  void register_into(ParamSet& set) const;
};

// Runtime switches. Dropout applies only when `training` is set.
struct EncoderOptions {
  bool training = false;
  double dropout_lstm = 0.0;
  double dropout_gcn = 0.0;
  bool bypass_graph = false;      // A1 := A0
  bool mask_every_layer = false;  // recompute the soft mask before each GAT layer
  double leaky_slope = 0.2;
  std::mt19937_64* rng = nullptr;
};

struct CoattentionTrace {
  Tensor affinity;        // S, n x m
  Tensor over_context;    // S', each column sums to 1
  Tensor over_answer;     // S'', m x n, each column sums to 1
  Tensor attended_answer; // A', d x m
  Tensor fused;           // C~, 2d x n
};

struct BiAttentionTrace {
  Tensor similarity;  // m x g
  Tensor answer_to_entity;  // p, m x g rows sum to 1
  Tensor entity_to_answer;  // beta, m x 1
};

struct EncoderOutputs {
  Tensor C0, C1, C2, C_final;
  Tensor A0, A1;
  Tensor soft_mask;  // 1 x g
  Tensor E0, E_M;    // 2d x g
  Tensor gate;       // 1 x n
  bool graph_bypassed = false;
  CoattentionTrace pass1, pass2;
  std::vector<Tensor> gat_attention;  // g x g per layer, rows sum to 1
  BiAttentionTrace biatt;
};

struct InitialEncoding {
  Tensor C0;  // d x n
  Tensor A0;  // d x m
};

InitialEncoding encode_initial(const EncodedExample& enc, const EncoderParams& params,
                               const EncoderOptions& opts = {});

// Co-attention followed by a fusion BiLSTM over [C~; C_in] (3d x n).
Tensor coattention_pass(const Tensor& C_in, const Tensor& A_in, const BiLstmParams& fusion,
                        const EncoderOptions& opts = {}, CoattentionTrace* trace = nullptr);

// Column j = [mean; max] of C1 over the tokens marked in span_map column j.
Tensor entity_encode(const Tensor& C1, const Matrix& span_map);

Tensor soft_mask(const Tensor& A0, const Tensor& E0, const Tensor& mask_proj);

Tensor gat_propagate(const Tensor& E0, const Tensor& mask, const Matrix& adjacency,
                     const std::vector<GatLayerParams>& layers, const EncoderOptions& opts = {},
                     std::vector<Tensor>* attention = nullptr, const Tensor* A0 = nullptr,
                     const Tensor* mask_proj = nullptr);

Tensor bi_attention(const Tensor& A0, const Tensor& E_M, const Tensor& entity_proj,
                    const Tensor& out_proj, BiAttentionTrace* trace = nullptr);

struct GateResult {
  Tensor C_final;
  Tensor gate;  // 1 x n
};

GateResult reason_gate(const Tensor& C0, const Tensor& C1, const Tensor& C2, const Tensor& w0,
                       const Tensor& w1, const Tensor& w2, const Tensor& b);

EncoderOutputs encode(const EncodedExample& enc, const EntityGraph& graph, const Matrix& span_map,
                      const EncoderParams& params, const EncoderOptions& opts = {});

// word2vec text format: optional "count dim" header, then "token v1 ... vdim".
// Rows for vocabulary tokens found in the file are overwritten; returns how many.
std::size_t load_word2vec_text(const std::string& path, const Vocab& vocab, Tensor& embedding);

}  // namespace mulqg
