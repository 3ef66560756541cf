#pragma once

#include "mulqg/beam.hpp"
#include "mulqg/corpus.hpp"
#include "mulqg/lstm.hpp"
#include "mulqg/params.hpp"

#include <map>
#include <random>
#include <string>
#include <vector>

namespace mulqg {

struct DecoderDims {
  Index vocab = 0;
  Index embed = 32;
  Index hidden = 64;
  int layers = 2;
};

struct DecoderParams {
  DecoderDims dims;
  Tensor embedding;  // shared with the encoder's word table
  std::vector<LstmParams> lstm;
  Tensor init_w;     // (2 * layers * d) x d
  Tensor init_b;     // (2 * layers * d) x 1
  Tensor att_w;      // d x d, bilinear scores h^T W C
  Tensor combine_w;  // d x 2d
  Tensor out_w;      // |V| x d
  Tensor out_b;      // |V| x 1

  static DecoderParams init(const DecoderDims& dims, const Tensor& shared_embedding,
                            std::mt19937_64& rng);
  void register_into(ParamSet& set) const;
};

struct DecoderState {
  std::vector<LstmCellState> layers;
  Tensor feed;  // previous attentional vector, d x 1
};

// Base vocabulary plus the example's out-of-vocabulary context surfaces.
class ExtendedVocab {
 public:
  ExtendedVocab() = default;
  ExtendedVocab(const EncodedExample& enc, const Vocab& vocab);

  int base_size() const { return base_; }
  int size() const { return base_ + static_cast<int>(oov_.size()); }
  const std::vector<std::string>& oov() const { return oov_; }
  // Extended id of each context position.
  const std::vector<int>& position_ids() const { return position_ids_; }
  // Vocab id, else the extended id of a context OOV surface, else UNK.
  int lookup(const std::string& token, const Vocab& vocab) const;
  std::string render(int id, const Vocab& vocab) const;

 private:
  int base_ = 0;
  std::vector<std::string> oov_;
  std::vector<int> position_ids_;
};

// Per-token copy score: the maximum raw attention score over the positions
// holding that token. Tokens absent from the input are not in the map (their
// score is -inf).
std::map<int, double> maxout_copy_scores(const std::vector<double>& raw_scores,
                                         const std::vector<int>& position_ids);

// Per-example tensors reused by every decoding step.
struct DecodeContext {
  Tensor memory;  // C_final, d x n
  Tensor keys;    // att_w * C_final
  std::vector<Index> copy_group;     // position -> unique-token slot
  std::vector<Index> slot_target;    // slot -> extended id
  Index ext_size = 0;
};

DecodeContext make_decode_context(const Tensor& C_final, const ExtendedVocab& ext,
                                  const DecoderParams& params);

DecoderState init_state(const Tensor& C_final, const DecoderParams& params);

struct DecoderOptions {
  bool training = false;
  double dropout_lstm = 0.0;
  std::mt19937_64* rng = nullptr;
};

struct StepOutput {
  Tensor dist;        // ext_size x 1, sums to 1
  Tensor raw_scores;  // 1 x n, pre-softmax attention scores
  Tensor attention;   // 1 x n
  Tensor copy_logits; // slots x 1
  DecoderState state;
};

StepOutput decoder_step(const DecoderState& state, int prev_token, const DecodeContext& ctx,
                        const DecoderParams& params, const DecoderOptions& opts = {});

// Teacher-forced distributions for every target position: ext_size x T.
Tensor teacher_forced(const DecoderState& init, const std::vector<int>& targets,
                      const DecodeContext& ctx, const DecoderParams& params,
                      const DecoderOptions& opts = {});

struct Generation {
  std::vector<int> ids;  // without EOS
  Tokens tokens;
  double logprob = 0.0;
};

Generation beam_decode(const Tensor& C_final, const ExtendedVocab& ext, const Vocab& vocab,
                       const DecoderParams& params, int beam, int max_len);
Generation greedy_decode(const Tensor& C_final, const ExtendedVocab& ext, const Vocab& vocab,
                         const DecoderParams& params, int max_len);

}  // namespace mulqg
