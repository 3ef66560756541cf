#pragma once

#include "mulqg/config.hpp"
#include "mulqg/corpus.hpp"
#include "mulqg/decoder.hpp"
#include "mulqg/encoder.hpp"
#include "mulqg/entgraph.hpp"
#include "mulqg/loss.hpp"
#include "mulqg/params.hpp"

#include <nlohmann/json.hpp>

#include <random>
#include <string>
#include <vector>

namespace mulqg {

// Everything the network consumes for one example, derived once.
struct PreparedExample {
  Example source;
  EncodedExample encoded;
  EntityGraph graph;
  Matrix span_map;
  BfsMask bfs;
  ExtendedVocab ext;
  std::vector<int> targets;  // extended ids, ends with EOS
  std::size_t dropped_mentions = 0;
};

struct ForwardOptions {
  bool training = false;
  double lambda = 0.0;  // 0 disables the BFS term
  std::mt19937_64* rng = nullptr;
};

struct ForwardResult {
  EncoderOutputs encoder;
  Tensor dists;
  LossTerms loss;
};

class Model {
 public:
  Model(const Config& config, Vocab vocab, std::vector<Tokens> lexicon);

  const Config& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  const std::vector<Tokens>& lexicon() const { return lexicon_; }
  const ParamSet& params() const { return params_; }
  ParamSet& params() { return params_; }
  const EncoderParams& encoder() const { return enc_; }
  const DecoderParams& decoder() const { return dec_; }

  PreparedExample prepare(const Example& ex) const;
  ForwardResult forward(const PreparedExample& ex, const ForwardOptions& opts = {}) const;
  Generation generate(const PreparedExample& ex, int beam, int max_len) const;

  // Parameters as JSON; load requires identical names and shapes.
  nlohmann::json params_json() const { return tensors_to_json(params_); }
  void load_params_json(const nlohmann::json& j) { tensors_from_json(j, params_); }

 private:
  Config config_;
  Vocab vocab_;
  std::vector<Tokens> lexicon_;
  EncoderParams enc_;
  DecoderParams dec_;
  ParamSet params_;
};

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  Config config;
  Vocab vocab;
  std::vector<Tokens> lexicon;
  nlohmann::json params;
  long step = 0;
  int epoch = 0;
};

nlohmann::json checkpoint_json(const Model& model, long step, int epoch);
// Written to a temporary file, then renamed over `path`.
void save_checkpoint(const Model& model, long step, int epoch, const std::string& path);
Checkpoint read_checkpoint(const std::string& path);
Model load_model(const Checkpoint& ckpt);

}  // namespace mulqg
