#pragma once

#include "mulqg/config.hpp"
#include "mulqg/corpus.hpp"
#include "mulqg/model.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mulqg {

struct EpochRecord {
  int epoch = 0;  // zero-based; BFS is active when epoch >= bfs_start_epoch
  long step = 0;  // optimizer steps completed
  double lr = 0.0;
  double train_ce = 0.0;
  double train_bfs = 0.0;
  double train_loss = 0.0;
  double dev_nll = 0.0;  // token-level, eval mode; 0 without a dev set
  bool bfs_active = false;

  nlohmann::json to_json() const;
};

struct StepRecord {
  long step = 0;
  double lr = 0.0;
  double ce = 0.0;  // batch mean
  double loss = 0.0;
};

struct TrainData {
  std::vector<Example> train;
  std::vector<Example> dev;
  std::vector<Tokens> lexicon;
};

struct TrainHooks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
  // Return true to stop after the current step.
  std::function<bool(const StepRecord&)> should_stop;
};

struct TrainResult {
  std::unique_ptr<Model> model;
  std::vector<EpochRecord> log;
  long steps = 0;
  std::size_t skipped_examples = 0;
  std::string best_checkpoint;
  std::string last_checkpoint;
  double best_dev_nll = 0.0;
};

// Training data from the config's paths (train, dev, lexicon, embeddings).
TrainData load_train_data(const Config& config);

// Vocabulary from the training examples, parameters from the config seed.
// Writes checkpoints and metrics.jsonl under paths.out_dir when it is set.
TrainResult train(const Config& config, const TrainData& data, const TrainHooks& hooks = {});

// Mean per-token negative log-likelihood under teacher forcing, eval mode.
double token_nll(const Model& model, const std::vector<PreparedExample>& examples);

}  // namespace mulqg
