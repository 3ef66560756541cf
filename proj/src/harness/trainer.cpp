#include "mulqg/trainer.hpp"

#include "mulqg/errors.hpp"
#include "mulqg/loss.hpp"
#include "mulqg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

namespace mulqg {

using nlohmann::json;

json EpochRecord::to_json() const {
  return {{"epoch", epoch},         {"step", step},           {"lr", lr},
          {"train_ce", train_ce},   {"train_bfs", train_bfs}, {"train_loss", train_loss},
          {"dev_nll", dev_nll},     {"bfs_active", bfs_active}};
}

TrainData load_train_data(const Config& config) {
  if (config.paths.train.empty()) throw ConfigError("paths.train is required for training");
  TrainData data;
  Dataset train = load_hotpot_jsonl(config.paths.train);
  data.train = std::move(train.examples);
  if (!config.paths.dev.empty()) data.dev = load_hotpot_jsonl(config.paths.dev).examples;
  if (!config.paths.lexicon.empty()) {
    data.lexicon = load_lexicon(config.paths.lexicon);
  } else {
    data.lexicon = std::move(train.lexicon);
  }
  return data;
}

namespace {

// Independent streams so that, e.g., changing dropout does not reshuffle data.
constexpr std::uint64_t kShuffleStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kDropoutStream = 0xbf58476d1ce4e5b9ULL;

std::vector<PreparedExample> prepare_all(const Model& model, const std::vector<Example>& examples,
                                         std::size_t* skipped) {
  std::vector<PreparedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    try {
      out.push_back(model.prepare(ex));
    } catch (const DataError&) {
      if (skipped) ++*skipped;
    }
  }
  return out;
}

class Sgd {
 public:
  Sgd(const ParamSet& params, double momentum, bool freeze_embeddings)
      : momentum_(momentum), freeze_(freeze_embeddings) {
    if (momentum_ > 0.0) {
      for (const auto& [name, t] : params.items()) velocity_[name] = Matrix::Zero(t.rows(), t.cols());
    }
  }

  void step(ParamSet& params, double lr, double grad_scale) {
    for (const auto& [name, t] : params.items()) {
      if (freeze_ && name == "embed.word") continue;
      if (!t.has_grad()) continue;
      Tensor handle = t;
      const Matrix g = t.grad() * grad_scale;
      if (momentum_ > 0.0) {
        Matrix& v = velocity_.at(name);
        v = momentum_ * v + g;
        handle.mutable_value() -= lr * v;
      } else {
        handle.mutable_value() -= lr * g;
      }
    }
  }

 private:
  double momentum_;
  bool freeze_;
  std::map<std::string, Matrix> velocity_;
};

}  // namespace

double token_nll(const Model& model, const std::vector<PreparedExample>& examples) {
  NoGradGuard ng;
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& ex : examples) {
    const ForwardResult r = model.forward(ex);
    const double n = static_cast<double>(ex.targets.size());
    total += r.loss.ce.item() * n;
    tokens += ex.targets.size();
  }
  return tokens == 0 ? 0.0 : total / static_cast<double>(tokens);
}

TrainResult train(const Config& config, const TrainData& data, const TrainHooks& hooks) {
  config.validate();
  if (data.train.empty()) throw DataError("training set is empty");
  TrainResult result;
  Vocab vocab = build_vocab(data.train, config.vocab_max_size);
  result.model = std::make_unique<Model>(config, std::move(vocab), data.lexicon);
  Model& model = *result.model;
  if (!config.paths.embeddings.empty()) {
    Tensor table = model.encoder().word_embedding;
    load_word2vec_text(config.paths.embeddings, model.vocab(), table);
  }

  std::vector<PreparedExample> train_set = prepare_all(model, data.train, &result.skipped_examples);
  if (train_set.empty()) throw DataError("no training example survived preparation");
  const std::vector<PreparedExample> dev_set = prepare_all(model, data.dev, &result.skipped_examples);

  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  const long steps_per_epoch = static_cast<long>((train_set.size() + batch - 1) / batch);
  const long total_steps = steps_per_epoch * config.max_epochs;

  std::mt19937_64 shuffle_rng(config.seed ^ kShuffleStream);
  std::mt19937_64 dropout_rng(config.seed ^ kDropoutStream);
  Sgd sgd(model.params(), config.momentum, config.freeze_embeddings);

  const std::string out_dir = config.paths.out_dir;
  std::ofstream metric_log;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    metric_log.open(std::filesystem::path(out_dir) / "metrics.jsonl");
    if (!metric_log) throw DataError("cannot write metrics log under '" + out_dir + "'");
  }
  auto checkpoint_path = [&](const std::string& name) {
    return (std::filesystem::path(out_dir) / name).string();
  };

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  bool stop = false;
  for (int epoch = 0; epoch < config.max_epochs && !stop; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const bool bfs_active = epoch >= config.bfs_start_epoch && !config.bypass_graph;
    const double lambda = bfs_active ? config.lambda_bfs : 0.0;
    EpochRecord rec;
    rec.epoch = epoch;
    rec.bfs_active = bfs_active;
    double ce_sum = 0.0;
    double bfs_sum = 0.0;
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t begin = 0; begin < order.size() && !stop; begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      const double inv = 1.0 / static_cast<double>(end - begin);
      const double lr = cosine_lr(step, total_steps, config.lr0);
      model.params().zero_grad();
      StepRecord srec;
      srec.step = step + 1;
      srec.lr = lr;
      for (std::size_t k = begin; k < end; ++k) {
        ForwardOptions fo;
        fo.training = true;
        fo.lambda = lambda;
        fo.rng = &dropout_rng;
        const ForwardResult r = model.forward(train_set[order[k]], fo);
        const double total = r.loss.total.item();
        if (!std::isfinite(total)) {
          throw NonFiniteError("non-finite loss at step " + std::to_string(step + 1) + " (example '" +
                               train_set[order[k]].encoded.id + "'); last good checkpoint: " +
                               (result.last_checkpoint.empty() ? "none" : result.last_checkpoint));
        }
        backward(scale(r.loss.total, inv));
        srec.ce += r.loss.ce.item() * inv;
        srec.loss += total * inv;
        ce_sum += r.loss.ce.item();
        bfs_sum += r.loss.bfs.item();
        loss_sum += total;
        ++seen;
      }
      const double norm = model.params().grad_norm();
      const double clip = config.grad_clip > 0.0 && norm > config.grad_clip ? config.grad_clip / norm : 1.0;
      sgd.step(model.params(), lr, clip);
      ++step;
      rec.lr = lr;
      if (hooks.on_step) hooks.on_step(srec);
      if (hooks.should_stop && hooks.should_stop(srec)) stop = true;
    }
    model.params().zero_grad();
    rec.step = step;
    rec.train_ce = ce_sum / static_cast<double>(seen);
    rec.train_bfs = bfs_sum / static_cast<double>(seen);
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.dev_nll = dev_set.empty() ? 0.0 : token_nll(model, dev_set);
    result.log.push_back(rec);
    if (metric_log.is_open()) metric_log << rec.to_json().dump() << '\n' << std::flush;
    if (hooks.on_epoch) hooks.on_epoch(rec);

    if (!out_dir.empty()) {
      const bool last = stop || epoch + 1 == config.max_epochs;
      if ((config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0) || last) {
        const std::string path = checkpoint_path("epoch-" + std::to_string(epoch) + ".json");
        save_checkpoint(model, step, epoch, path);
        result.last_checkpoint = path;
      }
      // Without a dev set the training loss ranks epochs.
      const double score = dev_set.empty() ? rec.train_loss : rec.dev_nll;
      if (result.best_checkpoint.empty() || score < result.best_dev_nll) {
        result.best_dev_nll = score;
        result.best_checkpoint = checkpoint_path("best.json");
        save_checkpoint(model, step, epoch, result.best_checkpoint);
      }
    }
  }
  result.steps = step;
  return result;
}

}  // namespace mulqg
