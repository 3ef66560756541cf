#include "mulqg/config.hpp"
#include "mulqg/errors.hpp"
#include "mulqg/loss.hpp"
#include "mulqg/metrics.hpp"
#include "mulqg/model.hpp"
#include "mulqg/ops.hpp"
#include "mulqg/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

using namespace mulqg;
namespace fs = std::filesystem;

namespace {

Tensor column_dists(const std::vector<std::vector<double>>& cols) {
  Matrix m(static_cast<Index>(cols[0].size()), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (std::size_t i = 0; i < cols[j].size(); ++i) m(static_cast<Index>(i), static_cast<Index>(j)) = cols[j][i];
  }
  return Tensor(m);
}

Config tiny_config() {
  Config c;
  c.dims.embed = 8;
  c.dims.hidden = 8;
  c.dims.tag_dim = 4;
  c.batch_size = 2;
  c.max_epochs = 2;
  c.bfs_start_epoch = 1;
  c.seed = 5;
  c.checkpoint_every = 1;
  return c;
}

TrainData tiny_data(std::size_t n = 6) {
  const Dataset d = generate_synthetic(17, n + 2, 20);
  TrainData data;
  data.train.assign(d.examples.begin(), d.examples.begin() + static_cast<long>(n));
  data.dev.assign(d.examples.begin() + static_cast<long>(n), d.examples.end());
  data.lexicon = d.lexicon;
  return data;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mulqg_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string dump_log(const std::vector<EpochRecord>& log) {
  std::string s;
  for (const auto& r : log) s += r.to_json().dump() + "\n";
  return s;
}

// Straightforward corpus BLEU used as an independent oracle.
double oracle_bleu(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs, int order) {
  double log_sum = 0.0;
  long c = 0, r = 0;
  for (std::size_t k = 0; k < hyps.size(); ++k) {
    c += static_cast<long>(hyps[k].size());
    r += static_cast<long>(refs[k].size());
  }
  for (int n = 1; n <= order; ++n) {
    double match = 0, total = 0;
    for (std::size_t k = 0; k < hyps.size(); ++k) {
      std::map<Tokens, int> hc, rc;
      for (std::size_t i = 0; i + n <= hyps[k].size(); ++i) ++hc[Tokens(hyps[k].begin() + i, hyps[k].begin() + i + n)];
      for (std::size_t i = 0; i + n <= refs[k].size(); ++i) ++rc[Tokens(refs[k].begin() + i, refs[k].begin() + i + n)];
      for (const auto& [g, cnt] : hc) {
        total += cnt;
        match += std::min(cnt, rc.count(g) ? rc[g] : 0);
      }
    }
    const double p = total > 0 && match > 0 ? match / total : kBleuEpsilon;
    log_sum += std::log(p);
  }
  const double bp = c == 0 ? 0.0 : (c > r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / c));
  return bp * std::exp(log_sum / order);
}

}  // namespace

TEST(Loss, HalfMaskGivesLnTwo) {
  const Tensor dists = column_dists({{0.1, 0.2, 0.3, 0.4}});
  const Tensor mask(Matrix::Constant(1, 3, 0.5));
  const LossTerms l = compute_loss(dists, {2}, mask, {1, 0, 1}, 0.5);
  EXPECT_NEAR(l.bfs.item(), std::log(2.0), 1e-15);
  EXPECT_NEAR(l.ce.item(), -std::log(0.3), 1e-15);
  EXPECT_NEAR(l.total.item(), -std::log(0.3) + 0.5 * std::log(2.0), 1e-15);
}

TEST(Loss, ZeroLambdaIsExactlyCrossEntropy) {
  const Tensor dists = column_dists({{0.1, 0.2, 0.3, 0.4}, {0.25, 0.25, 0.25, 0.25}});
  const LossTerms l = compute_loss(dists, {1, 3}, Tensor(Matrix::Constant(1, 2, 0.3)), {1, 1}, 0.0);
  EXPECT_EQ(l.total.item(), l.ce.item());
  EXPECT_NEAR(l.ce.item(), -(std::log(0.2) + std::log(0.25)) / 2, 1e-15);
}

TEST(Loss, OneHotPredictionsHaveZeroCrossEntropy) {
  const Tensor dists = column_dists({{0, 0, 1, 0}, {0, 0, 0, 1}});
  EXPECT_EQ(compute_loss(dists, {2, 3}, Tensor::zeros(1, 0), {}, 0.5).ce.item(), 0.0);
}

TEST(Loss, PaddingIsMaskedAndZeroProbabilityIsClamped) {
  const Tensor dists = column_dists({{0.5, 0.0, 0.5}, {0.9, 0.05, 0.05}});
  const LossTerms padded = compute_loss(dists, {2, 0}, Tensor::zeros(1, 0), {}, 0.0);
  EXPECT_NEAR(padded.ce.item(), std::log(2.0), 1e-15);
  const LossTerms clamped = compute_loss(dists, {1, 1}, Tensor::zeros(1, 0), {}, 0.0);
  EXPECT_EQ(clamped.clamped, 1u);
  EXPECT_TRUE(std::isfinite(clamped.ce.item()));
  EXPECT_NEAR(clamped.ce.item(), (-std::log(kProbFloor) - std::log(0.05)) / 2, 1e-12);
}

TEST(Loss, EmptyRootsSkipBfsTerm) {
  const Tensor dists = column_dists({{0.5, 0.5}});
  const LossTerms l = compute_loss(dists, {1}, Tensor(Matrix::Constant(1, 2, 0.9)), {0, 0}, 0.5, true);
  EXPECT_TRUE(l.bfs_skipped);
  EXPECT_EQ(l.bfs.item(), 0.0);
  EXPECT_EQ(l.total.item(), l.ce.item());
}

TEST(Loss, BfsGradientFlowsToSoftMask) {
  Tensor mask(Matrix::Constant(1, 2, 0.25), true);
  const LossTerms l = compute_loss(column_dists({{0.5, 0.5}}), {1}, mask, {1, 0}, 1.0);
  backward(l.total);
  // d/dm of mean BCE: (m - y) / (m (1 - m)) / g.
  EXPECT_NEAR(mask.grad()(0, 0), (0.25 - 1.0) / (0.25 * 0.75) / 2, 1e-12);
  EXPECT_NEAR(mask.grad()(0, 1), 0.25 / (0.25 * 0.75) / 2, 1e-12);
}

TEST(CosineLr, EndpointsAndMidpoint) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 100, 0.1), 0.1);
  EXPECT_DOUBLE_EQ(cosine_lr(100, 100, 0.1), 0.0);
  EXPECT_NEAR(cosine_lr(50, 100, 0.1), 0.05, 1e-17);
  double prev = cosine_lr(0, 997, 0.3);
  for (long s = 1; s <= 997; ++s) {
    const double lr = cosine_lr(s, 997, 0.3);
    EXPECT_LE(lr, prev);
    EXPECT_GE(lr, 0.0);
    prev = lr;
  }
}

TEST(Metrics, IdenticalCorpusScoresOne) {
  const std::vector<Tokens> refs = {tokenize("where is the city located ?"), tokenize("who founded the band ?")};
  const Metrics m = corpus_metrics(refs, refs);
  for (double b : m.bleu) EXPECT_DOUBLE_EQ(b, 1.0);
  EXPECT_DOUBLE_EQ(m.rouge_l, 1.0);
  EXPECT_DOUBLE_EQ(m.brevity_penalty, 1.0);
}

TEST(Metrics, ClippedUnigramPrecision) {
  const Metrics m = corpus_metrics({tokenize("the the the the")}, {tokenize("the cat sat")});
  EXPECT_DOUBLE_EQ(m.precision[0], 0.25);
  EXPECT_DOUBLE_EQ(m.bleu[0], 0.25);  // c > r, no brevity penalty
}

TEST(Metrics, BrevityPenalty) {
  const Metrics m = corpus_metrics({tokenize("the cat")}, {tokenize("the cat sat down")});
  EXPECT_DOUBLE_EQ(m.brevity_penalty, std::exp(-1.0));
  EXPECT_DOUBLE_EQ(m.bleu[0], std::exp(-1.0));
  EXPECT_DOUBLE_EQ(m.bleu[1], std::exp(-1.0));
}

TEST(Metrics, RougeLHandValue) {
  // LCS("a b c d", "a c e") = 2: P = 1/2, R = 2/3.
  const double p = 0.5, r = 2.0 / 3.0, b2 = 1.44;
  EXPECT_NEAR(rouge_l(tokenize("a b c d"), tokenize("a c e")), (1 + b2) * p * r / (r + b2 * p), 1e-15);
  EXPECT_EQ(rouge_l({}, tokenize("a")), 0.0);
}

TEST(Metrics, MatchesOracleOnRandomCorpora) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> len(1, 9), word(0, 5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Tokens> hyps, refs;
    for (int k = 0; k < 4; ++k) {
      Tokens h, r;
      for (int i = len(rng); i > 0; --i) h.push_back("w" + std::to_string(word(rng)));
      for (int i = len(rng); i > 0; --i) r.push_back("w" + std::to_string(word(rng)));
      hyps.push_back(h);
      refs.push_back(r);
    }
    const Metrics m = corpus_metrics(hyps, refs);
    for (int n = 1; n <= 4; ++n) EXPECT_NEAR(m.bleu[n - 1], oracle_bleu(hyps, refs, n), 1e-12);
    for (double b : m.bleu) {
      EXPECT_GE(b, 0.0);
      EXPECT_LE(b, 1.0);
    }
  }
}

TEST(Metrics, EvaluateAlignsByIdAndIgnoresOrder) {
  std::map<std::string, Tokens> preds = {{"a", tokenize("x y z")}, {"b", tokenize("p q")}};
  std::map<std::string, Tokens> refs = {{"a", tokenize("x y w")}, {"b", tokenize("p q r")}};
  const Metrics m = evaluate(preds, refs);
  const Metrics swapped = corpus_metrics({tokenize("p q"), tokenize("x y z")}, {tokenize("p q r"), tokenize("x y w")});
  EXPECT_EQ(m.bleu, swapped.bleu);
  EXPECT_DOUBLE_EQ(m.rouge_l, swapped.rouge_l);
  EXPECT_EQ(m.count, 2u);

  refs.erase("b");
  EXPECT_THROW(evaluate(preds, refs), DataError);
  const auto j = m.to_json();
  EXPECT_TRUE(j.contains("bleu4"));
  EXPECT_TRUE(j.contains("smoothing"));
}

TEST(Config, DefaultsRoundTripAndRejectUnknownKeys) {
  const Config c;
  EXPECT_EQ(c.lr0, 0.1);
  EXPECT_EQ(c.batch_size, 12);
  EXPECT_EQ(c.beam, 10);
  EXPECT_EQ(c.max_entities, 80);
  EXPECT_EQ(c.bfs_start_epoch, 10);
  EXPECT_EQ(c.lambda_bfs, 0.5);
  EXPECT_EQ(c.max_epochs, 20);
  EXPECT_EQ(c.dropout_lstm, 0.2);
  EXPECT_EQ(c.dropout_gcn, 0.3);

  Config t = tiny_config();
  t.edges = EdgeMode::kSentence;
  t.paths.train = "x.jsonl";
  const auto j = config_to_json(t);
  EXPECT_EQ(config_to_json(config_from_json(j)), j);

  auto bad = j;
  bad["learning_rate"] = 0.2;
  EXPECT_THROW(config_from_json(bad), ConfigError);
  bad = j;
  bad["dims"]["depth"] = 3;
  EXPECT_THROW(config_from_json(bad), ConfigError);
  EXPECT_EQ(config_from_json(nlohmann::json::object()).lr0, 0.1);
}

TEST(Config, RejectsInvalidValues) {
  for (const char* patch : {R"({"lr0": -1})", R"({"lambda_bfs": -0.5})", R"({"batch_size": 0})",
                            R"({"dims": {"hidden": 7}})", R"({"edges": "document"})", R"({"beam": "ten"})"}) {
    EXPECT_THROW(config_from_json(nlohmann::json::parse(patch)), ConfigError) << patch;
  }
}

TEST(Config, LoadReportsMalformedFile) {
  const fs::path dir = scratch_dir("config");
  std::ofstream(dir / "c.json") << "{ not json";
  EXPECT_THROW(load_config((dir / "c.json").string()), ConfigError);
  EXPECT_THROW(load_config((dir / "missing.json").string()), Error);
}

TEST(Checkpoint, RoundTripReproducesForwardBitwise) {
  const TrainData data = tiny_data();
  const Config cfg = tiny_config();
  Dataset ds;
  ds.examples = data.train;
  const Model model(cfg, build_vocab(ds, cfg.vocab_max_size), data.lexicon);
  const fs::path dir = scratch_dir("ckpt");
  const std::string path = (dir / "model.json").string();
  save_checkpoint(model, 7, 3, path);
  EXPECT_FALSE(fs::exists(path + ".tmp"));

  const Checkpoint ckpt = read_checkpoint(path);
  EXPECT_EQ(ckpt.step, 7);
  EXPECT_EQ(ckpt.epoch, 3);
  const Model back = load_model(ckpt);
  for (const auto& ex : data.dev) {
    const PreparedExample a = model.prepare(ex);
    const PreparedExample b = back.prepare(ex);
    EXPECT_EQ(model.forward(a).dists.value(), back.forward(b).dists.value());
  }

  std::ifstream in(path);
  nlohmann::json j = nlohmann::json::parse(in);
  for (const char* key : {"version", "config", "params", "step", "epoch"}) EXPECT_TRUE(j.contains(key)) << key;
  j["version"] = kCheckpointVersion + 1;
  std::ofstream(path) << j.dump();
  EXPECT_THROW(read_checkpoint(path), Error);
}

TEST(Trainer, IdenticalSeedsGiveIdenticalLogs) {
  const TrainData data = tiny_data();
  const Config cfg = tiny_config();
  const TrainResult a = train(cfg, data);
  const TrainResult b = train(cfg, data);
  ASSERT_EQ(a.log.size(), 2u);
  EXPECT_EQ(dump_log(a.log), dump_log(b.log));
  EXPECT_EQ(a.steps, 6);
  EXPECT_TRUE(a.log[1].bfs_active);
  EXPECT_FALSE(a.log[0].bfs_active);
}

TEST(Trainer, LambdaMattersOnlyFromBfsStartEpoch) {
  const TrainData data = tiny_data();
  Config with = tiny_config();
  Config without = with;
  without.lambda_bfs = 0.0;
  const TrainResult a = train(with, data);
  const TrainResult b = train(without, data);
  EXPECT_EQ(a.log[0].to_json().dump(), b.log[0].to_json().dump());
  EXPECT_NE(a.log[1].train_ce, b.log[1].train_ce);
  EXPECT_GT(a.log[1].train_bfs, 0.0);
  EXPECT_EQ(b.log[1].train_bfs, 0.0);
}

TEST(Trainer, WritesLogAndCheckpoints) {
  const TrainData data = tiny_data();
  Config cfg = tiny_config();
  const fs::path dir = scratch_dir("train");
  cfg.paths.out_dir = dir.string();
  std::vector<long> steps;
  TrainHooks hooks;
  hooks.on_step = [&](const StepRecord& r) { steps.push_back(r.step); };
  const TrainResult r = train(cfg, data, hooks);
  EXPECT_EQ(steps, (std::vector<long>{1, 2, 3, 4, 5, 6}));
  std::ifstream log(dir / "metrics.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("epoch"), lines);
    ++lines;
  }
  EXPECT_EQ(lines, 2);
  EXPECT_TRUE(fs::exists(dir / "epoch-0.json"));
  EXPECT_TRUE(fs::exists(dir / "epoch-1.json"));
  EXPECT_TRUE(fs::exists(r.best_checkpoint));
  EXPECT_EQ(read_checkpoint(r.last_checkpoint).step, 6);
}

TEST(Trainer, StopHookEndsEarly) {
  TrainHooks hooks;
  hooks.should_stop = [](const StepRecord& r) { return r.step >= 2; };
  const TrainResult r = train(tiny_config(), tiny_data(), hooks);
  EXPECT_EQ(r.steps, 2);
}

TEST(Trainer, LossFallsOverFirstFiftySteps) {
  Config cfg = tiny_config();
  cfg.dims = {16, 16, 4};
  cfg.batch_size = 1;
  cfg.max_epochs = 50;
  cfg.dropout_lstm = 0.0;
  cfg.dropout_gcn = 0.0;
  cfg.bfs_start_epoch = 0;
  std::vector<double> ce;
  TrainHooks hooks;
  hooks.on_step = [&](const StepRecord& r) { ce.push_back(r.ce); };
  hooks.should_stop = [](const StepRecord& r) { return r.step >= 50; };
  TrainData data = tiny_data(8);
  data.dev.clear();
  train(cfg, data, hooks);
  ASSERT_EQ(ce.size(), 50u);
  double prev = std::numeric_limits<double>::infinity();
  for (int w = 0; w < 5; ++w) {
    const double mean = std::accumulate(ce.begin() + w * 10, ce.begin() + (w + 1) * 10, 0.0) / 10.0;
    EXPECT_LT(mean, prev) << "window " << w;
    prev = mean;
  }
}

TEST(Trainer, ModelPrepareTargetsEndWithEos) {
  const TrainData data = tiny_data();
  const Config cfg = tiny_config();
  Dataset ds;
  ds.examples = data.train;
  const Model model(cfg, build_vocab(ds, cfg.vocab_max_size), data.lexicon);
  const PreparedExample p = model.prepare(data.train[0]);
  EXPECT_EQ(p.targets.back(), Vocab::kEos);
  EXPECT_EQ(p.targets.size(), data.train[0].question.size() + 1);
  EXPECT_FALSE(p.bfs.empty_roots);
  const Generation g = model.generate(p, 3, 5);
  EXPECT_LE(g.tokens.size(), 5u);
  EXPECT_LE(g.logprob, 0.0);
}
