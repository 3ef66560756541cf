#include "mulqg/config.hpp"

#include "mulqg/errors.hpp"

#include <fstream>
#include <set>

namespace mulqg {

using nlohmann::json;

void Config::validate() const {
  auto positive = [](const char* name, double v) {
    if (!(v > 0)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive("dims.embed", dims.embed);
  positive("dims.hidden", dims.hidden);
  positive("dims.tag_dim", dims.tag_dim);
  if (dims.hidden % 2 != 0) throw ConfigError("dims.hidden must be even");
  if (vocab_max_size < 5) throw ConfigError("vocab_max_size must be >= 5");
  positive("gcn_layers", gcn_layers);
  positive("max_entities", max_entities);
  positive("max_context_len", max_context_len);
  positive("max_question_len", max_question_len);
  positive("lr0", lr0);
  positive("batch_size", batch_size);
  positive("beam", beam);
  positive("max_epochs", max_epochs);
  positive("grad_clip", grad_clip);
  if (dropout_lstm < 0 || dropout_lstm >= 1) throw ConfigError("dropout_lstm must lie in [0, 1)");
  if (dropout_gcn < 0 || dropout_gcn >= 1) throw ConfigError("dropout_gcn must lie in [0, 1)");
  if (lambda_bfs < 0) throw ConfigError("lambda_bfs must be >= 0");
  if (bfs_start_epoch < 0) throw ConfigError("bfs_start_epoch must be >= 0");
  if (momentum < 0 || momentum >= 1) throw ConfigError("momentum must lie in [0, 1)");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
}

json config_to_json(const Config& c) {
  return json{
      {"dims", {{"embed", c.dims.embed}, {"hidden", c.dims.hidden}, {"tag_dim", c.dims.tag_dim}}},
      {"paths",
       {{"train", c.paths.train},
        {"dev", c.paths.dev},
        {"lexicon", c.paths.lexicon},
        {"embeddings", c.paths.embeddings},
        {"out_dir", c.paths.out_dir}}},
      {"vocab_max_size", c.vocab_max_size},
      {"gcn_layers", c.gcn_layers},
      {"max_entities", c.max_entities},
      {"edges", to_string(c.edges)},
      {"merge_same_surface", c.merge_same_surface},
      {"max_context_len", c.max_context_len},
      {"max_question_len", c.max_question_len},
      {"lr0", c.lr0},
      {"batch_size", c.batch_size},
      {"beam", c.beam},
      {"dropout_lstm", c.dropout_lstm},
      {"dropout_gcn", c.dropout_gcn},
      {"max_epochs", c.max_epochs},
      {"lambda_bfs", c.lambda_bfs},
      {"bfs_start_epoch", c.bfs_start_epoch},
      {"bfs_hops", c.bfs_hops},
      {"seed", c.seed},
      {"momentum", c.momentum},
      {"grad_clip", c.grad_clip},
      {"bypass_graph", c.bypass_graph},
      {"mask_every_layer", c.mask_every_layer},
      {"freeze_embeddings", c.freeze_embeddings},
      {"checkpoint_every", c.checkpoint_every},
  };
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) throw ConfigError("unknown config key '" + where + k + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

Config config_from_json(const json& j) {
  const json defaults = config_to_json(Config{});
  std::set<std::string> top;
  for (const auto& [k, _] : defaults.items()) top.insert(k);
  reject_unknown(j, top, "");
  Config c;
  if (j.contains("dims")) {
    const json& d = j.at("dims");
    reject_unknown(d, {"embed", "hidden", "tag_dim"}, "dims.");
    read(d, "embed", c.dims.embed);
    read(d, "hidden", c.dims.hidden);
    read(d, "tag_dim", c.dims.tag_dim);
  }
  if (j.contains("paths")) {
    const json& p = j.at("paths");
    reject_unknown(p, {"train", "dev", "lexicon", "embeddings", "out_dir"}, "paths.");
    read(p, "train", c.paths.train);
    read(p, "dev", c.paths.dev);
    read(p, "lexicon", c.paths.lexicon);
    read(p, "embeddings", c.paths.embeddings);
    read(p, "out_dir", c.paths.out_dir);
  }
  read(j, "vocab_max_size", c.vocab_max_size);
  read(j, "gcn_layers", c.gcn_layers);
  read(j, "max_entities", c.max_entities);
  if (j.contains("edges")) c.edges = parse_edge_mode(j.at("edges").get<std::string>());
  read(j, "merge_same_surface", c.merge_same_surface);
  read(j, "max_context_len", c.max_context_len);
  read(j, "max_question_len", c.max_question_len);
  read(j, "lr0", c.lr0);
  read(j, "batch_size", c.batch_size);
  read(j, "beam", c.beam);
  read(j, "dropout_lstm", c.dropout_lstm);
  read(j, "dropout_gcn", c.dropout_gcn);
  read(j, "max_epochs", c.max_epochs);
  read(j, "lambda_bfs", c.lambda_bfs);
  read(j, "bfs_start_epoch", c.bfs_start_epoch);
  read(j, "bfs_hops", c.bfs_hops);
  read(j, "seed", c.seed);
  read(j, "momentum", c.momentum);
  read(j, "grad_clip", c.grad_clip);
  read(j, "bypass_graph", c.bypass_graph);
  read(j, "mask_every_layer", c.mask_every_layer);
  read(j, "freeze_embeddings", c.freeze_embeddings);
  read(j, "checkpoint_every", c.checkpoint_every);
  c.validate();
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace mulqg
