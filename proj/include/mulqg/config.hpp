#pragma once

#include "mulqg/entgraph.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>

namespace mulqg {

struct Config {
  struct Dims {
    int embed = 32;
    int hidden = 64;
    int tag_dim = 16;
  } dims;
  struct Paths {
    std::string train;
    std::string dev;
    std::string lexicon;
    std::string embeddings;  // optional word2vec text file
    std::string out_dir;     // empty: no checkpoints or log files
  } paths;

  int vocab_max_size = 45000;
  int gcn_layers = 2;
  int max_entities = 80;
  EdgeMode edges = EdgeMode::kBoth;
  bool merge_same_surface = false;
  int max_context_len = 400;
  int max_question_len = 30;
  double lr0 = 0.1;
  int batch_size = 12;
  int beam = 10;
  double dropout_lstm = 0.2;
  double dropout_gcn = 0.3;
  int max_epochs = 20;
  double lambda_bfs = 0.5;
  int bfs_start_epoch = 10;
  int bfs_hops = -1;  // -1: same as gcn_layers
  std::uint64_t seed = 1;
  double momentum = 0.0;
  double grad_clip = 5.0;
  bool bypass_graph = false;
  bool mask_every_layer = false;
  bool freeze_embeddings = false;
  int checkpoint_every = 1;  // epochs; 0 keeps only best and final

  int effective_bfs_hops() const { return bfs_hops < 0 ? gcn_layers : bfs_hops; }
  GraphOptions graph_options() const { return {max_entities, edges, merge_same_surface}; }
  // Throws ConfigError on a violated numeric constraint.
  void validate() const;
};

nlohmann::json config_to_json(const Config& c);
// Unknown keys at any level are rejected.
Config config_from_json(const nlohmann::json& j);
Config load_config(const std::string& path);

}  // namespace mulqg
