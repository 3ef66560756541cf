#pragma once

#include "mulqg/corpus.hpp"
#include "mulqg/tensor.hpp"

#include <nlohmann/json.hpp>

#include <set>
#include <string>
#include <vector>

namespace mulqg {

struct Mention {
  int entity_idx = 0;
  Tokens surface;
  int paragraph_idx = 0;
  int sentence_idx = -1;  // -1: title
  int start = 0;          // flat span [start, end)
  int end = 0;
};

enum class EdgeMode { kSentence, kParagraph, kBoth };
EdgeMode parse_edge_mode(const std::string& s);
std::string to_string(EdgeMode m);

struct GraphOptions {
  int max_entities = 80;
  EdgeMode edges = EdgeMode::kBoth;
  bool merge_same_surface = false;
};

struct Annotation {
  std::vector<Mention> mentions;
  int num_entities = 0;
  std::size_t dropped = 0;  // mentions beyond max_entities
};

struct EntityGraph {
  int g = 0;
  std::vector<std::vector<bool>> adj;  // symmetric, zero diagonal
  std::vector<Mention> mentions;
  std::set<int> answer_entities;

  bool empty() const { return g == 0; }
  std::vector<std::pair<int, int>> edges() const;  // i < j
  Matrix adjacency() const;
};

// Longest-match, left-to-right, non-overlapping lexicon matching over every
// title and sentence of the flattened (possibly truncated) context. Mentions
// cut by truncation are skipped.
Annotation annotate(const Example& ex, const FlatContext& flat,
                    const std::vector<Tokens>& lexicon, const GraphOptions& opts = {});
Annotation annotate(const Example& ex, const std::vector<Tokens>& lexicon,
                    const GraphOptions& opts = {});

EntityGraph build_graph(const Annotation& ann, EdgeMode mode = EdgeMode::kBoth);

// Entities whose surface equals or is contained in the answer tokens; when
// none qualify, entities with a mention overlapping the flat answer span.
std::set<int> find_answer_entities(const EntityGraph& graph, const Tokens& answer, int answer_start,
                                   int answer_end);

// n x g binary token-to-entity matrix.
Matrix span_map(const std::vector<Mention>& mentions, int n, int g);

struct BfsMask {
  std::vector<double> mask;
  bool empty_roots = false;
};

// mask[i] = 1 iff entity i lies within `hops` edges of an answer entity.
BfsMask bfs_mask(const EntityGraph& graph, int hops);

// Annotate, build, and root the graph for one example.
EntityGraph build_example_graph(const Example& ex, const FlatContext& flat,
                                const std::vector<Tokens>& lexicon, const GraphOptions& opts,
                                std::size_t* dropped = nullptr);

std::string graph_to_dot(const EntityGraph& graph, const std::string& name);
nlohmann::json graph_to_json(const EntityGraph& graph);

}  // namespace mulqg
