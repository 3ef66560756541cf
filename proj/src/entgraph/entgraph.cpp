#include "mulqg/entgraph.hpp"

#include "mulqg/errors.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <sstream>

namespace mulqg {

EdgeMode parse_edge_mode(const std::string& s) {
  if (s == "sentence") return EdgeMode::kSentence;
  if (s == "paragraph") return EdgeMode::kParagraph;
  if (s == "both") return EdgeMode::kBoth;
  throw ConfigError("edges must be sentence|paragraph|both, got '" + s + "'");
}

std::string to_string(EdgeMode m) {
  switch (m) {
    case EdgeMode::kSentence: return "sentence";
    case EdgeMode::kParagraph: return "paragraph";
    case EdgeMode::kBoth: return "both";
  }
  return "both";
}

std::vector<std::pair<int, int>> EntityGraph::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < g; ++i) {
    for (int j = i + 1; j < g; ++j) {
      if (adj[i][j]) out.emplace_back(i, j);
    }
  }
  return out;
}

Matrix EntityGraph::adjacency() const {
  Matrix m = Matrix::Zero(g, g);
  for (int i = 0; i < g; ++i) {
    for (int j = 0; j < g; ++j) m(i, j) = adj[i][j] ? 1.0 : 0.0;
  }
  return m;
}

namespace {

// Segments of the flat context that belong to one title or one sentence.
struct Segment {
  int paragraph;
  int sentence;
  int start;
  int end;
};

std::vector<Segment> segments(const FlatContext& flat) {
  std::vector<Segment> out;
  for (int i = 0; i < static_cast<int>(flat.origin.size()); ++i) {
    const auto& o = flat.origin[i];
    // A new segment starts when the unit changes or its token index is not
    // contiguous with the previous position (truncation never splits units
    // from the middle except at a paragraph boundary).
    if (out.empty() || out.back().paragraph != o.paragraph || out.back().sentence != o.sentence ||
        flat.origin[i - 1].token + 1 != o.token) {
      out.push_back({o.paragraph, o.sentence, i, i + 1});
    } else {
      out.back().end = i + 1;
    }
  }
  return out;
}

}  // namespace

Annotation annotate(const Example& ex, const FlatContext& flat,
                    const std::vector<Tokens>& lexicon, const GraphOptions& opts) {
  Annotation ann;
  if (lexicon.empty()) return ann;
  std::size_t longest = 0;
  std::set<Tokens> entries;
  for (const auto& e : lexicon) {
    if (e.empty()) continue;
    entries.insert(e);
    longest = std::max(longest, e.size());
  }
  // Work on the untruncated unit so mentions cut by truncation can be detected.
  std::map<Tokens, int> merged;
  for (const auto& seg : segments(flat)) {
    const Paragraph& para = ex.paragraphs[seg.paragraph];
    const Tokens& unit = seg.sentence < 0 ? para.title : para.sentences[seg.sentence];
    const int first_tok = flat.origin[seg.start].token;
    const int last_tok = flat.origin[seg.end - 1].token + 1;
    int i = 0;
    while (i < static_cast<int>(unit.size())) {
      int match = 0;
      const int max_len = static_cast<int>(std::min(longest, unit.size() - i));
      for (int len = max_len; len >= 1; --len) {
        Tokens cand(unit.begin() + i, unit.begin() + i + len);
        if (entries.count(cand)) {
          match = len;
          break;
        }
      }
      if (match == 0) {
        ++i;
        continue;
      }
      if (i >= first_tok && i + match <= last_tok) {
        Mention m;
        m.surface.assign(unit.begin() + i, unit.begin() + i + match);
        m.paragraph_idx = seg.paragraph;
        m.sentence_idx = seg.sentence;
        m.start = seg.start + (i - first_tok);
        m.end = m.start + match;
        int entity = 0;
        if (opts.merge_same_surface) {
          auto it = merged.find(m.surface);
          if (it == merged.end()) {
            if (ann.num_entities >= opts.max_entities) {
              ++ann.dropped;
              i += match;
              continue;
            }
            it = merged.emplace(m.surface, ann.num_entities++).first;
          }
          entity = it->second;
        } else {
          if (ann.num_entities >= opts.max_entities) {
            ++ann.dropped;
            i += match;
            continue;
          }
          entity = ann.num_entities++;
        }
        m.entity_idx = entity;
        ann.mentions.push_back(std::move(m));
      }
      i += match;
    }
  }
  return ann;
}

Annotation annotate(const Example& ex, const std::vector<Tokens>& lexicon,
                    const GraphOptions& opts) {
  return annotate(ex, flatten_context(ex, static_cast<std::size_t>(-1)), lexicon, opts);
}

EntityGraph build_graph(const Annotation& ann, EdgeMode mode) {
  EntityGraph graph;
  graph.g = ann.num_entities;
  graph.mentions = ann.mentions;
  graph.adj.assign(graph.g, std::vector<bool>(graph.g, false));
  const bool paragraph_edges = mode != EdgeMode::kSentence;
  const auto& ms = ann.mentions;
  for (std::size_t a = 0; a < ms.size(); ++a) {
    for (std::size_t b = a + 1; b < ms.size(); ++b) {
      const Mention& x = ms[a];
      const Mention& y = ms[b];
      if (x.entity_idx == y.entity_idx) continue;
      if (x.paragraph_idx != y.paragraph_idx) continue;
      const bool same_sentence = x.sentence_idx == y.sentence_idx;
      const bool title_link = x.sentence_idx < 0 || y.sentence_idx < 0;
      if (same_sentence || paragraph_edges || title_link) {
        graph.adj[x.entity_idx][y.entity_idx] = true;
        graph.adj[y.entity_idx][x.entity_idx] = true;
      }
    }
  }
  return graph;
}

std::set<int> find_answer_entities(const EntityGraph& graph, const Tokens& answer, int answer_start,
                                   int answer_end) {
  std::set<int> roots;
  for (const auto& m : graph.mentions) {
    if (!m.surface.empty() &&
        std::search(answer.begin(), answer.end(), m.surface.begin(), m.surface.end()) !=
            answer.end()) {
      roots.insert(m.entity_idx);
    }
  }
  if (!roots.empty()) return roots;
  for (const auto& m : graph.mentions) {
    if (m.start < answer_end && answer_start < m.end) roots.insert(m.entity_idx);
  }
  return roots;
}

Matrix span_map(const std::vector<Mention>& mentions, int n, int g) {
  Matrix m = Matrix::Zero(n, g);
  for (const auto& mention : mentions) {
    if (mention.start < 0 || mention.end > n || mention.start >= mention.end) {
      throw DimensionError("span_map: mention span [" + std::to_string(mention.start) + "," +
                           std::to_string(mention.end) + ") exceeds context length " +
                           std::to_string(n));
    }
    if (mention.entity_idx < 0 || mention.entity_idx >= g) {
      throw DimensionError("span_map: entity index out of range");
    }
    for (int i = mention.start; i < mention.end; ++i) m(i, mention.entity_idx) = 1.0;
  }
  return m;
}

BfsMask bfs_mask(const EntityGraph& graph, int hops) {
  BfsMask out;
  out.mask.assign(static_cast<std::size_t>(graph.g), 0.0);
  if (graph.answer_entities.empty()) {
    out.empty_roots = true;
    return out;
  }
  std::vector<int> dist(static_cast<std::size_t>(graph.g), -1);
  std::deque<int> queue;
  for (int r : graph.answer_entities) {
    dist[r] = 0;
    queue.push_back(r);
  }
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    if (dist[u] >= hops) continue;
    for (int v = 0; v < graph.g; ++v) {
      if (graph.adj[u][v] && dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  for (int i = 0; i < graph.g; ++i) out.mask[i] = dist[i] >= 0 ? 1.0 : 0.0;
  return out;
}

EntityGraph build_example_graph(const Example& ex, const FlatContext& flat,
                                const std::vector<Tokens>& lexicon, const GraphOptions& opts,
                                std::size_t* dropped) {
  Annotation ann = annotate(ex, flat, lexicon, opts);
  if (dropped) *dropped = ann.dropped;
  EntityGraph graph = build_graph(ann, opts.edges);
  graph.answer_entities =
      find_answer_entities(graph, ex.answer.text, flat.answer_start, flat.answer_end);
  return graph;
}

std::string graph_to_dot(const EntityGraph& graph, const std::string& name) {
  std::ostringstream os;
  os << "graph \"" << name << "\" {\n";
  std::vector<std::string> labels(static_cast<std::size_t>(graph.g));
  for (const auto& m : graph.mentions) {
    if (labels[m.entity_idx].empty()) labels[m.entity_idx] = join(m.surface);
  }
  for (int i = 0; i < graph.g; ++i) {
    os << "  e" << i << " [label=\"" << labels[i] << "\"";
    if (graph.answer_entities.count(i)) os << ", shape=box";
    os << "];\n";
  }
  for (const auto& [i, j] : graph.edges()) os << "  e" << i << " -- e" << j << ";\n";
  os << "}\n";
  return os.str();
}

nlohmann::json graph_to_json(const EntityGraph& graph) {
  nlohmann::json j;
  j["g"] = graph.g;
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [a, b] : graph.edges()) edges.push_back({a, b});
  j["edges"] = std::move(edges);
  nlohmann::json ms = nlohmann::json::array();
  for (const auto& m : graph.mentions) {
    ms.push_back({{"entity", m.entity_idx},
                  {"surface", join(m.surface)},
                  {"paragraph", m.paragraph_idx},
                  {"sentence", m.sentence_idx},
                  {"span", {m.start, m.end}}});
  }
  j["mentions"] = std::move(ms);
  j["answer_entities"] = graph.answer_entities;
  return j;
}

}  // namespace mulqg
