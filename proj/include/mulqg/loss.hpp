#pragma once

#include "mulqg/tensor.hpp"

#include <vector>

namespace mulqg {

struct LossTerms {
  Tensor total;
  Tensor ce;   // mean -log p(target) over non-pad targets
  Tensor bfs;  // mean binary cross-entropy of the soft mask; 0 when skipped
  bool bfs_skipped = false;
  std::size_t clamped = 0;  // probabilities raised to the 1e-12 floor
};

inline constexpr double kProbFloor = 1e-12;

// `dists` holds one distribution per column (ext_size x T). Targets equal to
// `pad_id` are masked out. An empty `bfs_mask` or `bfs_roots_empty` skips the
// BFS term.
LossTerms compute_loss(const Tensor& dists, const std::vector<int>& targets,
                       const Tensor& soft_mask, const std::vector<double>& bfs_mask, double lambda,
                       bool bfs_roots_empty = false, int pad_id = 0);

// 0.5 * lr0 * (1 + cos(pi * step / total_steps)), floored at 0.
double cosine_lr(long step, long total_steps, double lr0);

}  // namespace mulqg
