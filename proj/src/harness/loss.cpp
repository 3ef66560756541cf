#include "mulqg/loss.hpp"

#include "mulqg/errors.hpp"
#include "mulqg/ops.hpp"

#include <cmath>
#include <numbers>

namespace mulqg {

LossTerms compute_loss(const Tensor& dists, const std::vector<int>& targets,
                       const Tensor& soft_mask, const std::vector<double>& bfs_mask, double lambda,
                       bool bfs_roots_empty, int pad_id) {
  if (targets.empty()) throw ContractError("compute_loss: empty target sequence");
  if (static_cast<Index>(targets.size()) != dists.cols()) {
    throw DimensionError("compute_loss: " + std::to_string(targets.size()) + " targets for " +
                         dists.shape_str() + " distributions");
  }
  LossTerms out;
  std::vector<Index> cols;
  std::vector<Index> rows;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (targets[t] == pad_id) continue;
    cols.push_back(static_cast<Index>(t));
    rows.push_back(targets[t]);
  }
  if (cols.empty()) throw ContractError("compute_loss: every target is padding");
  Tensor kept = gather_cols(dists, cols);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (kept.value()(rows[k], static_cast<Index>(k)) <= kProbFloor) ++out.clamped;
  }
  Tensor logp = log(clamp_min(kept, kProbFloor));
  out.ce = scale(nll_gather(logp, rows), 1.0 / static_cast<double>(rows.size()));

  const Index g = soft_mask.cols();
  if (bfs_roots_empty || bfs_mask.empty() || g == 0) {
    out.bfs_skipped = true;
    out.bfs = Tensor::scalar(0.0);
    out.total = out.ce;
    return out;
  }
  if (static_cast<Index>(bfs_mask.size()) != g) {
    throw DimensionError("compute_loss: bfs mask length " + std::to_string(bfs_mask.size()) +
                         " vs soft mask " + soft_mask.shape_str());
  }
  Matrix target(1, g);
  for (Index i = 0; i < g; ++i) target(0, i) = bfs_mask[static_cast<std::size_t>(i)];
  const Tensor h(target);
  const Tensor not_h(Matrix::Ones(1, g) - target);
  Tensor log_m = log(clamp_min(soft_mask, kProbFloor));
  Tensor log_not_m = log(clamp_min(add_scalar(scale(soft_mask, -1.0), 1.0), kProbFloor));
  Tensor bce = scale(sum(add(mul(h, log_m), mul(not_h, log_not_m))), -1.0 / static_cast<double>(g));
  out.bfs = bce;
  out.total = lambda == 0.0 ? out.ce : add(out.ce, scale(bce, lambda));
  return out;
}

double cosine_lr(long step, long total_steps, double lr0) {
  if (total_steps <= 0) return lr0;
  if (step < 0 || step > total_steps) {
    throw ContractError("cosine_lr: step " + std::to_string(step) + " outside [0, " +
                        std::to_string(total_steps) + "]");
  }
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return std::max(0.0, 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * frac)));
}

}  // namespace mulqg
