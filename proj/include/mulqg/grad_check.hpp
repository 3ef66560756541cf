#pragma once

#include "mulqg/params.hpp"
#include "mulqg/tensor.hpp"

#include <functional>
#include <string>
#include <vector>

namespace mulqg {

struct GradCheckEntry {
  std::string name;
  std::size_t count = 0;
  double max_rel_error = 0.0;
  double analytic = 0.0;  // values at the worst element
  double numeric = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;
  std::vector<GradCheckEntry> entries;
};

// Compares reverse-mode gradients of the scalar `loss_fn()` against central
// differences with step `eps` for every value of every tensor in `params`.
// Relative error per value is |a - n| / max(|a|, |n|, 1e-8). A non-finite
// intermediate raises NonFiniteError naming the producing op.
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, const ParamSet& params,
                           double eps = 1e-4);

}  // namespace mulqg
