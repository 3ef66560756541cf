#include "mulqg/grad_check.hpp"

#include "mulqg/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mulqg {

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, const ParamSet& params,
                           double eps) {
  if (!(eps >= 1e-6 && eps <= 1e-3)) {
    throw ContractError("grad_check: eps must lie in [1e-6, 1e-3]");
  }
  FiniteCheckGuard finite;
  ParamSet work = params;
  work.zero_grad();
  backward(loss_fn());

  GradCheckReport report;
  for (const auto& [name, t] : work.items()) {
    GradCheckEntry entry;
    entry.name = name;
    const Matrix analytic = t.grad();
    Tensor handle = t;
    Matrix& v = handle.mutable_value();
    for (Index i = 0; i < v.size(); ++i) {
      const double orig = v.data()[i];
      double plus = 0.0;
      double minus = 0.0;
      {
        NoGradGuard ng;
        v.data()[i] = orig + eps;
        plus = loss_fn().item();
        v.data()[i] = orig - eps;
        minus = loss_fn().item();
        v.data()[i] = orig;
      }
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic.data()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      if (rel > entry.max_rel_error || entry.count == 0) {
        entry.max_rel_error = std::max(entry.max_rel_error, rel);
        if (rel >= entry.max_rel_error) {
          entry.analytic = a;
          entry.numeric = numeric;
        }
      }
      ++entry.count;
    }
    if (entry.max_rel_error > report.max_rel_error || report.entries.empty()) {
      if (entry.max_rel_error >= report.max_rel_error) {
        report.max_rel_error = entry.max_rel_error;
        report.worst = name;
      }
    }
    report.entries.push_back(entry);
  }
  work.zero_grad();
  return report;
}

}  // namespace mulqg
