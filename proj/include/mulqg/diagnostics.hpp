#pragma once

#include "mulqg/grad_check.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace mulqg {

struct GroupCheck {
  std::string group;
  std::vector<std::string> tensors;
  double max_rel_error = 0.0;
  std::string worst;
};

struct ModelGradCheck {
  std::string module;
  double eps = 1e-4;
  double max_rel_error = 0.0;
  std::size_t values = 0;
  std::vector<GroupCheck> groups;
  GradCheckReport report;

  nlohmann::json to_json() const;
};

struct GradCheckSetup {
  int hidden = 8;
  int embed = 8;
  int tag_dim = 4;
  int context_len = 12;
  int answer_len = 3;
  int entities = 4;
  int question_len = 4;
  double lambda = 0.5;
  std::uint64_t seed = 7;
  double eps = 1e-4;
};

// Finite-difference check of the full network loss (CE + lambda * BFS) on a
// random tiny instance. `module` is "all", "encoder", or "decoder" and picks
// which parameter groups are perturbed.
ModelGradCheck grad_check_model(const std::string& module, const GradCheckSetup& setup = {});

}  // namespace mulqg
