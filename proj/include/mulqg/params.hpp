#pragma once

#include "mulqg/tensor.hpp"

#include <nlohmann/json.hpp>

#include <random>
#include <string>
#include <utility>
#include <vector>

namespace mulqg {

// Ordered, named collection of parameter leaves. Order is registration order
// and fixes both initialization draws and serialization layout.
class ParamSet {
 public:
  void add(std::string name, Tensor t);
  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  std::size_t num_values() const;
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  void zero_grad();
  double grad_norm() const;
  // Returns the names that start with `prefix`.
  std::vector<std::string> names_with_prefix(const std::string& prefix) const;

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

// Parameter leaf drawn uniformly from +-1/sqrt(fan_in).
Tensor uniform_param(Index rows, Index cols, Index fan_in, std::mt19937_64& rng);

// {name: {shape: [r, c], values: [...row-major...]}}
nlohmann::json tensors_to_json(const ParamSet& params);
// Copies values into the existing tensors; names and shapes must match exactly.
void tensors_from_json(const nlohmann::json& j, ParamSet& params);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace mulqg
