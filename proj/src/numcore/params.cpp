#include "mulqg/params.hpp"

#include "mulqg/errors.hpp"

#include <cmath>

namespace mulqg {

void ParamSet::add(std::string name, Tensor t) {
  if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  items_.emplace_back(std::move(name), std::move(t));
}

std::size_t ParamSet::num_values() const {
  std::size_t n = 0;
  for (const auto& [_, t] : items_) n += static_cast<std::size_t>(t.size());
  return n;
}

const Tensor& ParamSet::at(const std::string& name) const {
  for (const auto& [k, t] : items_) {
    if (k == name) return t;
  }
  throw ContractError("unknown parameter '" + name + "'");
}

bool ParamSet::contains(const std::string& name) const {
  for (const auto& [k, _] : items_) {
    if (k == name) return true;
  }
  return false;
}

void ParamSet::zero_grad() {
  for (auto& [_, t] : items_) t.zero_grad();
}

double ParamSet::grad_norm() const {
  double s = 0.0;
  for (const auto& [_, t] : items_) {
    if (t.has_grad()) s += t.node()->grad.squaredNorm();
  }
  return std::sqrt(s);
}

std::vector<std::string> ParamSet::names_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [k, _] : items_) {
    if (k.rfind(prefix, 0) == 0) out.push_back(k);
  }
  return out;
}

Tensor uniform_param(Index rows, Index cols, Index fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Index>(fan_in, 1)));
  std::uniform_real_distribution<double> unif(-bound, bound);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = unif(rng);
  return Tensor(std::move(m), true);
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json j;
  j["shape"] = {m.rows(), m.cols()};
  std::vector<double> vals(m.data(), m.data() + m.size());
  j["values"] = std::move(vals);
  return j;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto shape = j.at("shape").get<std::vector<Index>>();
  if (shape.size() != 2) throw DataError("tensor shape must have two entries");
  const auto vals = j.at("values").get<std::vector<double>>();
  if (static_cast<Index>(vals.size()) != shape[0] * shape[1]) {
    throw DataError("tensor values length " + std::to_string(vals.size()) +
                    " does not match shape");
  }
  Matrix m(shape[0], shape[1]);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = vals[static_cast<std::size_t>(i)];
  return m;
}

nlohmann::json tensors_to_json(const ParamSet& params) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, t] : params.items()) j[name] = matrix_to_json(t.value());
  return j;
}

void tensors_from_json(const nlohmann::json& j, ParamSet& params) {
  if (j.size() != params.size()) {
    throw DataError("checkpoint has " + std::to_string(j.size()) + " tensors, model expects " +
                    std::to_string(params.size()));
  }
  for (const auto& [name, t] : params.items()) {
    if (!j.contains(name)) throw DataError("checkpoint is missing tensor '" + name + "'");
    Matrix m = matrix_from_json(j.at(name));
    if (m.rows() != t.rows() || m.cols() != t.cols()) {
      throw DataError("tensor '" + name + "' has shape " + std::to_string(m.rows()) + "x" +
                      std::to_string(m.cols()) + ", expected " + t.shape_str());
    }
    Tensor handle = t;
    handle.mutable_value() = std::move(m);
  }
}

}  // namespace mulqg
