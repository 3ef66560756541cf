#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace mulqg {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

// One vertex of the dynamic differentiation graph. A node owns its forward
// value; `grad` is allocated on first accumulation (leaves that require
// gradients allocate it eagerly so untouched parameters read as zero).
struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::string_view op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g);
};

// Handle to a node. Copies share the node; tensors are immutable once built
// except for parameter leaves, which the optimizer updates in place.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor zeros(Index rows, Index cols, bool requires_grad = false);
  static Tensor constant(Index rows, Index cols, double v);
  static Tensor from_rows(const std::vector<std::vector<double>>& rows,
                          bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index size() const { return node_->value.size(); }
  std::string shape_str() const;

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  double operator()(Index r, Index c) const { return node_->value(r, c); }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() == node_->value.size() && node_->value.size() > 0; }
  // Zero matrix of the value's shape when no gradient has been accumulated.
  Matrix grad() const;
  void zero_grad();

  std::string_view op() const { return node_->op; }
  const std::shared_ptr<Node>& node() const { return node_; }
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  friend Tensor make_result(Matrix value, std::string_view op, std::vector<Tensor> inputs,
                            std::function<void(Node&)> backward);
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

// Builds a graph node. When gradient recording is off, or no input needs a
// gradient, the result is a detached constant and `backward` is dropped.
Tensor make_result(Matrix value, std::string_view op, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward);

// Thread-local switches for gradient recording and finite-value checking.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool on);
  static bool check_finite();
  static void set_check_finite(bool on);
};

class NoGradGuard {
 public:
  NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

class FiniteCheckGuard {
 public:
  FiniteCheckGuard() : prev_(GradMode::check_finite()) { GradMode::set_check_finite(true); }
  ~FiniteCheckGuard() { GradMode::set_check_finite(prev_); }
  FiniteCheckGuard(const FiniteCheckGuard&) = delete;
  FiniteCheckGuard& operator=(const FiniteCheckGuard&) = delete;

 private:
  bool prev_;
};

// Reverse topological view of the nodes reachable from a root.
class CompGraph {
 public:
  explicit CompGraph(const Tensor& root);

  // Inputs precede consumers; each reachable node appears exactly once.
  const std::vector<Node*>& order() const { return order_; }
  std::size_t size() const { return order_.size(); }

 private:
  std::vector<Node*> order_;
};

// Reverse-mode sweep from a 1x1 loss. Leaf gradients accumulate (sum) across
// calls; intermediate gradients are released afterwards.
void backward(const Tensor& loss);

}  // namespace mulqg
