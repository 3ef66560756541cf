#include "mulqg/tensor.hpp"

#include "mulqg/errors.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace mulqg {

namespace {
thread_local bool g_grad_enabled = true;
thread_local bool g_check_finite = false;
}  // namespace

bool GradMode::enabled() { return g_grad_enabled; }
void GradMode::set_enabled(bool on) { g_grad_enabled = on; }
bool GradMode::check_finite() { return g_check_finite; }
void GradMode::set_check_finite(bool on) { g_check_finite = on; }

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0 && value.size() != 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Tensor::Tensor() : node_(std::make_shared<Node>()) {}

Tensor::Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
  if (requires_grad) node_->grad = Matrix::Zero(node_->value.rows(), node_->value.cols());
}

Tensor Tensor::zeros(Index rows, Index cols, bool requires_grad) {
  return Tensor(Matrix::Zero(rows, cols), requires_grad);
}

Tensor Tensor::constant(Index rows, Index cols, double v) {
  return Tensor(Matrix::Constant(rows, cols, v));
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows, bool requires_grad) {
  const Index r = static_cast<Index>(rows.size());
  const Index c = r == 0 ? 0 : static_cast<Index>(rows.front().size());
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i) {
    if (static_cast<Index>(rows[i].size()) != c) {
      throw DimensionError("from_rows: ragged row " + std::to_string(i));
    }
    for (Index j = 0; j < c; ++j) m(i, j) = rows[i][j];
  }
  return Tensor(std::move(m), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return Tensor(std::move(m), requires_grad);
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << rows() << "x" << cols();
  return os.str();
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw ContractError("item() on non-scalar " + shape_str());
  return node_->value(0, 0);
}

Matrix Tensor::grad() const {
  if (node_->grad.size() == node_->value.size() && node_->grad.rows() == node_->value.rows()) {
    return node_->grad;
  }
  return Matrix::Zero(rows(), cols());
}

void Tensor::zero_grad() {
  node_->grad = Matrix::Zero(rows(), cols());
}

Tensor make_result(Matrix value, std::string_view op, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward) {
  if (GradMode::check_finite() && !value.allFinite()) {
    throw NonFiniteError("non-finite value produced by op '" + std::string(op) + "'");
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  bool needs = false;
  if (GradMode::enabled()) {
    for (const auto& t : inputs) needs = needs || t.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

CompGraph::CompGraph(const Tensor& root) {
  // Iterative post-order DFS; post-order is a valid topological order.
  std::unordered_set<const Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  Node* r = root.node().get();
  if (!r->requires_grad) return;
  stack.emplace_back(r, 0);
  seen.insert(r);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order_.push_back(node);
      stack.pop_back();
    }
  }
}

void backward(const Tensor& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw ContractError("backward: loss must be a 1x1 scalar, got " + loss.shape_str());
  }
  if (!loss.requires_grad()) return;
  CompGraph graph(loss);
  const auto& order = graph.order();
  Node* root = order.back();
  root->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->backward) continue;  // leaf
    if (n->grad.size() != 0) n->backward(*n);
    n->grad.resize(0, 0);
  }
}

}  // namespace mulqg
