#include "mulqg/ops.hpp"

#include "mulqg/errors.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace mulqg {

namespace {

Node* needs(Node& self, std::size_t i) {
  Node* n = self.inputs[i].get();
  return n->requires_grad ? n : nullptr;
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                       b.shape_str());
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error(op, a, b);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  Matrix out = a.value() * b.value();
  return make_result(std::move(out), "matmul", {a, b}, [](Node& self) {
    const Matrix& av = self.inputs[0]->value;
    const Matrix& bv = self.inputs[1]->value;
    if (Node* na = needs(self, 0)) na->accumulate(self.grad * bv.transpose());
    if (Node* nb = needs(self, 1)) nb->accumulate(av.transpose() * self.grad);
  });
}

Tensor transpose(const Tensor& x) {
  return make_result(x.value().transpose(), "transpose", {x}, [](Node& self) {
    if (Node* n = needs(self, 0)) n->accumulate(self.grad.transpose());
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  return make_result(a.value() + b.value(), "add", {a, b}, [](Node& self) {
    if (Node* n = needs(self, 0)) n->accumulate(self.grad);
    if (Node* n = needs(self, 1)) n->accumulate(self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  return make_result(a.value() - b.value(), "sub", {a, b}, [](Node& self) {
    if (Node* n = needs(self, 0)) n->accumulate(self.grad);
    if (Node* n = needs(self, 1)) n->accumulate(-self.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  return make_result(a.value().cwiseProduct(b.value()), "mul", {a, b}, [](Node& self) {
    const Matrix& av = self.inputs[0]->value;
    const Matrix& bv = self.inputs[1]->value;
    if (Node* n = needs(self, 0)) n->accumulate(self.grad.cwiseProduct(bv));
    if (Node* n = needs(self, 1)) n->accumulate(self.grad.cwiseProduct(av));
  });
}

Tensor scale(const Tensor& x, double s) {
  return make_result(x.value() * s, "scale", {x}, [s](Node& self) {
    if (Node* n = needs(self, 0)) n->accumulate(self.grad * s);
  });
}

Tensor add_scalar(const Tensor& x, double s) {
  return make_result(x.value().array() + s, "add_scalar", {x}, [](Node& self) {
    if (Node* n = needs(self, 0)) n->accumulate(self.grad);
  });
}

Tensor broadcast(const Tensor& x, Index rows, Index cols) {
  Matrix out;
  if (x.rows() == 1 && x.cols() == 1) {
    out = Matrix::Constant(rows, cols, x.value()(0, 0));
  } else if (x.rows() == 1 && x.cols() == cols) {
    out = x.value().replicate(rows, 1);
  } else if (x.cols() == 1 && x.rows() == rows) {
    out = x.value().replicate(1, cols);
  } else {
    throw DimensionError("broadcast: cannot expand " + x.shape_str() + " to " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
  return make_result(std::move(out), "broadcast", {x}, [](Node& self) {
    Node* n = needs(self, 0);
    if (!n) return;
    if (n->value.rows() == 1 && n->value.cols() == 1) {
      n->accumulate(Matrix::Constant(1, 1, self.grad.sum()));
    } else if (n->value.rows() == 1) {
      n->accumulate(self.grad.colwise().sum());
    } else {
      n->accumulate(self.grad.rowwise().sum());
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) shape_error("concat_rows", parts.front(), p);
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return make_result(std::move(out), "concat_rows", parts, [](Node& self) {
    Index r0 = 0;
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      const Index nr = self.inputs[i]->value.rows();
      if (Node* n = needs(self, i)) n->accumulate(self.grad.middleRows(r0, nr));
      r0 += nr;
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) shape_error("concat_cols", parts.front(), p);
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return make_result(std::move(out), "concat_cols", parts, [](Node& self) {
    Index c0 = 0;
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      const Index nc = self.inputs[i]->value.cols();
      if (Node* n = needs(self, i)) n->accumulate(self.grad.middleCols(c0, nc));
      c0 += nc;
    }
  });
}

Tensor slice(const Tensor& x, Index row0, Index nrows, Index col0, Index ncols) {
  if (row0 < 0 || col0 < 0 || nrows < 0 || ncols < 0 || row0 + nrows > x.rows() ||
      col0 + ncols > x.cols()) {
    throw DimensionError("slice: block [" + std::to_string(row0) + "+" + std::to_string(nrows) +
                         ", " + std::to_string(col0) + "+" + std::to_string(ncols) +
                         "] outside " + x.shape_str());
  }
  Matrix out = x.value().block(row0, col0, nrows, ncols);
  return make_result(std::move(out), "slice", {x}, [row0, col0](Node& self) {
    Node* n = needs(self, 0);
    if (!n) return;
    Matrix g = Matrix::Zero(n->value.rows(), n->value.cols());
    g.block(row0, col0, self.grad.rows(), self.grad.cols()) = self.grad;
    n->accumulate(g);
  });
}

Tensor gather_cols(const Tensor& x, const std::vector<Index>& cols) {
  Matrix out(x.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] < 0 || cols[j] >= x.cols()) {
      throw DimensionError("gather_cols: column " + std::to_string(cols[j]) + " outside " +
                           x.shape_str());
    }
    out.col(static_cast<Index>(j)) = x.value().col(cols[j]);
  }
  return make_result(std::move(out), "gather_cols", {x}, [cols](Node& self) {
    Node* n = needs(self, 0);
    if (!n) return;
    Matrix g = Matrix::Zero(n->value.rows(), n->value.cols());
    for (std::size_t j = 0; j < cols.size(); ++j) g.col(cols[j]) += self.grad.col(static_cast<Index>(j));
    n->accumulate(g);
  });
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  Matrix out(table.cols(), static_cast<Index>(ids.size()));
  for (std::size_t j = 0; j < ids.size(); ++j) {
    if (ids[j] < 0 || ids[j] >= table.rows()) {
      throw DimensionError("embedding_lookup: id " + std::to_string(ids[j]) +
                           " outside table " + table.shape_str());
    }
    out.col(static_cast<Index>(j)) = table.value().row(ids[j]).transpose();
  }
  return make_result(std::move(out), "embedding_lookup", {table}, [ids](Node& self) {
    Node* n = needs(self, 0);
    if (!n) return;
    if (n->grad.size() == 0) n->grad = Matrix::Zero(n->value.rows(), n->value.cols());
    for (std::size_t j = 0; j < ids.size(); ++j) {
      n->grad.row(ids[j]) += self.grad.col(static_cast<Index>(j)).transpose();
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  Matrix out = x.value().unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  return make_result(std::move(out), "sigmoid", {x}, [](Node& self) {
    if (Node* n = needs(self, 0)) {
      n->accumulate(self.grad.cwiseProduct(
          self.value.unaryExpr([](double s) { return s * (1.0 - s); })));
    }
  });
}

Tensor tanh(const Tensor& x) {
  Matrix out = x.value().array().tanh().matrix();
  return make_result(std::move(out), "tanh", {x}, [](Node& self) {
    if (Node* n = needs(self, 0)) {
      n->accumulate(self.grad.cwiseProduct(
          self.value.unaryExpr([](double t) { return 1.0 - t * t; })));
    }
  });
}

Tensor relu(const Tensor& x) {
  Matrix out = x.value().cwiseMax(0.0);
  return make_result(std::move(out), "relu", {x}, [](Node& self) {
    Node* n = needs(self, 0);
    if (!n) return;
    Matrix g = self.grad;
    for (Index i = 0; i < g.size(); ++i) {
      if (!(n->value.data()[i] > 0.0)) g.data()[i] = 0.0;
    }
    n->accumulate(g);
  });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  Matrix out = x.value().unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
  return make_result(std::move(out), "leaky_relu", {x}, [slope](Node& self) {
    Node* n = needs(self, 0);
    if (!n) return;
    Matrix g = self.grad;
    for (Index i = 0; i < g.size(); ++i) {
      if (!(n->value.data()[i] > 0.0)) g.data()[i] *= slope;
    }
    n->accumulate(g);
  });
}

Tensor log(const Tensor& x) {
  Matrix out = x.value().array().log().matrix();
  return make_result(std::move(out), "log", {x}, [](Node& self) {
    if (Node* n = needs(self, 0)) n->accumulate(self.grad.cwiseQuotient(n->value));
  });
}

Tensor clamp_min(const Tensor& x, double floor) {
  Matrix out = x.value().cwiseMax(floor);
  return make_result(std::move(out), "clamp_min", {x}, [floor](Node& self) {
    Node* n = needs(self, 0);
    if (!n) return;
    Matrix g = self.grad;
    for (Index i = 0; i < g.size(); ++i) {
      if (!(n->value.data()[i] > floor)) g.data()[i] = 0.0;
    }
    n->accumulate(g);
  });
}

Tensor sum(const Tensor& x) {
  return make_result(Matrix::Constant(1, 1, x.value().sum()), "sum", {x}, [](Node& self) {
    if (Node* n = needs(self, 0)) {
      n->accumulate(Matrix::Constant(n->value.rows(), n->value.cols(), self.grad(0, 0)));
    }
  });
}

Tensor mean(const Tensor& x, Axis axis) {
  if (x.size() == 0) throw DimensionError("mean: empty input " + x.shape_str());
  Matrix out = axis == Axis::kRows ? Matrix(x.value().rowwise().mean())
                                   : Matrix(x.value().colwise().mean());
  return make_result(std::move(out), "mean", {x}, [axis](Node& self) {
    Node* n = needs(self, 0);
    if (!n) return;
    const Index r = n->value.rows();
    const Index c = n->value.cols();
    if (axis == Axis::kRows) {
      n->accumulate(self.grad.replicate(1, c) / static_cast<double>(c));
    } else {
      n->accumulate(self.grad.replicate(r, 1) / static_cast<double>(r));
    }
  });
}

Tensor max(const Tensor& x, Axis axis) {
  if (x.size() == 0) throw DimensionError("max: empty input " + x.shape_str());
  const Matrix& v = x.value();
  const bool by_row = axis == Axis::kRows;
  const Index outer = by_row ? v.rows() : v.cols();
  const Index inner = by_row ? v.cols() : v.rows();
  std::vector<Index> arg(static_cast<std::size_t>(outer), 0);
  Matrix out = by_row ? Matrix(outer, 1) : Matrix(1, outer);
  for (Index o = 0; o < outer; ++o) {
    Index best = 0;
    double best_v = by_row ? v(o, 0) : v(0, o);
    for (Index i = 1; i < inner; ++i) {
      const double cur = by_row ? v(o, i) : v(i, o);
      if (cur > best_v) {
        best_v = cur;
        best = i;
      }
    }
    arg[static_cast<std::size_t>(o)] = best;
    out.data()[o] = best_v;
  }
  return make_result(std::move(out), "max", {x}, [arg, by_row](Node& self) {
    Node* n = needs(self, 0);
    if (!n) return;
    Matrix g = Matrix::Zero(n->value.rows(), n->value.cols());
    for (std::size_t o = 0; o < arg.size(); ++o) {
      const Index oi = static_cast<Index>(o);
      if (by_row) {
        g(oi, arg[o]) = self.grad(oi, 0);
      } else {
        g(arg[o], oi) = self.grad(0, oi);
      }
    }
    n->accumulate(g);
  });
}

namespace {

Matrix softmax_value(const Matrix& x, Axis axis, const Matrix* mask) {
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  const bool by_row = axis == Axis::kRows;
  const Index outer = by_row ? x.rows() : x.cols();
  const Index inner = by_row ? x.cols() : x.rows();
  auto at = [&](const Matrix& m, Index o, Index i) -> double { return by_row ? m(o, i) : m(i, o); };
  auto set = [&](Index o, Index i, double v) {
    if (by_row) {
      out(o, i) = v;
    } else {
      out(i, o) = v;
    }
  };
  for (Index o = 0; o < outer; ++o) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < inner; ++i) {
      if (mask && at(*mask, o, i) == 0.0) continue;
      mx = std::max(mx, at(x, o, i));
    }
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw ContractError("softmax: slice " + std::to_string(o) + " has no unmasked entries");
    }
    double z = 0.0;
    for (Index i = 0; i < inner; ++i) {
      if (mask && at(*mask, o, i) == 0.0) continue;
      const double e = std::exp(at(x, o, i) - mx);
      set(o, i, e);
      z += e;
    }
    for (Index i = 0; i < inner; ++i) set(o, i, at(out, o, i) / z);
  }
  return out;
}

Tensor softmax_impl(const Tensor& x, Axis axis, const Matrix* mask) {
  if (mask && (mask->rows() != x.rows() || mask->cols() != x.cols())) {
    throw DimensionError("softmax: mask shape " + std::to_string(mask->rows()) + "x" +
                         std::to_string(mask->cols()) + " vs input " + x.shape_str());
  }
  Matrix out = softmax_value(x.value(), axis, mask);
  return make_result(std::move(out), "softmax", {x}, [axis](Node& self) {
    Node* n = needs(self, 0);
    if (!n) return;
    // dx = y * (g - <g, y>) within each normalized slice; masked y are 0.
    const Matrix& y = self.value;
    const Matrix gy = self.grad.cwiseProduct(y);
    Matrix dx;
    if (axis == Axis::kRows) {
      const Matrix dots = gy.rowwise().sum();
      dx = gy - y.cwiseProduct(dots.replicate(1, y.cols()));
    } else {
      const Matrix dots = gy.colwise().sum();
      dx = gy - y.cwiseProduct(dots.replicate(y.rows(), 1));
    }
    n->accumulate(dx);
  });
}

}  // namespace

Tensor softmax(const Tensor& x, Axis axis) { return softmax_impl(x, axis, nullptr); }

Tensor softmax(const Tensor& x, Axis axis, const Matrix& mask) {
  return softmax_impl(x, axis, &mask);
}

Tensor scatter_add_rows(const Tensor& x, const std::vector<Index>& index, Index out_rows) {
  if (x.cols() != 1 || static_cast<Index>(index.size()) != x.rows()) {
    throw DimensionError("scatter_add_rows: expected column of " + std::to_string(index.size()) +
                         " rows, got " + x.shape_str());
  }
  Matrix out = Matrix::Zero(out_rows, 1);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= out_rows) {
      throw DimensionError("scatter_add_rows: target row " + std::to_string(index[i]) +
                           " outside " + std::to_string(out_rows));
    }
    out(index[i], 0) += x.value()(static_cast<Index>(i), 0);
  }
  return make_result(std::move(out), "scatter_add_rows", {x}, [index](Node& self) {
    Node* n = needs(self, 0);
    if (!n) return;
    Matrix g(static_cast<Index>(index.size()), 1);
    for (std::size_t i = 0; i < index.size(); ++i) g(static_cast<Index>(i), 0) = self.grad(index[i], 0);
    n->accumulate(g);
  });
}

Tensor segment_max(const Tensor& x, const std::vector<Index>& group, Index num_groups) {
  if (x.cols() != 1 || static_cast<Index>(group.size()) != x.rows()) {
    throw DimensionError("segment_max: expected column of " + std::to_string(group.size()) +
                         " rows, got " + x.shape_str());
  }
  const double neg_inf = -std::numeric_limits<double>::infinity();
  Matrix out = Matrix::Constant(num_groups, 1, neg_inf);
  std::vector<Index> arg(static_cast<std::size_t>(num_groups), -1);
  for (std::size_t i = 0; i < group.size(); ++i) {
    const Index gi = group[i];
    if (gi < 0 || gi >= num_groups) throw DimensionError("segment_max: group id out of range");
    const double v = x.value()(static_cast<Index>(i), 0);
    if (arg[gi] < 0 || v > out(gi, 0)) {
      out(gi, 0) = v;
      arg[gi] = static_cast<Index>(i);
    }
  }
  return make_result(std::move(out), "segment_max", {x}, [arg](Node& self) {
    Node* n = needs(self, 0);
    if (!n) return;
    Matrix g = Matrix::Zero(n->value.rows(), 1);
    for (std::size_t k = 0; k < arg.size(); ++k) {
      if (arg[k] >= 0) g(arg[k], 0) += self.grad(static_cast<Index>(k), 0);
    }
    n->accumulate(g);
  });
}

Tensor nll_gather(const Tensor& log_probs, const std::vector<Index>& targets) {
  if (static_cast<Index>(targets.size()) != log_probs.cols()) {
    throw DimensionError("nll_gather: " + std::to_string(targets.size()) + " targets for " +
                         log_probs.shape_str());
  }
  double total = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (targets[t] < 0 || targets[t] >= log_probs.rows()) {
      throw DimensionError("nll_gather: target " + std::to_string(targets[t]) + " outside " +
                           log_probs.shape_str());
    }
    total -= log_probs.value()(targets[t], static_cast<Index>(t));
  }
  return make_result(Matrix::Constant(1, 1, total), "nll_gather", {log_probs},
                     [targets](Node& self) {
                       Node* n = needs(self, 0);
                       if (!n) return;
                       Matrix g = Matrix::Zero(n->value.rows(), n->value.cols());
                       for (std::size_t t = 0; t < targets.size(); ++t) {
                         g(targets[t], static_cast<Index>(t)) = -self.grad(0, 0);
                       }
                       n->accumulate(g);
                     });
}

Tensor pick(const Tensor& x, Index row, Index col) { return slice(x, row, 1, col, 1); }

Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw ContractError("dropout: probability must be < 1");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix keep(x.rows(), x.cols());
  const double s = 1.0 / (1.0 - p);
  for (Index i = 0; i < keep.size(); ++i) keep.data()[i] = unif(rng) < p ? 0.0 : s;
  Matrix out = x.value().cwiseProduct(keep);
  return make_result(std::move(out), "dropout", {x}, [keep = std::move(keep)](Node& self) {
    if (Node* n = needs(self, 0)) n->accumulate(self.grad.cwiseProduct(keep));
  });
}

}  // namespace mulqg
