#include "mulqg/errors.hpp"
#include "mulqg/grad_check.hpp"
#include "mulqg/ops.hpp"
#include "mulqg/params.hpp"
#include "mulqg/tensor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

using namespace mulqg;

namespace {

Matrix random_matrix(Index r, Index c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

ParamSet single(const std::string& name, const Tensor& t) {
  ParamSet p;
  p.add(name, t);
  return p;
}

// Reduces an arbitrary-shape output to a scalar with fixed random weights so
// every output entry contributes a distinct gradient.
Tensor weighted_sum(const Tensor& y, const Matrix& w) { return sum(mul(y, Tensor(w))); }

}  // namespace

TEST(Matmul, HandComputedProduct) {
  const Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
  const Tensor b = Tensor::from_rows({{5, 6}, {7, 8}});
  const Matrix c = matmul(a, b).value();
  EXPECT_EQ(c(0, 0), 19);
  EXPECT_EQ(c(0, 1), 22);
  EXPECT_EQ(c(1, 0), 43);
  EXPECT_EQ(c(1, 1), 50);
}

TEST(Matmul, IdentityAndZero) {
  std::mt19937_64 rng(1);
  const Tensor b(random_matrix(2, 3, rng));
  EXPECT_EQ(matmul(Tensor(Matrix::Identity(2, 2)), b).value(), b.value());
  EXPECT_TRUE(matmul(b, Tensor::zeros(3, 4)).value().isZero());
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Tensor::zeros(2, 3), Tensor::zeros(2, 3));
    FAIL() << "expected a dimension error";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
    EXPECT_EQ(e.kind(), "dimension");
  }
}

TEST(Softmax, ClosedFormRow) {
  const Tensor x = Tensor::from_rows({{0.0, std::log(2.0)}});
  const Matrix p = softmax(x, Axis::kRows).value();
  EXPECT_NEAR(p(0, 0), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(p(0, 1), 2.0 / 3.0, 1e-15);
}

TEST(Softmax, UniformAndShiftInvariant) {
  const Matrix u = softmax(Tensor::constant(1, 4, 3.5), Axis::kRows).value();
  for (Index j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(u(0, j), 0.25);
  std::mt19937_64 rng(2);
  const Matrix m = random_matrix(3, 5, rng, -5, 5);
  const Matrix a = softmax(Tensor(m), Axis::kCols).value();
  const Matrix b = softmax(Tensor((m.array() + 123.0).matrix()), Axis::kCols).value();
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Softmax, AxesSumToOneAndStayInOpenInterval) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x(random_matrix(4, 6, rng, -20, 20));
    const Matrix r = softmax(x, Axis::kRows).value();
    const Matrix c = softmax(x, Axis::kCols).value();
    for (Index i = 0; i < 4; ++i) EXPECT_NEAR(r.row(i).sum(), 1.0, 1e-12);
    for (Index j = 0; j < 6; ++j) EXPECT_NEAR(c.col(j).sum(), 1.0, 1e-12);
    EXPECT_GT(r.minCoeff(), 0.0);
    EXPECT_LT(r.maxCoeff(), 1.0);
  }
}

TEST(Softmax, LargeInputsStayFinite) {
  const Matrix p = softmax(Tensor::from_rows({{1000.0, 1001.0, -1000.0}}), Axis::kRows).value();
  EXPECT_TRUE(p.allFinite());
  EXPECT_NEAR(p.sum(), 1.0, 1e-15);
}

TEST(Softmax, MaskZeroesEntriesAndRejectsEmptySlices) {
  Matrix mask(1, 3);
  mask << 1, 0, 1;
  const Matrix p = softmax(Tensor::from_rows({{0.0, 5.0, 0.0}}), Axis::kRows, mask).value();
  EXPECT_EQ(p(0, 1), 0.0);
  EXPECT_NEAR(p(0, 0), 0.5, 1e-15);
  EXPECT_THROW(softmax(Tensor::zeros(1, 3), Axis::kRows, Matrix::Zero(1, 3)), ContractError);
}

TEST(Backward, SquareAndSigmoid) {
  Tensor x = Tensor::scalar(3.0, true);
  backward(mul(x, x));
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 6.0);

  Tensor z = Tensor::scalar(0.0, true);
  backward(sigmoid(z));
  EXPECT_DOUBLE_EQ(z.grad()(0, 0), 0.25);
}

TEST(Backward, NonScalarLossIsContractViolation) {
  Tensor x = Tensor::zeros(2, 1, true);
  EXPECT_THROW(backward(scale(x, 2.0)), ContractError);
}

TEST(Backward, UntouchedParameterReadsZero) {
  Tensor used = Tensor::scalar(2.0, true);
  Tensor unused = Tensor::zeros(2, 2, true);
  backward(mul(used, used));
  EXPECT_TRUE(unused.grad().isZero());
  EXPECT_EQ(unused.grad().rows(), 2);
}

TEST(Backward, AccumulatesAcrossCalls) {
  Tensor x = Tensor::scalar(1.5, true);
  backward(scale(x, 2.0));
  backward(scale(x, 3.0));
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 5.0);
  x.zero_grad();
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 0.0);
}

TEST(Backward, SharedSubexpressionMatchesExpandedGraph) {
  std::mt19937_64 rng(4);
  const Matrix xv = random_matrix(3, 3, rng);
  Tensor x1(xv, true);
  const Tensor s = tanh(x1);
  backward(sum(mul(s, s)));
  Tensor x2(xv, true);
  backward(sum(mul(tanh(x2), tanh(x2))));
  EXPECT_LT((x1.grad() - x2.grad()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(CompGraph, InputsPrecedeConsumersOnce) {
  Tensor a = Tensor::scalar(1.0, true);
  const Tensor b = mul(a, a);
  const Tensor c = add(b, a);
  const Tensor d = mul(c, b);
  const CompGraph g(d);
  const auto& order = g.order();
  std::map<const Node*, std::size_t> pos;
  for (std::size_t i = 0; i < order.size(); ++i) {
    EXPECT_EQ(pos.count(order[i]), 0u);
    pos[order[i]] = i;
  }
  for (const Node* n : order) {
    for (const auto& in : n->inputs) {
      ASSERT_TRUE(pos.count(in.get()));
      EXPECT_LT(pos[in.get()], pos[n]);
    }
  }
  EXPECT_EQ(order.size(), 4u);
}

TEST(NoGrad, RecordsNothing) {
  Tensor x = Tensor::scalar(2.0, true);
  NoGradGuard guard;
  const Tensor y = mul(x, x);
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(y.node()->inputs.empty());
}

TEST(Ops, MaxTiesRouteGradientToFirstIndex) {
  Tensor x = Tensor::from_rows({{2.0, 5.0, 5.0}}, true);
  backward(sum(max(x, Axis::kRows)));
  EXPECT_EQ(x.grad()(0, 1), 1.0);
  EXPECT_EQ(x.grad()(0, 2), 0.0);
  EXPECT_EQ(x.grad()(0, 0), 0.0);
}

TEST(Ops, BroadcastRowAndColumn) {
  const Tensor row = Tensor::from_rows({{1, 2, 3}});
  const Matrix r = broadcast(row, 2, 3).value();
  EXPECT_EQ(r.row(1), row.value().row(0));
  const Tensor col = Tensor::from_rows({{1}, {2}});
  EXPECT_EQ(broadcast(col, 2, 4).value().col(3), col.value().col(0));
  EXPECT_THROW(broadcast(Tensor::zeros(2, 2), 3, 3), DimensionError);
}

TEST(Ops, SegmentMaxAndScatterAdd) {
  const Tensor x = Tensor::from_rows({{0.2}, {0.9}, {0.7}});
  const Matrix m = segment_max(x, {0, 1, 0}, 2).value();
  EXPECT_DOUBLE_EQ(m(0, 0), 0.7);
  EXPECT_DOUBLE_EQ(m(1, 0), 0.9);
  const Matrix s = scatter_add_rows(x, {2, 0, 2}, 3).value();
  EXPECT_DOUBLE_EQ(s(0, 0), 0.9);
  EXPECT_DOUBLE_EQ(s(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(s(2, 0), 0.9);
}

TEST(Ops, DropoutIsInvertedAndSeeded) {
  std::mt19937_64 r1(9);
  std::mt19937_64 r2(9);
  const Tensor x = Tensor::constant(20, 20, 1.0);
  const Matrix a = dropout(x, 0.25, r1).value();
  const Matrix b = dropout(x, 0.25, r2).value();
  EXPECT_EQ(a, b);
  for (Index i = 0; i < a.size(); ++i) {
    const double v = a.data()[i];
    EXPECT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.75) < 1e-15);
  }
}

TEST(Ops, NllGatherSumsNegativeLogProbs) {
  const Tensor lp = Tensor::from_rows({{std::log(0.5), std::log(0.25)}, {std::log(0.5), std::log(0.75)}});
  EXPECT_NEAR(nll_gather(lp, {0, 1}).item(), -std::log(0.5) - std::log(0.75), 1e-15);
}

TEST(Ops, DeterministicBitwise) {
  std::mt19937_64 rng(5);
  const Matrix a = random_matrix(5, 4, rng);
  const Matrix b = random_matrix(4, 6, rng);
  const Matrix y1 = softmax(matmul(Tensor(a), Tensor(b)), Axis::kCols).value();
  const Matrix y2 = softmax(matmul(Tensor(a), Tensor(b)), Axis::kCols).value();
  EXPECT_EQ(y1, y2);
}

TEST(GradCheck, LinearMapIsNearExact) {
  std::mt19937_64 rng(6);
  Tensor w(random_matrix(3, 4, rng), true);
  const Tensor x(random_matrix(4, 2, rng));
  const Matrix c = random_matrix(3, 2, rng);
  const auto report = grad_check([&] { return weighted_sum(matmul(w, x), c); }, single("w", w));
  EXPECT_LE(report.max_rel_error, 1e-9);
}

TEST(GradCheck, SigmoidUnit) {
  Tensor x = Tensor::scalar(0.3, true);
  const auto report = grad_check([&] { return sigmoid(x); }, single("x", x));
  EXPECT_LE(report.max_rel_error, 1e-7);
}

TEST(GradCheck, RandomThreeOpChain) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor a(random_matrix(3, 3, rng), true);
    Tensor b(random_matrix(3, 3, rng), true);
    ParamSet p;
    p.add("a", a);
    p.add("b", b);
    const auto report = grad_check([&] { return sum(tanh(matmul(sigmoid(a), b))); }, p);
    EXPECT_LE(report.max_rel_error, 1e-6) << report.worst;
  }
}

TEST(GradCheck, RejectsStepOutsideRange) {
  Tensor x = Tensor::scalar(1.0, true);
  EXPECT_THROW(grad_check([&] { return x; }, single("x", x), 1e-2), ContractError);
  EXPECT_THROW(grad_check([&] { return x; }, single("x", x), 1e-7), ContractError);
}

TEST(GradCheck, NonFiniteIntermediateNamesTheOp) {
  Tensor x = Tensor::scalar(-1.0, true);
  try {
    grad_check([&] { return log(x); }, single("x", x));
    FAIL() << "expected a non-finite error";
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("log"), std::string::npos) << e.what();
  }
}

// Every differentiable op against central differences on random instances.
struct OpCase {
  const char* name;
  Index rows, cols;
  double lo, hi;
  std::function<Tensor(const Tensor&)> fn;
  double kink_margin = 0.0;  // keeps samples this far from a non-differentiable point at 0
};

class OpGradient : public ::testing::TestWithParam<OpCase> {};

TEST_P(OpGradient, MatchesCentralDifferences) {
  const OpCase& op = GetParam();
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Matrix v = random_matrix(op.rows, op.cols, rng, op.lo, op.hi);
    if (op.kink_margin > 0) v = v.unaryExpr([&](double a) { return a < 0 ? a - op.kink_margin : a + op.kink_margin; });
    Tensor x(v, true);
    const Tensor probe = op.fn(x);
    const Matrix w = random_matrix(probe.rows(), probe.cols(), rng);
    const auto report = grad_check([&] { return weighted_sum(op.fn(x), w); }, single("x", x));
    worst = std::max(worst, report.max_rel_error);
  }
  EXPECT_LE(worst, 1e-4) << op.name;
}

namespace {

const Matrix kRight = [] {
  std::mt19937_64 rng(12);
  return random_matrix(4, 3, rng);
}();
const Matrix kOther = [] {
  std::mt19937_64 rng(13);
  return random_matrix(3, 4, rng);
}();

}  // namespace

INSTANTIATE_TEST_SUITE_P(
    AllOps, OpGradient,
    ::testing::Values(
        OpCase{"matmul_left", 3, 4, -1, 1, [](const Tensor& x) { return matmul(x, Tensor(kRight)); }},
        OpCase{"matmul_right", 4, 3, -1, 1, [](const Tensor& x) { return matmul(Tensor(kOther), x); }},
        OpCase{"transpose", 3, 4, -1, 1, [](const Tensor& x) { return transpose(x); }},
        OpCase{"add", 3, 4, -1, 1, [](const Tensor& x) { return add(x, Tensor(kOther)); }},
        OpCase{"sub", 3, 4, -1, 1, [](const Tensor& x) { return sub(Tensor(kOther), x); }},
        OpCase{"mul", 3, 4, -1, 1, [](const Tensor& x) { return mul(x, x); }},
        OpCase{"scale", 3, 4, -1, 1, [](const Tensor& x) { return scale(x, -2.5); }},
        OpCase{"add_scalar", 3, 4, -1, 1, [](const Tensor& x) { return add_scalar(x, 0.7); }},
        OpCase{"broadcast_row", 1, 4, -1, 1, [](const Tensor& x) { return broadcast(x, 3, 4); }},
        OpCase{"broadcast_col", 3, 1, -1, 1, [](const Tensor& x) { return broadcast(x, 3, 5); }},
        OpCase{"concat_rows", 2, 4, -1, 1, [](const Tensor& x) { return concat_rows({x, Tensor(kOther), x}); }},
        OpCase{"concat_cols", 3, 2, -1, 1, [](const Tensor& x) { return concat_cols({x, Tensor(kOther), x}); }},
        OpCase{"slice", 4, 5, -1, 1, [](const Tensor& x) { return slice(x, 1, 2, 1, 3); }},
        OpCase{"gather_cols", 3, 4, -1, 1, [](const Tensor& x) { return gather_cols(x, {3, 0, 3}); }},
        OpCase{"embedding_lookup", 5, 3, -1, 1, [](const Tensor& x) { return embedding_lookup(x, {4, 1, 4, 0}); }},
        OpCase{"sigmoid", 3, 4, -3, 3, [](const Tensor& x) { return sigmoid(x); }},
        OpCase{"tanh", 3, 4, -3, 3, [](const Tensor& x) { return tanh(x); }},
        OpCase{"relu", 3, 4, -1, 1, [](const Tensor& x) { return relu(x); }, 1e-2},
        OpCase{"leaky_relu", 3, 4, -1, 1, [](const Tensor& x) { return leaky_relu(x, 0.2); }, 1e-2},
        OpCase{"log", 3, 4, 0.2, 3, [](const Tensor& x) { return log(x); }},
        OpCase{"sum", 3, 4, -1, 1, [](const Tensor& x) { return mul(sum(x), sum(x)); }},
        OpCase{"mean_rows", 3, 4, -1, 1, [](const Tensor& x) { return mean(x, Axis::kRows); }},
        OpCase{"mean_cols", 3, 4, -1, 1, [](const Tensor& x) { return mean(x, Axis::kCols); }},
        OpCase{"max_rows", 3, 4, -1, 1, [](const Tensor& x) { return max(x, Axis::kRows); }},
        OpCase{"max_cols", 3, 4, -1, 1, [](const Tensor& x) { return max(x, Axis::kCols); }},
        OpCase{"softmax_rows", 3, 4, -3, 3, [](const Tensor& x) { return softmax(x, Axis::kRows); }},
        OpCase{"softmax_cols", 3, 4, -3, 3, [](const Tensor& x) { return softmax(x, Axis::kCols); }},
        OpCase{"softmax_masked", 3, 4, -3, 3,
               [](const Tensor& x) {
                 Matrix mask = Matrix::Ones(3, 4);
                 mask(0, 1) = mask(2, 3) = 0.0;
                 return softmax(x, Axis::kRows, mask);
               }},
        OpCase{"scatter_add_rows", 4, 1, -1, 1, [](const Tensor& x) { return scatter_add_rows(x, {1, 0, 1, 2}, 3); }},
        OpCase{"segment_max", 5, 1, -1, 1, [](const Tensor& x) { return segment_max(x, {0, 1, 0, 2, 1}, 3); }},
        OpCase{"nll_gather", 3, 4, -3, -0.1, [](const Tensor& x) { return nll_gather(x, {0, 2, 1, 2}); }},
        OpCase{"pick", 3, 4, -1, 1, [](const Tensor& x) { return pick(x, 2, 1); }}),
    [](const ::testing::TestParamInfo<OpCase>& info) { return std::string(info.param.name); });

TEST(Params, DuplicateNamesRejected) {
  ParamSet p;
  p.add("w", Tensor::zeros(1, 1, true));
  EXPECT_THROW(p.add("w", Tensor::zeros(1, 1, true)), ContractError);
}

TEST(Params, UniformInitWithinFanInBound) {
  std::mt19937_64 rng(14);
  const Tensor t = uniform_param(10, 10, 16, rng);
  EXPECT_LE(t.value().cwiseAbs().maxCoeff(), 0.25);
  EXPECT_TRUE(t.requires_grad());
}

TEST(Params, JsonRoundTripIsExactAndShapeChecked) {
  std::mt19937_64 rng(15);
  ParamSet a;
  a.add("x", Tensor(random_matrix(2, 3, rng), true));
  a.add("y", Tensor(random_matrix(1, 4, rng), true));
  const auto j = nlohmann::json::parse(tensors_to_json(a).dump());
  ParamSet b;
  b.add("x", Tensor::zeros(2, 3, true));
  b.add("y", Tensor::zeros(1, 4, true));
  tensors_from_json(j, b);
  EXPECT_EQ(a.at("x").value(), b.at("x").value());
  EXPECT_EQ(a.at("y").value(), b.at("y").value());
  EXPECT_EQ(j.at("x").at("shape"), nlohmann::json({2, 3}));

  ParamSet wrong;
  wrong.add("x", Tensor::zeros(3, 2, true));
  wrong.add("y", Tensor::zeros(1, 4, true));
  EXPECT_THROW(tensors_from_json(j, wrong), Error);
}
