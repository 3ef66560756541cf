#include "mulqg/lstm.hpp"

#include "mulqg/errors.hpp"
#include "mulqg/ops.hpp"

namespace mulqg {

LstmParams LstmParams::init(Index in, Index hidden, std::mt19937_64& rng) {
  LstmParams p;
  p.hidden = hidden;
  p.w_in = uniform_param(4 * hidden, in, hidden, rng);
  p.w_hh = uniform_param(4 * hidden, hidden, hidden, rng);
  p.bias = uniform_param(4 * hidden, 1, hidden, rng);
  return p;
}

void LstmParams::register_into(ParamSet& set, const std::string& prefix) const {
  set.add(prefix + ".w_in", w_in);
  set.add(prefix + ".w_hh", w_hh);
  set.add(prefix + ".bias", bias);
}

LstmCellState lstm_step(const LstmParams& p, const Tensor& projected_input,
                        const LstmCellState& prev) {
  const Index h = p.hidden;
  Tensor z = add(add(projected_input, matmul(p.w_hh, prev.h)), p.bias);
  Tensor i = sigmoid(slice(z, 0, h, 0, 1));
  Tensor f = sigmoid(slice(z, h, h, 0, 1));
  Tensor g = tanh(slice(z, 2 * h, h, 0, 1));
  Tensor o = sigmoid(slice(z, 3 * h, h, 0, 1));
  Tensor c = add(mul(f, prev.c), mul(i, g));
  return {mul(o, tanh(c)), c};
}

Tensor run_lstm(const LstmParams& p, const Tensor& x, bool reverse) {
  if (x.rows() != p.w_in.cols()) {
    throw DimensionError("run_lstm: input has " + std::to_string(x.rows()) + " rows, cell expects " +
                         std::to_string(p.w_in.cols()));
  }
  const Index n = x.cols();
  if (n == 0) throw DimensionError("run_lstm: empty sequence");
  const Tensor projected = matmul(p.w_in, x);
  LstmCellState state{Tensor::zeros(p.hidden, 1), Tensor::zeros(p.hidden, 1)};
  std::vector<Tensor> outs(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) {
    const Index t = reverse ? n - 1 - k : k;
    state = lstm_step(p, slice(projected, 0, projected.rows(), t, 1), state);
    outs[static_cast<std::size_t>(t)] = state.h;
  }
  return concat_cols(outs);
}

BiLstmParams BiLstmParams::init(Index in, Index out, std::mt19937_64& rng) {
  if (out % 2 != 0) throw ConfigError("bidirectional output size must be even");
  BiLstmParams p;
  p.fwd = LstmParams::init(in, out / 2, rng);
  p.bwd = LstmParams::init(in, out / 2, rng);
  return p;
}

void BiLstmParams::register_into(ParamSet& set, const std::string& prefix) const {
  fwd.register_into(set, prefix + ".fwd");
  bwd.register_into(set, prefix + ".bwd");
}

Tensor run_bilstm(const BiLstmParams& p, const Tensor& x) {
  return concat_rows({run_lstm(p.fwd, x, false), run_lstm(p.bwd, x, true)});
}

}  // namespace mulqg
