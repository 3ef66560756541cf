#pragma once

#include "mulqg/params.hpp"
#include "mulqg/tensor.hpp"

#include <random>
#include <string>
#include <utility>

namespace mulqg {

// One LSTM direction. Gate rows are stacked as [input; forget; cell; output].
struct LstmParams {
  Tensor w_in;   // 4h x in
  Tensor w_hh;   // 4h x h
  Tensor bias;   // 4h x 1
  Index hidden = 0;

  static LstmParams init(Index in, Index hidden, std::mt19937_64& rng);
  void register_into(ParamSet& set, const std::string& prefix) const;
};

struct LstmCellState {
  Tensor h;  // hidden x 1
  Tensor c;
};

// Advances one step given the already-projected input column w_in * x_t.
LstmCellState lstm_step(const LstmParams& p, const Tensor& projected_input,
                        const LstmCellState& prev);

// Runs over the columns of x (in x n) from a zero state; returns hidden x n.
Tensor run_lstm(const LstmParams& p, const Tensor& x, bool reverse);

struct BiLstmParams {
  LstmParams fwd;
  LstmParams bwd;

  static BiLstmParams init(Index in, Index out, std::mt19937_64& rng);
  void register_into(ParamSet& set, const std::string& prefix) const;
  Index out_dim() const { return fwd.hidden + bwd.hidden; }
};

// Forward and backward directions concatenated row-wise: out_dim x n.
Tensor run_bilstm(const BiLstmParams& p, const Tensor& x);

}  // namespace mulqg
