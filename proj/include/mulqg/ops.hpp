#pragma once

#include "mulqg/tensor.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace mulqg {

// kRows: operate within each row (a row-wise reduction yields r x 1 and a
// row-wise softmax makes every row sum to 1). kCols: the same per column.
enum class Axis { kRows, kCols };

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);
Tensor add_scalar(const Tensor& x, double s);

// Expands a 1x1, 1xc or rx1 tensor to rows x cols; the gradient sums back.
Tensor broadcast(const Tensor& x, Index rows, Index cols);

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice(const Tensor& x, Index row0, Index nrows, Index col0, Index ncols);
Tensor gather_cols(const Tensor& x, const std::vector<Index>& cols);
// Rows `ids` of `table` (|V| x e), returned transposed as e x ids.size().
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor log(const Tensor& x);
// max(x, floor); entries at the floor pass no gradient.
Tensor clamp_min(const Tensor& x, double floor);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x, Axis axis);
// Ties resolve to the lowest index, which alone receives the gradient.
Tensor max(const Tensor& x, Axis axis);

// Max-subtracted softmax. With `mask`, entries whose mask value is zero get
// probability 0; every normalized slice must keep at least one entry.
Tensor softmax(const Tensor& x, Axis axis);
Tensor softmax(const Tensor& x, Axis axis, const Matrix& mask);

// x is a column vector (k x 1); out[index[i]] += x[i] over out_rows rows.
Tensor scatter_add_rows(const Tensor& x, const std::vector<Index>& index, Index out_rows);
// x is a column vector (n x 1); out[g] = max over i with group[i] == g.
Tensor segment_max(const Tensor& x, const std::vector<Index>& group, Index num_groups);

// Sum over columns t of -log_probs(targets[t], t).
Tensor nll_gather(const Tensor& log_probs, const std::vector<Index>& targets);
Tensor pick(const Tensor& x, Index row, Index col);

// Inverted dropout: kept entries are scaled by 1/(1-p).
Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng);

}  // namespace mulqg
