#pragma once

// Differentiable operations on Tensor<T>. Instantiated for float (training,
// inference) and double (gradient checks).

#include <span>
#include <vector>

#include "eltrack/tensor.hpp"

namespace eltrack::ops {

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T s);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T s);
/// a (r x c) + row (1 x c), row broadcast down every row.
template <typename T> Tensor<T> add_row(const Tensor<T>& a, const Tensor<T>& row);
template <typename T> Tensor<T> mul_row(const Tensor<T>& a, const Tensor<T>& row);
/// a (r x c) * col (r x 1), column broadcast across every column.
template <typename T> Tensor<T> mul_col(const Tensor<T>& a, const Tensor<T>& col);

template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// a * b^T without materializing the transpose.
template <typename T> Tensor<T> matmul_bt(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> transpose(const Tensor<T>& a);

template <typename T> Tensor<T> relu(const Tensor<T>& a);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& a);
/// log(p / (1 - p)) with p clamped to [eps, 1 - eps]; zero gradient where clamped.
template <typename T> Tensor<T> logit(const Tensor<T>& a, T eps = T(1e-4));
template <typename T> Tensor<T> abs(const Tensor<T>& a);
template <typename T> Tensor<T> minimum(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> maximum(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> clamp_min(const Tensor<T>& a, T lo);
template <typename T> Tensor<T> divide(const Tensor<T>& a, const Tensor<T>& b);

/// Sum of all entries, as a 1x1 tensor.
template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);
/// Per-row sum, (r x 1).
template <typename T> Tensor<T> row_sum(const Tensor<T>& a);

template <typename T> Tensor<T> softmax_rows(const Tensor<T>& a);
template <typename T>
Tensor<T> layer_norm_rows(const Tensor<T>& a, const Tensor<T>& gamma, const Tensor<T>& beta,
                          T eps = T(1e-5));
template <typename T> Tensor<T> l2_normalize_rows(const Tensor<T>& a, T eps = T(1e-8));

template <typename T> Tensor<T> concat_rows(std::span<const Tensor<T>> parts);
template <typename T> Tensor<T> concat_cols(std::span<const Tensor<T>> parts);
template <typename T> Tensor<T> slice_rows(const Tensor<T>& a, Index start, Index count);
template <typename T> Tensor<T> slice_cols(const Tensor<T>& a, Index start, Index count);
template <typename T> Tensor<T> gather_rows(const Tensor<T>& a, std::span<const Index> rows);
/// Row-major reshape; element order is unchanged.
template <typename T> Tensor<T> reshape(const Tensor<T>& a, Index rows, Index cols);
/// Repeats the column block `times` times: (r x c) -> (r x c*times).
template <typename T> Tensor<T> tile_cols(const Tensor<T>& a, Index times);
template <typename T> Tensor<T> detach(const Tensor<T>& a);

/// Patch extraction for convolution. Input is an (H*W x C) map; output is
/// (Ho*Wo x k*k*C) with patch columns ordered (ky, kx, c). Zero padding.
template <typename T>
Tensor<T> im2col(const Tensor<T>& a, int height, int width, int kernel, int stride, int pad);

/// Bilinear read of an (H*W x C) map at normalized points (N x 2, x then y).
/// Point p maps to grid coordinate p*extent - 0.5, so pixel centers sit at
/// (j+0.5)/W. Neighbors outside the map contribute zero.
template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& map, int height, int width, const Tensor<T>& points);

/// Core of deformable attention. `value` is (H*W x C) split into `heads`
/// channel groups; `locations` is (N x heads*K*2) normalized (x,y) pairs and
/// `weights` is (N x heads*K). Output row n, head m is
/// sum_k weights[n,m,k] * bilinear(value_m, locations[n,m,k]).
template <typename T>
Tensor<T> deformable_gather(const Tensor<T>& value, int height, int width, int heads,
                            const Tensor<T>& locations, const Tensor<T>& weights);

}  // namespace eltrack::ops
