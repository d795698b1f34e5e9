#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "eltrack/ops.hpp"
#include "eltrack/tensor.hpp"

namespace eltrack {

/// Deterministic initializer source. Draws doubles and casts, so a float and
/// a double model built from the same seed hold the same parameters.
class InitRng {
public:
    explicit InitRng(std::uint64_t seed) : engine_(seed) {}

    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    template <typename T>
    Mat<T> uniform_matrix(Index rows, Index cols, double bound) {
        Mat<T> m(rows, cols);
        for (Index i = 0; i < m.size(); ++i) {
            m.data()[i] = static_cast<T>(uniform(-bound, bound));
        }
        return m;
    }

private:
    std::mt19937_64 engine_;
};

/// Ordered registry of named learnable tensors.
template <typename T>
class ParamSet {
public:
    Tensor<T> create(const std::string& name, Mat<T> init);

    const std::vector<std::pair<std::string, Tensor<T>>>& items() const { return items_; }
    Tensor<T> find(const std::string& name) const;
    std::size_t count() const;
    void zero_grad();

private:
    std::vector<std::pair<std::string, Tensor<T>>> items_;
};

template <typename T>
class Linear {
public:
    Linear() = default;
    Linear(ParamSet<T>& params, const std::string& name, Index in, Index out, InitRng& rng,
           bool bias = true);

    Tensor<T> forward(const Tensor<T>& x) const;

    Tensor<T> weight;  // (in x out)
    Tensor<T> bias;    // (1 x out), undefined when constructed without bias
};

template <typename T>
class LayerNorm {
public:
    LayerNorm() = default;
    LayerNorm(ParamSet<T>& params, const std::string& name, Index dim);

    Tensor<T> forward(const Tensor<T>& x) const { return ops::layer_norm_rows(x, gamma, beta); }

    Tensor<T> gamma;
    Tensor<T> beta;
};

/// Linear -> ReLU -> Linear.
template <typename T>
class FeedForward {
public:
    FeedForward() = default;
    FeedForward(ParamSet<T>& params, const std::string& name, Index dim, Index hidden, InitRng& rng);

    Tensor<T> forward(const Tensor<T>& x) const { return fc2.forward(ops::relu(fc1.forward(x))); }

    Linear<T> fc1;
    Linear<T> fc2;
};

struct AttentionConfig {
    int embed_dim = 64;
    int num_heads = 4;
    int num_points = 4;  // deformable only

    void validate() const;
};

template <typename T>
struct AttentionResult {
    Tensor<T> output;
    // One (queries x keys) matrix per head.
    std::vector<Mat<T>> weights;
};

/// Scaled dot-product multi-head attention with input and output projections.
template <typename T>
class MultiHeadAttention {
public:
    MultiHeadAttention() = default;
    MultiHeadAttention(ParamSet<T>& params, const std::string& name, const AttentionConfig& cfg,
                       InitRng& rng);

    AttentionResult<T> forward(const Tensor<T>& query, const Tensor<T>& key_value) const;

    AttentionConfig cfg;
    Linear<T> q_proj;
    Linear<T> k_proj;
    Linear<T> v_proj;
    Linear<T> out_proj;
};

template <typename T>
struct DeformableResult {
    Tensor<T> output;     // (N x c)
    Tensor<T> locations;  // (N x heads*K*2), normalized (x, y) pairs
    Tensor<T> weights;    // (N x heads*K), softmax per head over K
};

/// Single-scale deformable cross-attention: every query reads K bilinear
/// samples per head around its reference point. Offsets are in feature-cell
/// units and are not clamped; samples outside the map read zeros.
template <typename T>
class DeformableCrossAttention {
public:
    DeformableCrossAttention() = default;
    DeformableCrossAttention(ParamSet<T>& params, const std::string& name, const AttentionConfig& cfg,
                             InitRng& rng);

    /// queries (N x c), refs (N x 2) normalized, value_map (H*W x c).
    DeformableResult<T> forward(const Tensor<T>& queries, const Tensor<T>& refs,
                                const Tensor<T>& value_map, int height, int width) const;

    AttentionConfig cfg;
    Linear<T> offset_proj;  // c -> heads*K*2
    Linear<T> weight_proj;  // c -> heads*K
    Linear<T> value_proj;
    Linear<T> out_proj;
};

/// 3x3-style convolution over an (H*W x Cin) map via im2col.
template <typename T>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(ParamSet<T>& params, const std::string& name, int in_ch, int out_ch, int kernel, int stride,
           int pad, InitRng& rng);

    struct Output {
        Tensor<T> values;
        int height;
        int width;
    };
    Output forward(const Tensor<T>& x, int height, int width) const;

    int kernel = 3;
    int stride = 1;
    int pad = 1;
    Tensor<T> weight;  // (k*k*in x out)
    Tensor<T> bias;    // (1 x out)
};

/// Sets every entry of a parameter to a constant (test setup, special inits).
template <typename T>
void fill(Tensor<T>& t, T v) {
    t.mutable_value().setConstant(v);
}

}  // namespace eltrack
