#include "eltrack/layers.hpp"

#include <cmath>
#include <numbers>

namespace eltrack {

template <typename T>
Tensor<T> ParamSet<T>::create(const std::string& name, Mat<T> init) {
    for (const auto& [n, _] : items_) {
        if (n == name) {
            throw ValidationError("duplicate parameter name: " + name);
        }
    }
    Tensor<T> t(std::move(init), true);
    items_.emplace_back(name, t);
    return t;
}

template <typename T>
Tensor<T> ParamSet<T>::find(const std::string& name) const {
    for (const auto& [n, t] : items_) {
        if (n == name) {
            return t;
        }
    }
    throw ValidationError("unknown parameter: " + name);
}

template <typename T>
std::size_t ParamSet<T>::count() const {
    std::size_t total = 0;
    for (const auto& item : items_) {
        total += static_cast<std::size_t>(item.second.size());
    }
    return total;
}

template <typename T>
void ParamSet<T>::zero_grad() {
    for (auto& item : items_) {
        item.second.zero_grad();
    }
}

template <typename T>
Linear<T>::Linear(ParamSet<T>& params, const std::string& name, Index in, Index out, InitRng& rng,
                  bool with_bias) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    weight = params.create(name + ".weight", rng.uniform_matrix<T>(in, out, bound));
    if (with_bias) {
        bias = params.create(name + ".bias", Mat<T>::Zero(1, out));
    }
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) const {
    Tensor<T> y = ops::matmul(x, weight);
    return bias.defined() ? ops::add_row(y, bias) : y;
}

template <typename T>
LayerNorm<T>::LayerNorm(ParamSet<T>& params, const std::string& name, Index dim) {
    gamma = params.create(name + ".gamma", Mat<T>::Ones(1, dim));
    beta = params.create(name + ".beta", Mat<T>::Zero(1, dim));
}

template <typename T>
FeedForward<T>::FeedForward(ParamSet<T>& params, const std::string& name, Index dim, Index hidden,
                            InitRng& rng)
    : fc1(params, name + ".fc1", dim, hidden, rng), fc2(params, name + ".fc2", hidden, dim, rng) {}

void AttentionConfig::validate() const {
    if (embed_dim <= 0 || num_heads <= 0 || embed_dim % num_heads != 0) {
        throw ValidationError("attention: embed_dim must be a positive multiple of num_heads");
    }
    if (num_points < 1) {
        throw ValidationError("attention: num_points must be >= 1");
    }
}

template <typename T>
MultiHeadAttention<T>::MultiHeadAttention(ParamSet<T>& params, const std::string& name,
                                          const AttentionConfig& c, InitRng& rng)
    : cfg(c) {
    cfg.validate();
    q_proj = Linear<T>(params, name + ".q", c.embed_dim, c.embed_dim, rng);
    k_proj = Linear<T>(params, name + ".k", c.embed_dim, c.embed_dim, rng);
    v_proj = Linear<T>(params, name + ".v", c.embed_dim, c.embed_dim, rng);
    out_proj = Linear<T>(params, name + ".out", c.embed_dim, c.embed_dim, rng);
}

template <typename T>
AttentionResult<T> MultiHeadAttention<T>::forward(const Tensor<T>& query,
                                                  const Tensor<T>& key_value) const {
    if (query.cols() != cfg.embed_dim || key_value.cols() != cfg.embed_dim) {
        throw ShapeError("multi_head_attention: last dimension must equal embed_dim");
    }
    if (key_value.rows() == 0) {
        throw ShapeError("multi_head_attention: empty key/value set");
    }
    const Tensor<T> q = q_proj.forward(query);
    const Tensor<T> k = k_proj.forward(key_value);
    const Tensor<T> v = v_proj.forward(key_value);
    const Index d = cfg.embed_dim / cfg.num_heads;
    const T inv_scale = T(1) / std::sqrt(static_cast<T>(d));

    AttentionResult<T> result;
    std::vector<Tensor<T>> heads;
    heads.reserve(cfg.num_heads);
    for (int h = 0; h < cfg.num_heads; ++h) {
        const Tensor<T> qh = ops::slice_cols(q, h * d, d);
        const Tensor<T> kh = ops::slice_cols(k, h * d, d);
        const Tensor<T> vh = ops::slice_cols(v, h * d, d);
        const Tensor<T> attn = ops::softmax_rows(ops::scale(ops::matmul_bt(qh, kh), inv_scale));
        result.weights.push_back(attn.value());
        heads.push_back(ops::matmul(attn, vh));
    }
    result.output = out_proj.forward(ops::concat_cols<T>(heads));
    return result;
}

template <typename T>
DeformableCrossAttention<T>::DeformableCrossAttention(ParamSet<T>& params, const std::string& name,
                                                      const AttentionConfig& c, InitRng& rng)
    : cfg(c) {
    cfg.validate();
    const Index hk = static_cast<Index>(c.num_heads) * c.num_points;
    offset_proj = Linear<T>(params, name + ".offset", c.embed_dim, 2 * hk, rng);
    weight_proj = Linear<T>(params, name + ".attn", c.embed_dim, hk, rng);
    value_proj = Linear<T>(params, name + ".value", c.embed_dim, c.embed_dim, rng);
    out_proj = Linear<T>(params, name + ".out", c.embed_dim, c.embed_dim, rng);

    // Start from a small ring of samples around the reference: head m looks
    // along direction 2*pi*m/heads, point k sits k+1 cells out.
    offset_proj.weight.mutable_value() *= T(0.01);
    Mat<T>& b = offset_proj.bias.mutable_value();
    for (int m = 0; m < c.num_heads; ++m) {
        const double angle = 2.0 * std::numbers::pi * m / c.num_heads;
        for (int k = 0; k < c.num_points; ++k) {
            const Index slot = static_cast<Index>(m) * c.num_points + k;
            b(0, 2 * slot) = static_cast<T>(std::cos(angle) * (k + 1));
            b(0, 2 * slot + 1) = static_cast<T>(std::sin(angle) * (k + 1));
        }
    }
    weight_proj.weight.mutable_value().setZero();
}

template <typename T>
DeformableResult<T> DeformableCrossAttention<T>::forward(const Tensor<T>& queries, const Tensor<T>& refs,
                                                         const Tensor<T>& value_map, int height,
                                                         int width) const {
    if (height <= 0 || width <= 0 || value_map.rows() == 0) {
        throw ShapeError("deformable_cross_attention: empty feature map");
    }
    if (queries.cols() != cfg.embed_dim || value_map.cols() != cfg.embed_dim) {
        throw ShapeError("deformable_cross_attention: channel mismatch");
    }
    if (refs.rows() != queries.rows() || refs.cols() != 2) {
        throw ShapeError("deformable_cross_attention: refs must be N x 2");
    }
    const Index n = queries.rows();
    const Index hk = static_cast<Index>(cfg.num_heads) * cfg.num_points;

    Mat<T> cell(1, 2 * hk);
    for (Index s = 0; s < hk; ++s) {
        cell(0, 2 * s) = T(1) / T(width);
        cell(0, 2 * s + 1) = T(1) / T(height);
    }
    const Tensor<T> offsets = ops::mul_row(offset_proj.forward(queries), Tensor<T>(cell));
    DeformableResult<T> r;
    r.locations = ops::add(ops::tile_cols(refs, hk), offsets);

    const Tensor<T> logits = ops::reshape(weight_proj.forward(queries), n * cfg.num_heads,
                                          static_cast<Index>(cfg.num_points));
    r.weights = ops::reshape(ops::softmax_rows(logits), n, hk);

    const Tensor<T> value = value_proj.forward(value_map);
    const Tensor<T> gathered =
        ops::deformable_gather(value, height, width, cfg.num_heads, r.locations, r.weights);
    r.output = out_proj.forward(gathered);
    return r;
}

template <typename T>
Conv2d<T>::Conv2d(ParamSet<T>& params, const std::string& name, int in_ch, int out_ch, int k, int s,
                  int p, InitRng& rng)
    : kernel(k), stride(s), pad(p) {
    const double fan_in = static_cast<double>(k) * k * in_ch;
    const double bound = std::sqrt(6.0 / fan_in);  // He-uniform for ReLU stacks
    weight = params.create(name + ".weight",
                           rng.uniform_matrix<T>(static_cast<Index>(k) * k * in_ch, out_ch, bound));
    bias = params.create(name + ".bias", Mat<T>::Zero(1, out_ch));
}

template <typename T>
typename Conv2d<T>::Output Conv2d<T>::forward(const Tensor<T>& x, int height, int width) const {
    const Tensor<T> cols = ops::im2col(x, height, width, kernel, stride, pad);
    Output out;
    out.height = (height + 2 * pad - kernel) / stride + 1;
    out.width = (width + 2 * pad - kernel) / stride + 1;
    out.values = ops::add_row(ops::matmul(cols, weight), bias);
    return out;
}

template class ParamSet<float>;
template class ParamSet<double>;
template class Linear<float>;
template class Linear<double>;
template class LayerNorm<float>;
template class LayerNorm<double>;
template class FeedForward<float>;
template class FeedForward<double>;
template class MultiHeadAttention<float>;
template class MultiHeadAttention<double>;
template class DeformableCrossAttention<float>;
template class DeformableCrossAttention<double>;
template class Conv2d<float>;
template class Conv2d<double>;

}  // namespace eltrack
