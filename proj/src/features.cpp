#include "eltrack/features.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace eltrack {

Image crop_template(const Image& frame, const BBox& gt, int out_size) {
    if (frame.empty()) {
        throw ValidationError("crop_template: empty frame");
    }
    const double w_px = gt.w() * frame.width;
    const double h_px = gt.h() * frame.height;
    if (!(w_px > 0.0) || !(h_px > 0.0)) {
        throw ValidationError("crop_template: degenerate target box");
    }
    const double side = 2.0 * std::sqrt(w_px * h_px);
    const double cx = gt.cx() * frame.width;
    const double cy = gt.cy() * frame.height;
    return crop_resize_square(frame, cx - 0.5 * side, cy - 0.5 * side, side, out_size, channel_means(frame));
}

template <typename T>
Tensor<T> image_to_tensor(const Image& img, const NormStats& stats) {
    if (img.empty()) {
        throw ValidationError("image_to_tensor: empty image");
    }
    Mat<T> m(static_cast<Index>(img.width) * img.height, 3);
    for (Index i = 0; i < m.rows(); ++i) {
        for (int c = 0; c < 3; ++c) {
            m(i, c) = static_cast<T>((img.pixels[static_cast<std::size_t>(i) * 3 + c] - stats.mean[c]) /
                                     stats.std[c]);
        }
    }
    return Tensor<T>(std::move(m));
}

template <typename T>
Mat<T> positional_encoding(int height, int width, int channels) {
    const int half = channels / 2;
    const int freqs = half / 2;
    Mat<T> pe(static_cast<Index>(height) * width, channels);
    pe.setZero();
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const Index row = static_cast<Index>(y) * width + x;
            const double coords[2] = {(y + 0.5) / height, (x + 0.5) / width};
            for (int axis = 0; axis < 2; ++axis) {
                for (int f = 0; f < freqs; ++f) {
                    const double ratio = freqs > 1 ? static_cast<double>(f) / (freqs - 1) : 0.0;
                    const double freq = std::numbers::pi * std::pow(16.0, ratio);
                    pe(row, axis * half + 2 * f) = static_cast<T>(std::sin(coords[axis] * freq));
                    pe(row, axis * half + 2 * f + 1) = static_cast<T>(std::cos(coords[axis] * freq));
                }
            }
        }
    }
    return pe;
}

template <typename T>
Backbone<T>::Backbone(ParamSet<T>& params, int base_width, int backbone_dim, int embed_dim, InitRng& rng) {
    const int widths[5] = {3, base_width, 2 * base_width, 4 * base_width, backbone_dim};
    for (int i = 0; i < 4; ++i) {
        blocks.emplace_back(params, "backbone.conv" + std::to_string(i), widths[i], widths[i + 1], 3, 2, 1, rng);
    }
    reduction = Linear<T>(params, "backbone.reduce", backbone_dim, embed_dim, rng);
}

template <typename T>
FeatureMap<T> Backbone<T>::backbone_features(const Tensor<T>& image, int height, int width) const {
    if (height < kFeatureStride || width < kFeatureStride) {
        throw ValidationError("extract_and_reduce: image smaller than one stride");
    }
    Tensor<T> x = image;
    int h = height;
    int w = width;
    for (const auto& block : blocks) {
        auto out = block.forward(x, h, w);
        x = ops::relu(out.values);
        h = out.height;
        w = out.width;
    }
    return FeatureMap<T>{x, h, w, kFeatureStride};
}

template <typename T>
FeatureMap<T> Backbone<T>::reduce(const FeatureMap<T>& raw) const {
    return FeatureMap<T>{reduction.forward(raw.values), raw.height, raw.width, raw.stride};
}

template <typename T>
FusionEncoder<T>::FusionEncoder(ParamSet<T>& params, const AttentionConfig& cfg, int n_layers, int ffn_dim,
                                InitRng& rng) {
    for (int i = 0; i < n_layers; ++i) {
        const std::string p = "encoder.layer" + std::to_string(i);
        EncoderLayer<T> layer;
        layer.ln_attn = LayerNorm<T>(params, p + ".ln_attn", cfg.embed_dim);
        layer.attn = MultiHeadAttention<T>(params, p + ".attn", cfg, rng);
        layer.ln_ffn = LayerNorm<T>(params, p + ".ln_ffn", cfg.embed_dim);
        layer.ffn = FeedForward<T>(params, p + ".ffn", cfg.embed_dim, ffn_dim, rng);
        layers.push_back(std::move(layer));
    }
    final_ln = LayerNorm<T>(params, "encoder.final_ln", cfg.embed_dim);
    segment_embedding = params.create("encoder.segment", Mat<T>::Zero(2, cfg.embed_dim));
}

template <typename T>
FeatureMap<T> FusionEncoder<T>::forward(const FeatureMap<T>& tmpl, const FeatureMap<T>& search) const {
    if (tmpl.channels() != search.channels()) {
        throw ShapeError("fuse_encode: template and search channel counts differ");
    }
    const int c = static_cast<int>(search.channels());
    const Tensor<T> tmpl_pos(positional_encoding<T>(tmpl.height, tmpl.width, c));
    const Tensor<T> search_pos(positional_encoding<T>(search.height, search.width, c));
    const Tensor<T> tmpl_tokens =
        ops::add_row(ops::add(tmpl.values, tmpl_pos), ops::slice_rows(segment_embedding, 0, 1));
    const Tensor<T> search_tokens =
        ops::add_row(ops::add(search.values, search_pos), ops::slice_rows(segment_embedding, 1, 1));
    const Tensor<T> parts[2] = {tmpl_tokens, search_tokens};
    Tensor<T> x = ops::concat_rows<T>(parts);

    for (const auto& layer : layers) {
        const Tensor<T> normed = layer.ln_attn.forward(x);
        x = ops::add(x, layer.attn.forward(normed, normed).output);
        x = ops::add(x, layer.ffn.forward(layer.ln_ffn.forward(x)));
    }
    if (!layers.empty()) {
        x = final_ln.forward(x);
    }
    return FeatureMap<T>{ops::slice_rows(x, tmpl.cells(), search.cells()), search.height, search.width,
                         search.stride};
}

template <typename T>
TemplatePooler<T>::TemplatePooler(ParamSet<T>& params, int embed_dim, InitRng& rng)
    : projection(params, "template.proj", embed_dim, embed_dim, rng) {}

template <typename T>
std::vector<Index> TemplatePooler<T>::central_cells(int height, int width) {
    std::vector<Index> rows;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double cy = (y + 0.5) / height;
            const double cx = (x + 0.5) / width;
            if (cy > 0.25 && cy < 0.75 && cx > 0.25 && cx < 0.75) {
                rows.push_back(static_cast<Index>(y) * width + x);
            }
        }
    }
    if (rows.empty()) {
        // Tiny grids: fall back to the centre cell.
        rows.push_back(static_cast<Index>(height / 2) * width + width / 2);
    }
    return rows;
}

template <typename T>
Tensor<T> TemplatePooler<T>::forward(const FeatureMap<T>& tmpl) const {
    const auto rows = central_cells(tmpl.height, tmpl.width);
    const Tensor<T> cells = ops::gather_rows(tmpl.values, std::span<const Index>(rows));
    Mat<T> avg = Mat<T>::Constant(1, static_cast<Index>(rows.size()), T(1) / static_cast<T>(rows.size()));
    const Tensor<T> pooled = ops::matmul(Tensor<T>(std::move(avg)), cells);
    return ops::l2_normalize_rows(projection.forward(pooled));
}

template Tensor<float> image_to_tensor(const Image&, const NormStats&);
template Tensor<double> image_to_tensor(const Image&, const NormStats&);
template Mat<float> positional_encoding(int, int, int);
template Mat<double> positional_encoding(int, int, int);
template class Backbone<float>;
template class Backbone<double>;
template class FusionEncoder<float>;
template class FusionEncoder<double>;
template class TemplatePooler<float>;
template class TemplatePooler<double>;

}  // namespace eltrack
