#pragma once

#include <array>
#include <vector>

#include "eltrack/geometry.hpp"
#include "eltrack/image.hpp"
#include "eltrack/layers.hpp"

namespace eltrack {

inline constexpr int kFeatureStride = 16;

/// (H*W x channels) activations with their spatial extent.
template <typename T>
struct FeatureMap {
    Tensor<T> values;
    int height = 0;
    int width = 0;
    int stride = kFeatureStride;

    Index channels() const { return values.cols(); }
    Index cells() const { return static_cast<Index>(height) * width; }
};

/// Per-channel normalization statistics (8-bit RGB scale).
struct NormStats {
    std::array<double, 3> mean{127.5, 127.5, 127.5};
    std::array<double, 3> std{64.0, 64.0, 64.0};
};

template <typename T>
struct TemplateBundle {
    Image image;                // template_size x template_size crop
    FeatureMap<T> features;     // reduced template features
    Tensor<T> pooled;           // (1 x c), unit L2 norm
};

/// Square crop of side 2*sqrt(w*h) pixels centred on gt, padded with the
/// frame's channel means and resized to out_size. The target covers a
/// quarter of the crop area.
Image crop_template(const Image& frame, const BBox& gt, int out_size = 128);

/// Normalized (H*W x 3) tensor from an RGB image.
template <typename T>
Tensor<T> image_to_tensor(const Image& img, const NormStats& stats);

/// Fixed 2-D sinusoidal encoding for an H x W grid, (H*W x c). The first
/// c/2 channels encode y and the rest x; frequencies are geometric between
/// pi and 16*pi over normalized coordinates.
template <typename T>
Mat<T> positional_encoding(int height, int width, int channels);

/// Four stride-2 3x3 conv blocks (total stride 16) then a learned 1x1
/// reduction from C to c channels.
template <typename T>
class Backbone {
public:
    Backbone() = default;
    Backbone(ParamSet<T>& params, int base_width, int backbone_dim, int embed_dim, InitRng& rng);

    /// Raw C-channel backbone output.
    FeatureMap<T> backbone_features(const Tensor<T>& image, int height, int width) const;
    FeatureMap<T> reduce(const FeatureMap<T>& raw) const;
    FeatureMap<T> forward(const Tensor<T>& image, int height, int width) const {
        return reduce(backbone_features(image, height, width));
    }

    std::vector<Conv2d<T>> blocks;
    Linear<T> reduction;
};

template <typename T>
struct EncoderLayer {
    LayerNorm<T> ln_attn;
    MultiHeadAttention<T> attn;
    LayerNorm<T> ln_ffn;
    FeedForward<T> ffn;
};

/// Pre-norm self-attention encoder over [template tokens ; search tokens].
/// Returns only the search tokens reshaped to the search grid.
template <typename T>
class FusionEncoder {
public:
    FusionEncoder() = default;
    FusionEncoder(ParamSet<T>& params, const AttentionConfig& cfg, int layers, int ffn_dim, InitRng& rng);

    FeatureMap<T> forward(const FeatureMap<T>& template_feat, const FeatureMap<T>& search_feat) const;

    /// Number of tokens entering the first layer.
    static Index token_count(const FeatureMap<T>& template_feat, const FeatureMap<T>& search_feat) {
        return template_feat.cells() + search_feat.cells();
    }

    std::vector<EncoderLayer<T>> layers;
    LayerNorm<T> final_ln;
    Tensor<T> segment_embedding;  // (2 x c): row 0 template, row 1 search
};

/// Template representative for cosine similarity: mean of the template cells
/// over the target's central region, projected and L2-normalized.
template <typename T>
class TemplatePooler {
public:
    TemplatePooler() = default;
    TemplatePooler(ParamSet<T>& params, int embed_dim, InitRng& rng);

    Tensor<T> forward(const FeatureMap<T>& template_feat) const;

    /// Row indices of the cells whose centres fall in the central half.
    static std::vector<Index> central_cells(int height, int width);

    Linear<T> projection;
};

}  // namespace eltrack
