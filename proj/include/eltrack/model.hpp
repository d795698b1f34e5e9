#pragma once

#include <vector>

#include "eltrack/config.hpp"
#include "eltrack/ensemble.hpp"
#include "eltrack/features.hpp"
#include "eltrack/temporal.hpp"

namespace eltrack {

/// One ensemble member with its per-sequence state.
template <typename T>
struct LocalTracker {
    int id = 0;
    Point2 default_reference;
    Tensor<T> default_reference_tensor;  // (1 x 2)
    Point2 reference;                    // current reference
    Tensor<T> reference_tensor;          // (1 x 2) as fed to the decoder
    Tensor<T> online_query;              // (1 x c), undefined unless activated
    QueryMemory<T> memory;
    bool activated = false;

    bool has_online_query() const { return online_query.defined(); }

    void set_reference(const Point2& p) {
        Mat<T> m(1, 2);
        m << static_cast<T>(p.x), static_cast<T>(p.y);
        reference = p;
        reference_tensor = Tensor<T>(std::move(m));
    }
    /// Differentiable reference (training); the point mirrors its value.
    void set_reference(const Tensor<T>& t) {
        reference_tensor = t;
        reference = {static_cast<double>(t.value()(0, 0)), static_cast<double>(t.value()(0, 1))};
    }

    /// Back to the default reference and offline query; memory cleared.
    void reset() {
        reference = default_reference;
        reference_tensor = default_reference_tensor;
        online_query = Tensor<T>();
        memory.clear();
        activated = false;
    }
};

template <typename T>
struct FrameOutput {
    DecodeOutput<T> decoded;
    HeadOutput<T> head;
};

/// Every learnable module of the tracker plus normalization statistics.
template <typename T>
class TrackerModel {
public:
    explicit TrackerModel(const ModelConfig& cfg);
    TrackerModel(const TrackerModel&) = delete;
    TrackerModel& operator=(const TrackerModel&) = delete;

    const ModelConfig& config() const { return cfg_; }
    ParamSet<T>& params() { return params_; }
    const ParamSet<T>& params() const { return params_; }
    std::size_t parameter_count() const;

    /// Search image resized to the configured search size, normalized.
    Tensor<T> prepare_frame(const Image& frame) const;
    TemplateBundle<T> build_template(const Image& first_frame, const BBox& gt) const;
    FeatureMap<T> extract_and_reduce(const Tensor<T>& image, int height, int width) const;
    FeatureMap<T> encode(const TemplateBundle<T>& tmpl, const FeatureMap<T>& search) const;

    /// Trackers at default state (N of them, fresh memories).
    std::vector<LocalTracker<T>> make_trackers() const;

    /// Full per-frame forward: backbone, fusion, ensemble decoding, head.
    FrameOutput<T> forward_frame(const TemplateBundle<T>& tmpl, const Image& frame,
                                 const std::vector<LocalTracker<T>>& trackers) const;
    FrameOutput<T> forward_features(const TemplateBundle<T>& tmpl, const FeatureMap<T>& search,
                                    const std::vector<LocalTracker<T>>& trackers) const;

    /// Copies parameter values by name from a model of the same layout.
    template <typename U>
    void copy_parameters_from(const TrackerModel<U>& other);

    NormStats norm_stats;
    Backbone<T> backbone;
    FusionEncoder<T> encoder;
    TemplatePooler<T> pooler;
    EnsembleDecoder<T> decoder;
    PredictionHead<T> head;
    TcaModel<T> tca;

private:
    ModelConfig cfg_;
    ParamSet<T> params_;
};

inline AttentionConfig attention_config(const ModelConfig& cfg) {
    return AttentionConfig{cfg.embed_dim, cfg.heads, cfg.points};
}

template <typename T>
template <typename U>
void TrackerModel<T>::copy_parameters_from(const TrackerModel<U>& other) {
    const auto& src = other.params().items();
    auto& dst = params_.items();
    if (src.size() != dst.size()) {
        throw ValidationError("parameter layouts differ");
    }
    for (std::size_t i = 0; i < dst.size(); ++i) {
        if (src[i].first != dst[i].first || src[i].second.rows() != dst[i].second.rows() ||
            src[i].second.cols() != dst[i].second.cols()) {
            throw ValidationError("parameter layouts differ at " + dst[i].first);
        }
        Tensor<T> t = dst[i].second;
        t.mutable_value() = src[i].second.value().template cast<T>();
    }
    norm_stats = other.norm_stats;
}

}  // namespace eltrack
