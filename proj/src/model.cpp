#include "eltrack/model.hpp"

namespace eltrack {

template <typename T>
TrackerModel<T>::TrackerModel(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const AttentionConfig att = attention_config(cfg_);
    att.validate();
    const int ffn_dim = cfg_.ffn_mult * cfg_.embed_dim;
    InitRng rng(cfg_.seed);
    backbone = Backbone<T>(params_, cfg_.backbone_width, cfg_.backbone_dim, cfg_.embed_dim, rng);
    encoder = FusionEncoder<T>(params_, att, cfg_.encoder_layers, ffn_dim, rng);
    pooler = TemplatePooler<T>(params_, cfg_.embed_dim, rng);
    decoder = EnsembleDecoder<T>(params_, att, cfg_.num_trackers, cfg_.decoder_layers, ffn_dim, rng);
    head = PredictionHead<T>(params_, cfg_.embed_dim, rng);
    tca = TcaModel<T>(params_, att, ffn_dim, rng);
}

template <typename T>
std::size_t TrackerModel<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params_.items()) {
        n += static_cast<std::size_t>(t.size());
    }
    return n;
}

template <typename T>
Tensor<T> TrackerModel<T>::prepare_frame(const Image& frame) const {
    if (frame.width == cfg_.search_width && frame.height == cfg_.search_height) {
        return image_to_tensor<T>(frame, norm_stats);
    }
    return image_to_tensor<T>(resize_bilinear(frame, cfg_.search_width, cfg_.search_height), norm_stats);
}

template <typename T>
TemplateBundle<T> TrackerModel<T>::build_template(const Image& first_frame, const BBox& gt) const {
    TemplateBundle<T> bundle;
    bundle.image = crop_template(first_frame, gt, cfg_.template_size);
    bundle.features = extract_and_reduce(image_to_tensor<T>(bundle.image, norm_stats), cfg_.template_size,
                                         cfg_.template_size);
    bundle.pooled = pooler.forward(bundle.features);
    return bundle;
}

template <typename T>
FeatureMap<T> TrackerModel<T>::extract_and_reduce(const Tensor<T>& image, int height, int width) const {
    return backbone.forward(image, height, width);
}

template <typename T>
FeatureMap<T> TrackerModel<T>::encode(const TemplateBundle<T>& tmpl, const FeatureMap<T>& search) const {
    return encoder.forward(tmpl.features, search);
}

template <typename T>
std::vector<LocalTracker<T>> TrackerModel<T>::make_trackers() const {
    const Tensor<T> refs = decoder.default_references();
    std::vector<LocalTracker<T>> trackers;
    trackers.reserve(static_cast<std::size_t>(cfg_.num_trackers));
    for (int i = 0; i < cfg_.num_trackers; ++i) {
        LocalTracker<T> t;
        t.id = i;
        t.default_reference_tensor = ops::slice_rows(refs, i, 1);
        t.default_reference = {static_cast<double>(refs.value()(i, 0)), static_cast<double>(refs.value()(i, 1))};
        t.memory = QueryMemory<T>(cfg_.memory_length);
        t.reset();
        trackers.push_back(std::move(t));
    }
    return trackers;
}

template <typename T>
FrameOutput<T> TrackerModel<T>::forward_features(const TemplateBundle<T>& tmpl, const FeatureMap<T>& search,
                                                 const std::vector<LocalTracker<T>>& trackers) const {
    if (trackers.empty()) {
        throw ValidationError("decode_ensemble: no local trackers");
    }
    std::vector<Tensor<T>> queries;
    std::vector<Tensor<T>> refs;
    for (const auto& t : trackers) {
        queries.push_back(t.has_online_query() ? t.online_query
                                               : ops::slice_rows(decoder.offline_queries, t.id, 1));
        refs.push_back(t.reference_tensor);
    }
    const FeatureMap<T> encoded = encode(tmpl, search);
    FrameOutput<T> out;
    const Tensor<T> ref_stack = ops::concat_rows<T>(refs);
    out.decoded = decoder.decode(ops::concat_rows<T>(queries), ref_stack, encoded);
    out.head = head.forward(out.decoded.embeddings, tmpl.pooled, ref_stack);
    return out;
}

template <typename T>
FrameOutput<T> TrackerModel<T>::forward_frame(const TemplateBundle<T>& tmpl, const Image& frame,
                                              const std::vector<LocalTracker<T>>& trackers) const {
    const FeatureMap<T> search = extract_and_reduce(prepare_frame(frame), cfg_.search_height, cfg_.search_width);
    return forward_features(tmpl, search, trackers);
}

template class TrackerModel<float>;
template class TrackerModel<double>;

}  // namespace eltrack
