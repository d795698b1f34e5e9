#include "eltrack/ensemble.hpp"

#include <cmath>
#include <string>

namespace eltrack {

template <typename T>
EnsembleDecoder<T>::EnsembleDecoder(ParamSet<T>& params, const AttentionConfig& cfg, int num_trackers,
                                    int n_layers, int ffn_dim, InitRng& rng) {
    if (num_trackers < 1) {
        throw ValidationError("decoder: need at least one local tracker");
    }
    offline_queries = params.create("decoder.queries", rng.uniform_matrix<T>(num_trackers, cfg.embed_dim, 1.0));
    ref_head = Linear<T>(params, "decoder.ref_head", cfg.embed_dim, 2, rng);
    for (int i = 0; i < n_layers; ++i) {
        const std::string p = "decoder.layer" + std::to_string(i);
        DecoderLayer<T> layer;
        layer.ln_self = LayerNorm<T>(params, p + ".ln_self", cfg.embed_dim);
        layer.self_attn = MultiHeadAttention<T>(params, p + ".self_attn", cfg, rng);
        layer.ln_cross = LayerNorm<T>(params, p + ".ln_cross", cfg.embed_dim);
        layer.cross_attn = DeformableCrossAttention<T>(params, p + ".cross_attn", cfg, rng);
        layer.ln_ffn = LayerNorm<T>(params, p + ".ln_ffn", cfg.embed_dim);
        layer.ffn = FeedForward<T>(params, p + ".ffn", cfg.embed_dim, ffn_dim, rng);
        layers.push_back(std::move(layer));
    }
    final_ln = LayerNorm<T>(params, "decoder.final_ln", cfg.embed_dim);
}

template <typename T>
Tensor<T> EnsembleDecoder<T>::default_references() const {
    return ops::sigmoid(ref_head.forward(offline_queries));
}

template <typename T>
DecodeOutput<T> EnsembleDecoder<T>::decode(const Tensor<T>& queries, const Tensor<T>& refs,
                                           const FeatureMap<T>& encoded) const {
    if (queries.rows() == 0) {
        throw ShapeError("decode_ensemble: no local trackers");
    }
    if (refs.rows() != queries.rows()) {
        throw ShapeError("decode_ensemble: one reference per query required");
    }
    DecodeOutput<T> out;
    Tensor<T> x = queries;
    for (const auto& layer : layers) {
        const Tensor<T> normed = layer.ln_self.forward(x);
        x = ops::add(x, layer.self_attn.forward(normed, normed).output);
        const auto cross = layer.cross_attn.forward(layer.ln_cross.forward(x), refs, encoded.values,
                                                    encoded.height, encoded.width);
        x = ops::add(x, cross.output);
        out.sample_locations.push_back(cross.locations);
        out.sample_weights.push_back(cross.weights);
        x = ops::add(x, layer.ffn.forward(layer.ln_ffn.forward(x)));
    }
    out.embeddings = final_ln.forward(x);
    return out;
}

template <typename T>
PredictionHead<T>::PredictionHead(ParamSet<T>& params, int c, InitRng& rng)
    : cls(params, "head.cls", c, 1, rng),
      box1(params, "head.box1", c, c, rng),
      box2(params, "head.box2", c, c, rng),
      box3(params, "head.box3", c, 4, rng),
      embed_proj(params, "head.embed", c, c, rng) {
    // Score prior 0.1; boxes start near 12% of the frame.
    cls.bias.mutable_value().setConstant(static_cast<T>(-std::log(9.0)));
    box3.weight.mutable_value() *= T(0.1);
    Mat<T>& b = box3.bias.mutable_value();
    b(0, 2) = b(0, 3) = static_cast<T>(std::log(0.12 / 0.88));
}

template <typename T>
HeadOutput<T> PredictionHead<T>::forward(const Tensor<T>& e, const Tensor<T>& template_vector,
                                         const Tensor<T>& refs) const {
    if (refs.rows() != e.rows() || refs.cols() != 2) {
        throw ShapeError("prediction_head: one reference per embedding required");
    }
    HeadOutput<T> out;
    out.scores = ops::sigmoid(cls.forward(e));
    const Tensor<T> h1 = ops::relu(box1.forward(e));
    const Tensor<T> h2 = ops::relu(box2.forward(h1));
    // Centre logits are offsets from the tracker's reference.
    const std::vector<Tensor<T>> prior{ops::logit(refs), Tensor<T>::zeros(e.rows(), 2)};
    out.boxes = ops::sigmoid(ops::add(box3.forward(h2), ops::concat_cols<T>(prior)));
    out.vectors = ops::l2_normalize_rows(embed_proj.forward(e));
    out.cosine = ops::matmul_bt(out.vectors, template_vector);
    return out;
}

template <typename T>
std::vector<Candidate> make_candidates(const HeadOutput<T>& out) {
    std::vector<Candidate> cands;
    const Index n = out.scores.rows();
    cands.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        Candidate c;
        c.tracker_id = static_cast<int>(i);
        c.score = static_cast<double>(out.scores.value()(i, 0));
        const auto& b = out.boxes.value();
        c.box = BBox::from_center(b(i, 0), b(i, 1), b(i, 2), b(i, 3));
        c.cosine = std::clamp(static_cast<double>(out.cosine.value()(i, 0)), -1.0, 1.0);
        c.confidence = candidate_confidence(c.score, c.cosine);
        cands.push_back(c);
    }
    return cands;
}

template class EnsembleDecoder<float>;
template class EnsembleDecoder<double>;
template class PredictionHead<float>;
template class PredictionHead<double>;
template std::vector<Candidate> make_candidates(const HeadOutput<float>&);
template std::vector<Candidate> make_candidates(const HeadOutput<double>&);

}  // namespace eltrack
