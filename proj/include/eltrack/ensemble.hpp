#pragma once

#include <optional>
#include <vector>

#include "eltrack/features.hpp"
#include "eltrack/geometry.hpp"
#include "eltrack/layers.hpp"

namespace eltrack {

/// One prediction of one local tracker.
struct Candidate {
    int tracker_id = 0;
    double score = 0.0;       // classification score s in [0,1]
    BBox box;                 // absolute normalized box
    double cosine = 0.0;      // cos(candidate vector, template vector)
    double confidence = 0.0;  // score * max(0, cosine)
};

inline double candidate_confidence(double score, double cosine) {
    return score * (cosine > 0.0 ? cosine : 0.0);
}

template <typename T>
struct DecoderLayer {
    LayerNorm<T> ln_self;
    MultiHeadAttention<T> self_attn;
    LayerNorm<T> ln_cross;
    DeformableCrossAttention<T> cross_attn;
    LayerNorm<T> ln_ffn;
    FeedForward<T> ffn;
};

template <typename T>
struct DecodeOutput {
    Tensor<T> embeddings;  // (N x c), tracker order
    // Per layer: (N x heads*K*2) normalized sample positions and weights.
    std::vector<Tensor<T>> sample_locations;
    std::vector<Tensor<T>> sample_weights;
};

/// The ensemble of local trackers: N learned target queries whose default
/// reference positions come from a linear layer plus sigmoid. Each layer runs
/// self-attention over all queries jointly, then deformable cross-attention
/// on the encoded search features around every tracker's reference. The
/// reference stays fixed across layers.
template <typename T>
class EnsembleDecoder {
public:
    EnsembleDecoder() = default;
    EnsembleDecoder(ParamSet<T>& params, const AttentionConfig& cfg, int num_trackers, int layers,
                    int ffn_dim, InitRng& rng);

    /// sigmoid(linear(q)) for every offline query, (N x 2).
    Tensor<T> default_references() const;

    /// queries (N x c), refs (N x 2).
    DecodeOutput<T> decode(const Tensor<T>& queries, const Tensor<T>& refs, const FeatureMap<T>& encoded) const;

    int num_trackers() const { return static_cast<int>(offline_queries.rows()); }

    Tensor<T> offline_queries;  // (N x c)
    Linear<T> ref_head;         // c -> 2
    std::vector<DecoderLayer<T>> layers;
    LayerNorm<T> final_ln;
};

template <typename T>
struct HeadOutput {
    Tensor<T> scores;   // (N x 1), sigmoid
    Tensor<T> boxes;    // (N x 4), sigmoid cx,cy,w,h
    Tensor<T> vectors;  // (N x c), unit-norm candidate vectors
    Tensor<T> cosine;   // (N x 1)
};

/// DETR-style head: linear+sigmoid class score, 3-layer box MLP with sigmoid
/// output, and a projected candidate vector compared to the template. The
/// box is absolute; its centre logits are offset by logit(reference).
template <typename T>
class PredictionHead {
public:
    PredictionHead() = default;
    PredictionHead(ParamSet<T>& params, int embed_dim, InitRng& rng);

    /// refs (N x 2) are the references the embeddings were decoded around.
    HeadOutput<T> forward(const Tensor<T>& embeddings, const Tensor<T>& template_vector,
                          const Tensor<T>& refs) const;

    Linear<T> cls;
    Linear<T> box1;
    Linear<T> box2;
    Linear<T> box3;
    Linear<T> embed_proj;
};

/// Converts head output to candidates; box fields are clamped to the frame.
template <typename T>
std::vector<Candidate> make_candidates(const HeadOutput<T>& out);

}  // namespace eltrack
