#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eltrack/config.hpp"
#include "eltrack/ensemble.hpp"
#include "eltrack/model.hpp"
#include "eltrack/synthetic.hpp"

namespace eltrack {

struct Assignment {
    std::optional<int> tracker;  // matched tracker index
    std::vector<double> costs;   // per-candidate matching cost
};

/// lambda_cls*(-s) + lambda_l1*L1 + lambda_iou*(1-GIoU) + lambda_r*|p - p_gt|_1
double matching_cost(const Candidate& cand, const GroundTruth& gt, const Point2& reference, const LossWeights& w);

/// Bipartite matching of the candidates against the single ground truth.
/// Throws when the target is absent.
Assignment hungarian_match(std::span<const Candidate> candidates, const GroundTruth& gt,
                           std::span<const Point2> references, const LossWeights& w);

/// What the losses need from one testing frame.
template <typename T>
struct FrameTerms {
    Tensor<T> scores;  // (N x 1)
    Tensor<T> boxes;   // (N x 4)
    Tensor<T> cosine;  // (N x 1)
    GroundTruth gt;
    std::optional<int> matched;
};

/// Mean over frames of: sum_i lambda_cls*focal(s_i, [i == matched]) plus, on
/// the matched candidate, lambda_l1*L1 + lambda_iou*(1-GIoU).
template <typename T>
Tensor<T> sequence_loss(std::span<const FrameTerms<T>> frames, const LossWeights& w);

/// Candidates overlapping the ground truth less than this are negatives.
inline constexpr double kSimilarityNegativeIou = 0.3;

/// lambda_sim * [(1 - mean matched cos) + mean relu(cos) over negatives].
/// Negatives are every candidate of an absent frame and unmatched candidates
/// whose box barely overlaps the target. Trains the confidence embedding to
/// separate the target from distractors.
template <typename T>
Tensor<T> similarity_loss(std::span<const FrameTerms<T>> frames, const LossWeights& w);

/// Template frame plus consecutive testing frames of one sequence.
struct TrainingSample {
    Image template_frame;
    BBox template_box;
    std::vector<Image> frames;
    std::vector<GroundTruth> labels;

    int length() const { return 1 + static_cast<int>(frames.size()); }
};

template <typename T>
struct UnrolledLoss {
    Tensor<T> sequence;
    Tensor<T> similarity;
    Tensor<T> total;
    std::vector<std::optional<int>> matches;
};

/// Forward pass through the testing frames with training-time activation:
/// the matched tracker of frame t carries its box centre and a TCA query into
/// frame t+1; absent frames reset every tracker. Nothing is detached.
template <typename T>
UnrolledLoss<T> unroll_sequence(const TrackerModel<T>& model, const TrainingSample& sample, const LossWeights& w);

/// Decoupled-weight-decay Adam with global gradient-norm clipping.
class AdamW {
public:
    AdamW(double weight_decay, double grad_clip, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    /// Returns the pre-clip gradient norm.
    double step(ParamSet<float>& params, double learning_rate);
    long steps() const { return t_; }

private:
    double weight_decay_, grad_clip_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Mat<float>> m_, v_;
};

/// Draws training clips from a fixed set of seeded synthetic sequences.
class ClipSampler {
public:
    ClipSampler(const WorldConfig& world, int num_sequences, std::uint64_t seed, int max_frame_gap);

    /// Sample of total length `length` from sequence `index`.
    TrainingSample sample(int index, int length, std::uint64_t draw_seed) const;
    int size() const { return static_cast<int>(plans_.size()); }
    const SequencePlan& plan(int i) const { return plans_.at(static_cast<std::size_t>(i)); }

private:
    std::vector<SequencePlan> plans_;
    int max_frame_gap_;
};

struct StepResult {
    int length = 0;
    double loss = 0.0;           // optimized objective
    double sequence_loss = 0.0;  // without the similarity term
    double grad_norm = 0.0;
};

struct LogEntry {
    long step = 0;
    int epoch = 0;
    int length = 0;
    double loss = 0.0;
    double sequence_loss = 0.0;
};

struct EpochSummary {
    int epoch = 0;
    int length = 0;
    double mean_loss = 0.0;
    double mean_sequence_loss = 0.0;
};

class Trainer {
public:
    Trainer(TrackerModel<float>& model, const Config& cfg);

    /// One optimizer step on one sample. Throws on a non-finite loss
    /// without touching the parameters.
    StepResult train_step(const TrainingSample& sample, int epoch);

    /// One optimizer step on the mean loss of several samples; gradients are
    /// accumulated sample by sample. The result reports mean losses.
    StepResult train_batch(std::span<const TrainingSample> batch, int epoch);

    /// One pass over every training sequence at the curriculum length, in
    /// steps of batch_size samples.
    EpochSummary run_epoch(int epoch, const std::function<void(const LogEntry&)>& log = {});

    double learning_rate(int epoch) const;
    const ClipSampler& sampler() const { return sampler_; }

private:
    TrackerModel<float>& model_;
    Config cfg_;
    AdamW optimizer_;
    ClipSampler sampler_;
};

/// Channel statistics of the first frames of a sampler's sequences.
NormStats estimate_norm_stats(const ClipSampler& sampler, int max_sequences = 8);

/// "step,epoch,length,loss,sequence_loss"
std::string format_log_entry(const LogEntry& e);

}  // namespace eltrack
