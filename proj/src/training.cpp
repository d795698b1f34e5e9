#include "eltrack/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "eltrack/hungarian.hpp"
#include "eltrack/losses.hpp"

namespace eltrack {

double matching_cost(const Candidate& cand, const GroundTruth& gt, const Point2& reference, const LossWeights& w) {
    const OverlapMetrics m = box_overlap_metrics(cand.box, gt.box);
    const double l1 = std::abs(cand.box.cx() - gt.box.cx()) + std::abs(cand.box.cy() - gt.box.cy()) +
                      std::abs(cand.box.w() - gt.box.w()) + std::abs(cand.box.h() - gt.box.h());
    return w.cls * -cand.score + w.l1 * l1 + w.iou * (1.0 - m.giou) + w.ref * l1_distance(reference, gt.center());
}

Assignment hungarian_match(std::span<const Candidate> candidates, const GroundTruth& gt,
                           std::span<const Point2> references, const LossWeights& w) {
    if (!gt.present) {
        throw ValidationError("hungarian_match: target absent, nothing to match");
    }
    if (candidates.empty() || candidates.size() != references.size()) {
        throw ValidationError("hungarian_match: need one reference per candidate");
    }
    Assignment out;
    CostMatrix cost(static_cast<Index>(candidates.size()), 1);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        out.costs.push_back(matching_cost(candidates[i], gt, references[i], w));
        cost(static_cast<Index>(i), 0) = out.costs.back();
    }
    const BipartiteAssignment a = solve_assignment(cost);
    for (std::size_t i = 0; i < a.row_to_col.size(); ++i) {
        if (a.row_to_col[i] == 0) out.tracker = static_cast<int>(i);
    }
    return out;
}

template <typename T>
Tensor<T> sequence_loss(std::span<const FrameTerms<T>> frames, const LossWeights& w) {
    if (frames.empty()) {
        throw ValidationError("sequence_loss: empty sequence");
    }
    std::vector<Tensor<T>> per_frame;
    for (const auto& f : frames) {
        const Index n = f.scores.rows();
        std::vector<int> labels(static_cast<std::size_t>(n), 0);
        if (f.matched) {
            if (!f.gt.present) throw ValidationError("sequence_loss: match on an absent frame");
            labels.at(static_cast<std::size_t>(*f.matched)) = 1;
        }
        Tensor<T> term = ops::scale(focal_loss_sum(f.scores, std::span<const int>(labels), w.focal_gamma,
                                                   std::optional<double>(w.focal_alpha)),
                                    static_cast<T>(w.cls));
        if (f.matched) {
            const Tensor<T> box = ops::slice_rows(f.boxes, *f.matched, 1);
            term = ops::add(term, ops::scale(box_l1_loss(box, f.gt.box), static_cast<T>(w.l1)));
            term = ops::add(term, ops::scale(giou_loss(box, f.gt.box), static_cast<T>(w.iou)));
        }
        per_frame.push_back(term);
    }
    return ops::scale(ops::sum(ops::concat_rows<T>(per_frame)), static_cast<T>(1.0 / frames.size()));
}

template <typename T>
Tensor<T> similarity_loss(std::span<const FrameTerms<T>> frames, const LossWeights& w) {
    std::vector<Tensor<T>> positives;
    std::vector<Tensor<T>> negatives;
    for (const auto& f : frames) {
        if (f.matched) {
            positives.push_back(ops::slice_rows(f.cosine, *f.matched, 1));
        }
        const Mat<T>& boxes = f.boxes.value();
        for (Index i = 0; i < boxes.rows(); ++i) {
            bool negative = !f.gt.present;
            if (f.gt.present && (!f.matched || *f.matched != static_cast<int>(i))) {
                const BBox b = BBox::from_center(boxes(i, 0), boxes(i, 1), boxes(i, 2), boxes(i, 3));
                negative = box_overlap_metrics(b, f.gt.box).iou < kSimilarityNegativeIou;
            }
            if (negative) {
                negatives.push_back(ops::slice_rows(f.cosine, i, 1));
            }
        }
    }
    if (w.similarity == 0.0 || (positives.empty() && negatives.empty())) {
        return Tensor<T>::scalar(T(0));
    }
    Tensor<T> total = Tensor<T>::scalar(T(0));
    if (!positives.empty()) {
        total = ops::add_scalar(ops::scale(ops::mean(ops::concat_rows<T>(positives)), T(-1)), T(1));
    }
    if (!negatives.empty()) {
        total = ops::add(total, ops::mean(ops::relu(ops::concat_rows<T>(negatives))));
    }
    return ops::scale(total, static_cast<T>(w.similarity));
}

template <typename T>
UnrolledLoss<T> unroll_sequence(const TrackerModel<T>& model, const TrainingSample& sample, const LossWeights& w) {
    if (sample.frames.empty() || sample.frames.size() != sample.labels.size()) {
        throw ValidationError("training sample needs labeled testing frames");
    }
    const TemplateBundle<T> tmpl = model.build_template(sample.template_frame, sample.template_box);
    std::vector<LocalTracker<T>> trackers = model.make_trackers();
    std::vector<FrameTerms<T>> terms;
    UnrolledLoss<T> out;
    for (std::size_t t = 0; t < sample.frames.size(); ++t) {
        const FrameOutput<T> fo = model.forward_frame(tmpl, sample.frames[t], trackers);
        FrameTerms<T> ft{fo.head.scores, fo.head.boxes, fo.head.cosine, sample.labels[t], std::nullopt};
        if (ft.gt.present) {
            const std::vector<Candidate> cands = make_candidates(fo.head);
            std::vector<Point2> refs;
            for (const auto& tr : trackers) refs.push_back(tr.reference);
            ft.matched = hungarian_match(cands, ft.gt, refs, w).tracker;
        }
        out.matches.push_back(ft.matched);
        terms.push_back(ft);

        if (t + 1 == sample.frames.size()) break;
        if (!ft.matched) {
            for (auto& tr : trackers) tr.reset();
            continue;
        }
        const int j = *ft.matched;
        for (auto& tr : trackers) {
            if (tr.id != j) tr.reset();
        }
        LocalTracker<T>& active = trackers[static_cast<std::size_t>(j)];
        const Tensor<T> embedding = ops::slice_rows(fo.decoded.embeddings, j, 1);
        active.online_query = model.tca.forward(embedding, active.memory);
        active.memory.push(active.online_query);
        active.set_reference(ops::slice_cols(ops::slice_rows(fo.head.boxes, j, 1), 0, 2));
        active.activated = true;
    }
    out.sequence = sequence_loss<T>(terms, w);
    out.similarity = similarity_loss<T>(terms, w);
    out.total = ops::add(out.sequence, out.similarity);
    return out;
}

AdamW::AdamW(double weight_decay, double grad_clip, double beta1, double beta2, double eps)
    : weight_decay_(weight_decay), grad_clip_(grad_clip), beta1_(beta1), beta2_(beta2), eps_(eps) {}

double AdamW::step(ParamSet<float>& params, double lr) {
    const auto& items = params.items();
    if (m_.empty()) {
        for (const auto& [name, p] : items) {
            m_.push_back(Mat<float>::Zero(p.rows(), p.cols()));
            v_.push_back(Mat<float>::Zero(p.rows(), p.cols()));
        }
    }
    double sq = 0.0;
    for (const auto& [name, p] : items) {
        if (p.has_grad()) sq += p.grad().template cast<double>().squaredNorm();
    }
    const double norm = std::sqrt(sq);
    const double clip = norm > grad_clip_ ? grad_clip_ / norm : 1.0;
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < items.size(); ++i) {
        Tensor<float> p = items[i].second;
        Mat<float>& value = p.mutable_value();
        value *= static_cast<float>(1.0 - lr * weight_decay_);
        if (!p.has_grad()) continue;
        const Mat<float> g = p.grad() * static_cast<float>(clip);
        m_[i] = static_cast<float>(beta1_) * m_[i] + static_cast<float>(1.0 - beta1_) * g;
        v_[i] = static_cast<float>(beta2_) * v_[i] + static_cast<float>(1.0 - beta2_) * g.cwiseProduct(g);
        const float step = static_cast<float>(lr / bc1);
        const float denom_scale = static_cast<float>(1.0 / std::sqrt(bc2));
        value.array() -= step * m_[i].array() / ((v_[i].array().sqrt() * denom_scale) + static_cast<float>(eps_));
    }
    return norm;
}

ClipSampler::ClipSampler(const WorldConfig& world, int num_sequences, std::uint64_t seed, int max_frame_gap)
    : max_frame_gap_(max_frame_gap) {
    for (int i = 0; i < num_sequences; ++i) {
        WorldConfig cfg = world;
        cfg.seed = sequence_seed(seed, i);
        plans_.push_back(plan_sequence(cfg));
    }
}

TrainingSample ClipSampler::sample(int index, int length, std::uint64_t draw_seed) const {
    const SequencePlan& plan = plans_.at(static_cast<std::size_t>(index));
    std::mt19937_64 rng(draw_seed);
    const int testing = length - 1;
    std::vector<int> gaps(static_cast<std::size_t>(testing));
    int span = 0;
    for (auto& g : gaps) {
        g = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_frame_gap_));
        span += g;
    }
    // Shrink gaps until the clip fits.
    for (std::size_t k = 0; span >= plan.length() && k < gaps.size(); ++k) {
        span -= gaps[k] - 1;
        gaps[k] = 1;
    }
    if (span >= plan.length()) {
        throw ValidationError("sequence too short for the requested sample length");
    }
    std::vector<int> starts;
    for (int s = 0; s + span < plan.length(); ++s) {
        if (plan.labels[static_cast<std::size_t>(s)].present) starts.push_back(s);
    }
    if (starts.empty()) {
        throw ValidationError("no present frame to take the template from");
    }
    int frame = starts[rng() % starts.size()];
    TrainingSample out;
    out.template_frame = render_frame(plan.cfg, plan.states[static_cast<std::size_t>(frame)]);
    out.template_box = plan.labels[static_cast<std::size_t>(frame)].box;
    for (int g : gaps) {
        frame += g;
        out.frames.push_back(render_frame(plan.cfg, plan.states[static_cast<std::size_t>(frame)]));
        out.labels.push_back(plan.labels[static_cast<std::size_t>(frame)]);
    }
    return out;
}

NormStats estimate_norm_stats(const ClipSampler& sampler, int max_sequences) {
    std::array<double, 3> sum{}, sq{};
    double count = 0.0;
    for (int i = 0; i < std::min(max_sequences, sampler.size()); ++i) {
        const SequencePlan& plan = sampler.plan(i);
        const Image img = render_frame(plan.cfg, plan.states.front());
        for (std::size_t p = 0; p < img.pixels.size(); p += 3) {
            for (int c = 0; c < 3; ++c) {
                const double v = img.pixels[p + c];
                sum[c] += v;
                sq[c] += v * v;
            }
        }
        count += static_cast<double>(img.pixels.size() / 3);
    }
    NormStats s;
    if (count == 0.0) return s;
    for (int c = 0; c < 3; ++c) {
        s.mean[c] = sum[c] / count;
        s.std[c] = std::max(1.0, std::sqrt(std::max(0.0, sq[c] / count - s.mean[c] * s.mean[c])));
    }
    return s;
}

Trainer::Trainer(TrackerModel<float>& model, const Config& cfg)
    : model_(model),
      cfg_(cfg),
      optimizer_(cfg.train.weight_decay, cfg.train.grad_clip),
      sampler_(cfg.world, cfg.train.num_sequences, cfg.train.seed, cfg.train.max_frame_gap) {
    cfg_.train.validate();
    cfg_.loss.validate();
}

double Trainer::learning_rate(int epoch) const {
    return cfg_.train.learning_rate * (epoch >= cfg_.train.lr_decay_epoch ? cfg_.train.lr_decay_factor : 1.0);
}

StepResult Trainer::train_step(const TrainingSample& sample, int epoch) {
    return train_batch(std::span<const TrainingSample>(&sample, 1), epoch);
}

StepResult Trainer::train_batch(std::span<const TrainingSample> batch, int epoch) {
    if (batch.empty()) {
        throw ValidationError("train_batch: empty batch");
    }
    model_.params().zero_grad();
    const float inv = 1.0f / static_cast<float>(batch.size());
    StepResult r;
    for (const TrainingSample& sample : batch) {
        const UnrolledLoss<float> loss = unroll_sequence(model_, sample, cfg_.loss);
        const double total = loss.total.item();
        if (!std::isfinite(total)) {
            model_.params().zero_grad();
            throw ValidationError("train_sequence_step: non-finite loss, step aborted");
        }
        r.length = std::max(r.length, sample.length());
        r.loss += total * inv;
        r.sequence_loss += loss.sequence.item() * inv;
        ops::scale(loss.total, inv).backward();
    }
    r.grad_norm = optimizer_.step(model_.params(), learning_rate(epoch));
    return r;
}

EpochSummary Trainer::run_epoch(int epoch, const std::function<void(const LogEntry&)>& log) {
    EpochSummary summary;
    summary.epoch = epoch;
    summary.length = cfg_.train.sample_length(epoch);
    std::vector<int> order(static_cast<std::size_t>(sampler_.size()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::mt19937_64 rng(cfg_.train.seed * 1000003ULL + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t bs = static_cast<std::size_t>(cfg_.train.batch_size);
    for (std::size_t start = 0; start < order.size(); start += bs) {
        std::vector<TrainingSample> batch;
        for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) {
            batch.push_back(sampler_.sample(order[i], summary.length, rng()));
        }
        const StepResult r = train_batch(batch, epoch);
        summary.mean_loss += r.loss * static_cast<double>(batch.size());
        summary.mean_sequence_loss += r.sequence_loss * static_cast<double>(batch.size());
        if (log) {
            log(LogEntry{optimizer_.steps(), epoch, r.length, r.loss, r.sequence_loss});
        }
    }
    summary.mean_loss /= static_cast<double>(order.size());
    summary.mean_sequence_loss /= static_cast<double>(order.size());
    return summary;
}

std::string format_log_entry(const LogEntry& e) {
    char line[128];
    std::snprintf(line, sizeof(line), "%ld,%d,%d,%.6f,%.6f", e.step, e.epoch, e.length, e.loss, e.sequence_loss);
    return line;
}

template Tensor<float> sequence_loss(std::span<const FrameTerms<float>>, const LossWeights&);
template Tensor<double> sequence_loss(std::span<const FrameTerms<double>>, const LossWeights&);
template Tensor<float> similarity_loss(std::span<const FrameTerms<float>>, const LossWeights&);
template Tensor<double> similarity_loss(std::span<const FrameTerms<double>>, const LossWeights&);
template UnrolledLoss<float> unroll_sequence(const TrackerModel<float>&, const TrainingSample&, const LossWeights&);
template UnrolledLoss<double> unroll_sequence(const TrackerModel<double>&, const TrainingSample&, const LossWeights&);

}  // namespace eltrack
