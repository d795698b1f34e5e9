#pragma once

#include <span>
#include <vector>

#include "eltrack/geometry.hpp"
#include "eltrack/runtime.hpp"
#include "eltrack/synthetic.hpp"

namespace eltrack {

// Conventions, all in pixel space and macro-averaged over sequences:
//  - success(t) = fraction of gt-present frames with IoU > t, t = 0, 0.02, ..., 1
//  - precision@20 = fraction with centre error < 20 px
//  - normalized precision: centre error with x/y divided by gt w/h, curve of
//    error < t for t = 0, 0.01, ..., 0.5, averaged over its 51 points
//  - presence sweeps use 101 thresholds t = 0, 0.01, ..., 1 and report a
//    frame present iff confidence > t
//  - a present prediction is correct iff IoU > 0.5

/// Predictions and labels of one sequence, frame aligned.
struct EvalRecord {
    std::vector<PixelBox> pred;
    std::vector<double> confidence;
    std::vector<bool> pred_present;
    std::vector<PixelBox> gt;
    std::vector<bool> gt_present;

    std::size_t size() const { return pred.size(); }
    void validate() const;
};

EvalRecord make_record(std::span<const TrackResult> results, std::span<const GroundTruth> labels);

struct OpeMetrics {
    double auc = 0.0;
    double precision20 = 0.0;
    double normalized_precision = 0.0;
    std::vector<double> success_curve;  // 51 points
};

struct OxuvaMetrics {
    double tpr = 0.0;  // at the reported presence flags
    double tnr = 0.0;
    double maxgm = 0.0;
    double maxgm_threshold = 0.0;
};

struct VotLtMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double fscore = 0.0;
    double threshold = 0.0;
};

OpeMetrics compute_ope_metrics(std::span<const EvalRecord> records);
/// Throws when the set has no gt-present or no gt-absent frame.
OxuvaMetrics compute_oxuva_metrics(std::span<const EvalRecord> records);
VotLtMetrics compute_votlt_metrics(std::span<const EvalRecord> records);

inline constexpr int kSuccessSteps = 51;
inline constexpr int kPresenceSteps = 101;

}  // namespace eltrack
