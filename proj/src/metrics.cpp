#include "eltrack/metrics.hpp"

#include <cmath>

#include "eltrack/errors.hpp"

namespace eltrack {

namespace {

double pixel_iou(const PixelBox& a, const PixelBox& b) {
    return corner_overlap_metrics(pixel_corners(a), pixel_corners(b)).iou;
}

double threshold_at(int i, int steps, double max) { return max * i / (steps - 1); }

struct SequenceOpe {
    std::vector<double> success;
    double precision20 = 0.0;
    double normalized_precision = 0.0;
    bool valid = false;
};

SequenceOpe sequence_ope(const EvalRecord& r) {
    SequenceOpe s;
    s.success.assign(kSuccessSteps, 0.0);
    std::vector<double> norm_curve(kSuccessSteps, 0.0);
    int n = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (!r.gt_present[i]) continue;
        ++n;
        const PixelBox& p = r.pred[i];
        const PixelBox& g = r.gt[i];
        const double iou = pixel_iou(p, g);
        for (int k = 0; k < kSuccessSteps; ++k) {
            if (iou > threshold_at(k, kSuccessSteps, 1.0)) s.success[k] += 1.0;
        }
        const double dx = (p.x0 + p.w / 2.0) - (g.x0 + g.w / 2.0);
        const double dy = (p.y0 + p.h / 2.0) - (g.y0 + g.h / 2.0);
        if (std::hypot(dx, dy) < 20.0) s.precision20 += 1.0;
        const double ne = std::hypot(dx / g.w, dy / g.h);
        for (int k = 0; k < kSuccessSteps; ++k) {
            if (ne < threshold_at(k, kSuccessSteps, 0.5)) norm_curve[k] += 1.0;
        }
    }
    if (n == 0) return s;
    s.valid = true;
    for (auto& v : s.success) v /= n;
    s.precision20 /= n;
    double acc = 0.0;
    for (double v : norm_curve) acc += v / n;
    s.normalized_precision = acc / kSuccessSteps;
    return s;
}

bool correct(const EvalRecord& r, std::size_t i) { return pixel_iou(r.pred[i], r.gt[i]) > 0.5; }

// Fractions for one sequence given a presence decision per frame. Returns
// {tpr, tnr} with negative values when the class is missing.
std::pair<double, double> rates(const EvalRecord& r, const std::vector<bool>& reported) {
    int pos = 0, neg = 0, tp = 0, tn = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (r.gt_present[i]) {
            ++pos;
            tp += (reported[i] && correct(r, i)) ? 1 : 0;
        } else {
            ++neg;
            tn += reported[i] ? 0 : 1;
        }
    }
    return {pos ? static_cast<double>(tp) / pos : -1.0, neg ? static_cast<double>(tn) / neg : -1.0};
}

std::vector<bool> reported_at(const EvalRecord& r, double tau) {
    std::vector<bool> out(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) out[i] = r.confidence[i] > tau;
    return out;
}

// Macro average of the nonnegative entries; -1 when none.
double macro(const std::vector<double>& v) {
    double s = 0.0;
    int n = 0;
    for (double x : v) {
        if (x >= 0.0) {
            s += x;
            ++n;
        }
    }
    return n ? s / n : -1.0;
}

}  // namespace

void EvalRecord::validate() const {
    const std::size_t n = pred.size();
    if (confidence.size() != n || pred_present.size() != n || gt.size() != n || gt_present.size() != n) {
        throw ValidationError("eval: prediction and ground-truth lengths differ");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (gt_present[i] && (!(gt[i].w > 0.0) || !(gt[i].h > 0.0))) {
            throw ValidationError("eval: present ground truth with empty box");
        }
    }
}

EvalRecord make_record(std::span<const TrackResult> results, std::span<const GroundTruth> labels) {
    if (results.size() != labels.size()) {
        throw ValidationError("eval: " + std::to_string(results.size()) + " results for " +
                              std::to_string(labels.size()) + " annotated frames");
    }
    EvalRecord r;
    for (std::size_t i = 0; i < results.size(); ++i) {
        r.pred.push_back(results[i].pixels);
        r.confidence.push_back(results[i].confidence);
        r.pred_present.push_back(results[i].present);
        r.gt.push_back(labels[i].present ? labels[i].pixels : PixelBox{});
        r.gt_present.push_back(labels[i].present);
    }
    return r;
}

OpeMetrics compute_ope_metrics(std::span<const EvalRecord> records) {
    OpeMetrics m;
    m.success_curve.assign(kSuccessSteps, 0.0);
    int n = 0;
    for (const auto& r : records) {
        r.validate();
        const SequenceOpe s = sequence_ope(r);
        if (!s.valid) continue;
        ++n;
        for (int k = 0; k < kSuccessSteps; ++k) m.success_curve[k] += s.success[k];
        m.precision20 += s.precision20;
        m.normalized_precision += s.normalized_precision;
    }
    if (n == 0) {
        throw ValidationError("eval: no frame with a present target");
    }
    for (auto& v : m.success_curve) v /= n;
    m.precision20 /= n;
    m.normalized_precision /= n;
    for (double v : m.success_curve) m.auc += v;
    m.auc /= kSuccessSteps;
    return m;
}

OxuvaMetrics compute_oxuva_metrics(std::span<const EvalRecord> records) {
    std::vector<double> tprs, tnrs;
    for (const auto& r : records) {
        r.validate();
        const auto [tpr, tnr] = rates(r, r.pred_present);
        tprs.push_back(tpr);
        tnrs.push_back(tnr);
    }
    OxuvaMetrics m;
    m.tpr = macro(tprs);
    m.tnr = macro(tnrs);
    if (m.tpr < 0.0 || m.tnr < 0.0) {
        throw ValidationError("oxuva metrics need both present and absent ground-truth frames");
    }
    m.maxgm = -1.0;
    for (int k = 0; k < kPresenceSteps; ++k) {
        const double tau = threshold_at(k, kPresenceSteps, 1.0);
        std::vector<double> a, b;
        for (const auto& r : records) {
            const auto [tpr, tnr] = rates(r, reported_at(r, tau));
            a.push_back(tpr);
            b.push_back(tnr);
        }
        const double gm = std::sqrt(macro(a) * macro(b));
        if (gm > m.maxgm) {
            m.maxgm = gm;
            m.maxgm_threshold = tau;
        }
    }
    return m;
}

VotLtMetrics compute_votlt_metrics(std::span<const EvalRecord> records) {
    VotLtMetrics best;
    best.fscore = -1.0;
    bool any_present = false;
    for (const auto& r : records) {
        r.validate();
        for (bool g : r.gt_present) any_present = any_present || g;
    }
    if (!any_present) {
        throw ValidationError("eval: no frame with a present target");
    }
    for (int k = 0; k < kPresenceSteps; ++k) {
        const double tau = threshold_at(k, kPresenceSteps, 1.0);
        std::vector<double> precisions, recalls;
        for (const auto& r : records) {
            int reported = 0, positives = 0, hits = 0;
            for (std::size_t i = 0; i < r.size(); ++i) {
                const bool rep = r.confidence[i] > tau;
                reported += rep ? 1 : 0;
                positives += r.gt_present[i] ? 1 : 0;
                hits += (rep && r.gt_present[i] && correct(r, i)) ? 1 : 0;
            }
            precisions.push_back(reported ? static_cast<double>(hits) / reported : -1.0);
            recalls.push_back(positives ? static_cast<double>(hits) / positives : -1.0);
        }
        const double p = std::max(0.0, macro(precisions));
        const double rc = std::max(0.0, macro(recalls));
        const double f = p + rc > 0.0 ? 2.0 * p * rc / (p + rc) : 0.0;
        if (f > best.fscore) {
            best = {p, rc, f, tau};
        }
    }
    return best;
}

}  // namespace eltrack
