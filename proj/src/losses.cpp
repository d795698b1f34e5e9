#include "eltrack/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "eltrack/ops.hpp"

namespace eltrack {

namespace {

// Loss and d(loss)/d(score) at one clamped score.
struct FocalTerm {
    double value;
    double grad;
};

FocalTerm focal_term(double score, int label, double gamma, std::optional<double> alpha) {
    const bool clamped = score < kScoreEpsilon || score > 1.0 - kScoreEpsilon;
    const double p = std::clamp(score, kScoreEpsilon, 1.0 - kScoreEpsilon);
    FocalTerm t{};
    if (label == 1) {
        const double a = alpha ? *alpha : 1.0;
        const double m = 1.0 - p;
        const double mg = std::pow(m, gamma);
        t.value = -a * mg * std::log(p);
        const double dmg = gamma == 0.0 ? 0.0 : gamma * std::pow(m, gamma - 1.0);
        t.grad = a * (dmg * std::log(p) - mg / p);
    } else {
        const double a = alpha ? 1.0 - *alpha : 1.0;
        const double pg = std::pow(p, gamma);
        t.value = -a * pg * std::log(1.0 - p);
        const double dpg = gamma == 0.0 ? 0.0 : gamma * std::pow(p, gamma - 1.0);
        t.grad = -a * (dpg * std::log(1.0 - p) - pg / (1.0 - p));
    }
    if (clamped) {
        t.grad = 0.0;
    }
    return t;
}

template <typename T>
Tensor<T> constant_row(const std::array<double, 4>& v) {
    Mat<T> m(1, 4);
    for (int i = 0; i < 4; ++i) {
        m(0, i) = static_cast<T>(v[i]);
    }
    return Tensor<T>(std::move(m));
}

}  // namespace

double focal_loss(double score, int label, double gamma, std::optional<double> alpha) {
    if (label != 0 && label != 1) {
        throw ValidationError("focal_loss: label must be 0 or 1");
    }
    return focal_term(score, label, gamma, alpha).value;
}

template <typename T>
Tensor<T> focal_loss_sum(const Tensor<T>& scores, std::span<const int> labels, double gamma,
                         std::optional<double> alpha) {
    if (scores.cols() != 1 || static_cast<std::size_t>(scores.rows()) != labels.size()) {
        throw ShapeError("focal_loss_sum: scores must be N x 1 with N labels");
    }
    Mat<T> grads(scores.rows(), 1);
    double total = 0.0;
    for (Index i = 0; i < scores.rows(); ++i) {
        const FocalTerm t = focal_term(static_cast<double>(scores.value()(i, 0)), labels[i], gamma, alpha);
        total += t.value;
        grads(i, 0) = static_cast<T>(t.grad);
    }
    Mat<T> v(1, 1);
    v(0, 0) = static_cast<T>(total);
    return Tensor<T>::from_op(std::move(v), {scores}, [grads = std::move(grads)](Node<T>& n) {
        accumulate(n, 0, grads * n.grad(0, 0));
    });
}

template <typename T>
Tensor<T> box_l1_loss(const Tensor<T>& pred, const BBox& target) {
    if (pred.rows() != 1 || pred.cols() != 4) {
        throw ShapeError("box_l1_loss: pred must be 1 x 4");
    }
    const Tensor<T> tgt = constant_row<T>({target.cx(), target.cy(), target.w(), target.h()});
    return ops::sum(ops::abs(ops::sub(pred, tgt)));
}

template <typename T>
Tensor<T> giou_loss(const Tensor<T>& pred, const BBox& target) {
    if (pred.rows() != 1 || pred.cols() != 4) {
        throw ShapeError("giou_loss: pred must be 1 x 4");
    }
    using ops::add;
    using ops::mul;
    using ops::sub;
    // Corners as (1 x 2) tensors: lo = center - size/2, hi = center + size/2.
    const Tensor<T> center = ops::slice_cols(pred, 0, 2);
    const Tensor<T> half = ops::scale(ops::slice_cols(pred, 2, 2), T(0.5));
    const Tensor<T> lo = sub(center, half);
    const Tensor<T> hi = add(center, half);
    const CornerBox tc = to_corners(target);
    Mat<T> tlo_m(1, 2);
    tlo_m << static_cast<T>(tc.x0), static_cast<T>(tc.y0);
    Mat<T> thi_m(1, 2);
    thi_m << static_cast<T>(tc.x1), static_cast<T>(tc.y1);
    const Tensor<T> tlo(tlo_m);
    const Tensor<T> thi(thi_m);

    const Tensor<T> inter_wh = ops::clamp_min(sub(ops::minimum(hi, thi), ops::maximum(lo, tlo)), T(0));
    const Tensor<T> inter = mul(ops::slice_cols(inter_wh, 0, 1), ops::slice_cols(inter_wh, 1, 1));
    const Tensor<T> pred_area = mul(ops::slice_cols(pred, 2, 1), ops::slice_cols(pred, 3, 1));
    const Tensor<T> tgt_area = Tensor<T>::scalar(static_cast<T>(target.area()));
    const Tensor<T> uni = sub(add(pred_area, tgt_area), inter);
    const Tensor<T> encl_wh = sub(ops::maximum(hi, thi), ops::minimum(lo, tlo));
    const Tensor<T> encl = mul(ops::slice_cols(encl_wh, 0, 1), ops::slice_cols(encl_wh, 1, 1));
    const Tensor<T> iou = ops::divide(inter, uni);
    const Tensor<T> penalty = ops::divide(sub(encl, uni), encl);
    const Tensor<T> giou = sub(iou, penalty);
    return ops::add_scalar(ops::scale(giou, T(-1)), T(1));
}

template Tensor<float> focal_loss_sum(const Tensor<float>&, std::span<const int>, double,
                                      std::optional<double>);
template Tensor<double> focal_loss_sum(const Tensor<double>&, std::span<const int>, double,
                                       std::optional<double>);
template Tensor<float> box_l1_loss(const Tensor<float>&, const BBox&);
template Tensor<double> box_l1_loss(const Tensor<double>&, const BBox&);
template Tensor<float> giou_loss(const Tensor<float>&, const BBox&);
template Tensor<double> giou_loss(const Tensor<double>&, const BBox&);

}  // namespace eltrack
