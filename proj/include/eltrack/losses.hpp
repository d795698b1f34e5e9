#pragma once

#include <optional>
#include <span>

#include "eltrack/geometry.hpp"
#include "eltrack/tensor.hpp"

namespace eltrack {

inline constexpr double kScoreEpsilon = 1e-7;

/// Sigmoid focal loss on a probability. The score is clamped to
/// [eps, 1-eps]. With alpha unset no class balancing is applied, so gamma 0
/// reduces to binary cross-entropy.
double focal_loss(double score, int label, double gamma, std::optional<double> alpha);

/// Sum of focal terms over a column of scores (N x 1) with 0/1 labels.
template <typename T>
Tensor<T> focal_loss_sum(const Tensor<T>& scores, std::span<const int> labels, double gamma,
                         std::optional<double> alpha);

/// ||pred - target||_1 for one (1 x 4) cx,cy,w,h box against a constant box.
template <typename T>
Tensor<T> box_l1_loss(const Tensor<T>& pred, const BBox& target);

/// 1 - GIoU(pred, target) for a (1 x 4) cx,cy,w,h box.
template <typename T>
Tensor<T> giou_loss(const Tensor<T>& pred, const BBox& target);

}  // namespace eltrack
