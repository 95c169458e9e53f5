#ifndef LIDARPIPE_TARGETS_LOSSES_H_
#define LIDARPIPE_TARGETS_LOSSES_H_

// Anchors, target assignment, box residual coding and the detection losses.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "lidarpipe/geometry3d.h"
#include "lidarpipe/kitti_io.h"

namespace lidarpipe {

struct AnchorSize {
  double width = 1.6;
  double length = 3.9;
  double height = 1.56;
};

struct AnchorGrid {
  std::size_t grid_nx = 0;
  std::size_t grid_ny = 0;
  // Row-major over (iy, ix); each cell holds yaw 0 then yaw pi/2.
  std::vector<Box3D> anchors;
};

// Anchor centers sit at cell centers: x = origin_x + (ix + 0.5) * stride,
// y = origin_y + (iy + 0.5) * stride, z = z_center.
AnchorGrid generate_anchors(std::size_t grid_nx, std::size_t grid_ny,
                            const AnchorSize& size, double z_center, double stride,
                            double origin_x = 0.0, double origin_y = 0.0);

enum class AnchorLabel { kNegative, kIgnore, kPositive };

struct AnchorAssignment {
  AnchorLabel label = AnchorLabel::kNegative;
  std::size_t gt_index = 0;  // meaningful for positives only
};

struct Assignment {
  std::vector<AnchorAssignment> anchors;
  std::size_t num_positive = 0;
  std::size_t num_negative = 0;
};

struct AssignThresholds {
  double positive = 0.6;
  double negative = 0.45;
};

// Car 0.6 / 0.45; Pedestrian and Cyclist 0.5 / 0.35; everything else uses
// the car values.
AssignThresholds default_assign_thresholds(ObjectClass cls);

// BEV rotated IoU between every anchor and ground truth.
//   positive  max IoU >= positive threshold (matched to its best gt, lower gt
//             index on ties), or the best anchor of some gt with IoU > 0
//             (force match; among several such gts the highest IoU wins,
//             lower gt index on ties; anchor ties go to the lower index)
//   negative  otherwise, when max IoU < negative threshold
//   ignore    everything else
// With no ground truths every anchor is negative.
Assignment assign_targets(std::span<const Box3D> anchors,
                          std::span<const Box3D> gt_boxes,
                          const AssignThresholds& thresholds);

enum class AngleMode {
  kSinDiff,  // sin(theta_gt - theta_a)
  kRawDiff,  // theta_gt - theta_a wrapped to (-pi, pi]
};

struct ResidualVector {
  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;
  double dw = 0.0;
  double dl = 0.0;
  double dh = 0.0;
  double dtheta = 0.0;

  std::array<double, 7> as_array() const { return {dx, dy, dz, dw, dl, dh, dtheta}; }
  static ResidualVector from_array(const std::array<double, 7>& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
  }
};

// Offsets are scaled by the anchor footprint diagonal sqrt(w_a^2 + l_a^2);
// sizes are log ratios. Throws Error(kBadBox) for non-positive dimensions.
ResidualVector encode_residuals(const Box3D& gt, const Box3D& anchor, AngleMode mode);

// Inverse of encode_residuals. kSinDiff decodes theta_a + asin(dtheta) and
// throws Error(kOutOfRangeAngle) when |dtheta| > 1.
Box3D decode_residuals(const ResidualVector& residual, const Box3D& anchor,
                       AngleMode mode);

double smooth_l1(double x);

// Sum of smooth_l1 over the seven components of `diff` (prediction minus
// target residual).
double localization_loss(const ResidualVector& diff);

// Clamp applied to probabilities before any logarithm.
inline constexpr double kProbabilityFloor = 1e-12;

inline constexpr double kFocalAlpha = 0.25;
inline constexpr double kFocalGamma = 2.0;

// -alpha (1 - p)^gamma log p for the probability of the true class.
double focal_loss(double p, double alpha = kFocalAlpha, double gamma = kFocalGamma);

double binary_cross_entropy(double p, int target);

// 1 when the wrapped heading difference theta_gt - theta_a is >= 0, else 0.
int direction_target(double gt_theta, double anchor_theta);

// Two-bin softmax cross entropy against direction_target.
double direction_loss(const std::array<double, 2>& logits, double gt_theta,
                      double anchor_theta);

struct PfeLossWeights {
  double loc = 0.2;
  double cls = 1.0;
  double dir = 0.2;
};

// (w_loc * loc + w_cls * cls + w_dir * dir) / N_pos, with N_pos = 0 treated
// as 1.
double total_loss_pfe(double loc_sum, double cls_sum, double dir_sum,
                      std::size_t num_positive, const PfeLossWeights& weights = {});

inline constexpr double kVfeAlpha = 1.5;
inline constexpr double kVfeBeta = 1.0;

// alpha * sum(pos_cls) / N_pos + beta * sum(neg_cls) / N_neg
//   + sum(reg) / N_pos, zero counts replaced by 1. Sums run left to right.
double total_loss_vfe(std::span<const double> pos_cls_terms,
                      std::span<const double> neg_cls_terms,
                      std::span<const double> reg_terms, double alpha, double beta,
                      std::size_t num_positive, std::size_t num_negative);

}  // namespace lidarpipe

#endif  // LIDARPIPE_TARGETS_LOSSES_H_
