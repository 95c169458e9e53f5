#include "lidarpipe/targets_losses.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lidarpipe/error.h"

namespace lidarpipe {

namespace {

void check_positive_dims(const Box3D& box, const char* which) {
  if (!(box.length > 0.0) || !(box.width > 0.0) || !(box.height > 0.0)) {
    throw Error(ErrorCode::kBadBox, std::string(which) + " box has non-positive size");
  }
}

double footprint_diagonal(const Box3D& anchor) {
  return std::sqrt(anchor.width * anchor.width + anchor.length * anchor.length);
}

}  // namespace

AnchorGrid generate_anchors(std::size_t grid_nx, std::size_t grid_ny,
                            const AnchorSize& size, double z_center, double stride,
                            double origin_x, double origin_y) {
  AnchorGrid grid;
  grid.grid_nx = grid_nx;
  grid.grid_ny = grid_ny;
  grid.anchors.reserve(grid_nx * grid_ny * 2);
  for (std::size_t iy = 0; iy < grid_ny; ++iy) {
    for (std::size_t ix = 0; ix < grid_nx; ++ix) {
      const Eigen::Vector3d center(origin_x + (static_cast<double>(ix) + 0.5) * stride,
                                   origin_y + (static_cast<double>(iy) + 0.5) * stride,
                                   z_center);
      for (const double yaw : {0.0, 0.5 * std::numbers::pi}) {
        grid.anchors.push_back(
            Box3D::make(center, size.length, size.width, size.height, yaw));
      }
    }
  }
  return grid;
}

AssignThresholds default_assign_thresholds(ObjectClass cls) {
  switch (cls) {
    case ObjectClass::kPedestrian:
    case ObjectClass::kCyclist:
    case ObjectClass::kPersonSitting:
      return {0.5, 0.35};
    default:
      return {0.6, 0.45};
  }
}

Assignment assign_targets(std::span<const Box3D> anchors,
                          std::span<const Box3D> gt_boxes,
                          const AssignThresholds& thresholds) {
  Assignment out;
  out.anchors.resize(anchors.size());
  if (gt_boxes.empty()) {
    out.num_negative = anchors.size();
    return out;
  }

  const std::size_t num_gt = gt_boxes.size();
  std::vector<double> anchor_best_iou(anchors.size(), 0.0);
  std::vector<std::size_t> anchor_best_gt(anchors.size(), 0);
  std::vector<double> gt_best_iou(num_gt, 0.0);
  std::vector<std::size_t> gt_best_anchor(num_gt, 0);

  for (std::size_t a = 0; a < anchors.size(); ++a) {
    for (std::size_t g = 0; g < num_gt; ++g) {
      const double iou = rotated_iou_bev(anchors[a], gt_boxes[g]);
      if (iou > anchor_best_iou[a]) {
        anchor_best_iou[a] = iou;
        anchor_best_gt[a] = g;
      }
      if (iou > gt_best_iou[g]) {
        gt_best_iou[g] = iou;
        gt_best_anchor[g] = a;
      }
    }
  }

  // Force matches: anchor -> gt whose best anchor it is.
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> forced(anchors.size(), kNone);
  for (std::size_t g = 0; g < num_gt; ++g) {
    if (gt_best_iou[g] <= 0.0) continue;
    const std::size_t a = gt_best_anchor[g];
    if (forced[a] == kNone || gt_best_iou[g] > gt_best_iou[forced[a]]) forced[a] = g;
  }

  for (std::size_t a = 0; a < anchors.size(); ++a) {
    AnchorAssignment& slot = out.anchors[a];
    if (anchor_best_iou[a] >= thresholds.positive) {
      slot = {AnchorLabel::kPositive, anchor_best_gt[a]};
      ++out.num_positive;
    } else if (forced[a] != kNone) {
      slot = {AnchorLabel::kPositive, forced[a]};
      ++out.num_positive;
    } else if (anchor_best_iou[a] < thresholds.negative) {
      slot = {AnchorLabel::kNegative, 0};
      ++out.num_negative;
    } else {
      slot = {AnchorLabel::kIgnore, 0};
    }
  }
  return out;
}

ResidualVector encode_residuals(const Box3D& gt, const Box3D& anchor, AngleMode mode) {
  check_positive_dims(gt, "ground-truth");
  check_positive_dims(anchor, "anchor");
  const double diagonal = footprint_diagonal(anchor);
  ResidualVector r;
  r.dx = (gt.center.x() - anchor.center.x()) / diagonal;
  r.dy = (gt.center.y() - anchor.center.y()) / diagonal;
  r.dz = (gt.center.z() - anchor.center.z()) / diagonal;
  r.dw = std::log(gt.width / anchor.width);
  r.dl = std::log(gt.length / anchor.length);
  r.dh = std::log(gt.height / anchor.height);
  const double diff = gt.yaw - anchor.yaw;
  r.dtheta = mode == AngleMode::kSinDiff ? std::sin(diff) : normalize_angle(diff);
  return r;
}

Box3D decode_residuals(const ResidualVector& residual, const Box3D& anchor,
                       AngleMode mode) {
  check_positive_dims(anchor, "anchor");
  double dtheta = residual.dtheta;
  if (mode == AngleMode::kSinDiff) {
    if (!(std::abs(dtheta) <= 1.0)) {
      throw Error(ErrorCode::kOutOfRangeAngle, "sin residual outside [-1, 1]");
    }
    dtheta = std::asin(dtheta);
  }
  const double diagonal = footprint_diagonal(anchor);
  const Eigen::Vector3d center(anchor.center.x() + residual.dx * diagonal,
                               anchor.center.y() + residual.dy * diagonal,
                               anchor.center.z() + residual.dz * diagonal);
  return Box3D::make(center, anchor.length * std::exp(residual.dl),
                     anchor.width * std::exp(residual.dw),
                     anchor.height * std::exp(residual.dh), anchor.yaw + dtheta,
                     anchor.frame);
}

double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

double localization_loss(const ResidualVector& diff) {
  double sum = 0.0;
  for (const double v : diff.as_array()) sum += smooth_l1(v);
  return sum;
}

double focal_loss(double p, double alpha, double gamma) {
  const double clamped = std::clamp(p, kProbabilityFloor, 1.0);
  return -alpha * std::pow(1.0 - clamped, gamma) * std::log(clamped);
}

double binary_cross_entropy(double p, int target) {
  const double clamped = std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
  const double t = target != 0 ? 1.0 : 0.0;
  return -(t * std::log(clamped) + (1.0 - t) * std::log(1.0 - clamped));
}

int direction_target(double gt_theta, double anchor_theta) {
  return normalize_angle(gt_theta - anchor_theta) >= 0.0 ? 1 : 0;
}

double direction_loss(const std::array<double, 2>& logits, double gt_theta,
                      double anchor_theta) {
  const int target = direction_target(gt_theta, anchor_theta);
  const double peak = std::max(logits[0], logits[1]);
  const double log_sum =
      peak + std::log(std::exp(logits[0] - peak) + std::exp(logits[1] - peak));
  return log_sum - logits[static_cast<std::size_t>(target)];
}

double total_loss_pfe(double loc_sum, double cls_sum, double dir_sum,
                      std::size_t num_positive, const PfeLossWeights& weights) {
  const double divisor = num_positive == 0 ? 1.0 : static_cast<double>(num_positive);
  return (weights.loc * loc_sum + weights.cls * cls_sum + weights.dir * dir_sum) /
         divisor;
}

double total_loss_vfe(std::span<const double> pos_cls_terms,
                      std::span<const double> neg_cls_terms,
                      std::span<const double> reg_terms, double alpha, double beta,
                      std::size_t num_positive, std::size_t num_negative) {
  auto sum = [](std::span<const double> terms) {
    double total = 0.0;
    for (const double t : terms) total += t;
    return total;
  };
  const double pos = num_positive == 0 ? 1.0 : static_cast<double>(num_positive);
  const double neg = num_negative == 0 ? 1.0 : static_cast<double>(num_negative);
  return alpha * sum(pos_cls_terms) / pos + beta * sum(neg_cls_terms) / neg +
         sum(reg_terms) / pos;
}

}  // namespace lidarpipe
