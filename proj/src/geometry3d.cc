#include "lidarpipe/geometry3d.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "lidarpipe/error.h"

namespace lidarpipe {

namespace {

constexpr double kPi = std::numbers::pi;
// Intersections smaller than this count as empty.
constexpr double kAreaEpsilon = 1e-12;

Eigen::Matrix4d velo_to_rect(const Calibration& calib) {
  Eigen::Matrix4d tr = Eigen::Matrix4d::Identity();
  tr.topRows<3>() = calib.tr_velo_to_cam;
  Eigen::Matrix4d r0 = Eigen::Matrix4d::Identity();
  r0.topLeftCorner<3, 3>() = calib.r0_rect;
  return r0 * tr;
}

double cross(const Eigen::Vector2d& o, const Eigen::Vector2d& a,
             const Eigen::Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

double polygon_area(std::span<const Eigen::Vector2d> poly) {
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    twice += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * twice;
}

void check_same_frame(const Box3D& a, const Box3D& b) {
  if (a.frame != b.frame) {
    throw Error(ErrorCode::kBadBox, "overlap between boxes in different frames");
  }
}

}  // namespace

double normalize_angle(double radians) {
  double wrapped = std::fmod(radians, 2.0 * kPi);
  if (wrapped <= -kPi) wrapped += 2.0 * kPi;
  if (wrapped > kPi) wrapped -= 2.0 * kPi;
  return wrapped;
}

Box3D Box3D::make(const Eigen::Vector3d& center, double length, double width,
                  double height, double yaw, Frame frame) {
  if (!center.allFinite() || !std::isfinite(yaw)) {
    throw Error(ErrorCode::kBadBox, "non-finite center or yaw");
  }
  if (!(length > 0.0) || !(width > 0.0) || !(height > 0.0) ||
      !std::isfinite(length) || !std::isfinite(width) || !std::isfinite(height)) {
    throw Error(ErrorCode::kBadBox, "dimensions must be positive and finite");
  }
  Box3D box;
  box.center = center;
  box.length = length;
  box.width = width;
  box.height = height;
  box.yaw = normalize_angle(yaw);
  box.frame = frame;
  return box;
}

Eigen::Vector3d lidar_to_camera(const Eigen::Vector3d& point,
                                const Calibration& calib) {
  return calib.r0_rect *
         (calib.tr_velo_to_cam.leftCols<3>() * point + calib.tr_velo_to_cam.col(3));
}

std::vector<Eigen::Vector3d> lidar_to_camera(const PointCloud& cloud,
                                             const Calibration& calib) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(cloud.size());
  for (const Point& p : cloud.points) {
    out.push_back(lidar_to_camera(Eigen::Vector3d(p.x, p.y, p.z), calib));
  }
  return out;
}

Eigen::Vector3d camera_to_lidar(const Eigen::Vector3d& point,
                                const Calibration& calib) {
  const Eigen::Matrix4d inverse = velo_to_rect(calib).inverse();
  return (inverse * point.homogeneous()).head<3>();
}

std::optional<ImagePoint> project_point(const Eigen::Vector3d& point_cam,
                                        const Calibration& calib) {
  if (point_cam.z() <= 0.0) return std::nullopt;
  const Eigen::Vector3d h = calib.p2 * point_cam.homogeneous();
  if (h.z() <= 0.0) return std::nullopt;
  ImagePoint out;
  out.u = h.x() / h.z();
  out.v = h.y() / h.z();
  out.depth = point_cam.z();
  return out;
}

std::vector<ImagePoint> project_to_image(
    std::span<const Eigen::Vector3d> points_cam, const Calibration& calib) {
  std::vector<ImagePoint> out;
  out.reserve(points_cam.size());
  for (std::size_t i = 0; i < points_cam.size(); ++i) {
    if (auto projected = project_point(points_cam[i], calib)) {
      projected->source_index = i;
      out.push_back(*projected);
    }
  }
  return out;
}

Box3D camera_label_to_lidar_box(const Annotation& ann, const Calibration& calib) {
  if (ann.label == ObjectClass::kDontCare) {
    throw Error(ErrorCode::kNotAPhysicalBox, "DontCare region has no 3D box");
  }
  Eigen::Vector3d center = camera_to_lidar(ann.location, calib);
  center.z() += 0.5 * ann.dims.height;
  return Box3D::make(center, ann.dims.length, ann.dims.width, ann.dims.height,
                     -ann.rotation_y - 0.5 * kPi, Frame::kLidar);
}

Annotation lidar_box_to_camera_label(const Box3D& box, ObjectClass label,
                                     const Calibration& calib) {
  Annotation ann;
  ann.label = label;
  Eigen::Vector3d bottom = box.center;
  bottom.z() -= 0.5 * box.height;
  ann.location = lidar_to_camera(bottom, calib);
  ann.dims = {box.height, box.width, box.length};
  ann.rotation_y = normalize_angle(-box.yaw - 0.5 * kPi);
  ann.alpha = normalize_angle(ann.rotation_y -
                              std::atan2(ann.location.x(), ann.location.z()));

  double left = std::numeric_limits<double>::infinity();
  double top = left;
  double right = -left;
  double bottom_px = -left;
  for (const auto& corner : box_corners(box)) {
    const auto projected = project_point(lidar_to_camera(corner, calib), calib);
    if (!projected) {
      ann.bbox = {};
      return ann;
    }
    left = std::min(left, projected->u);
    right = std::max(right, projected->u);
    top = std::min(top, projected->v);
    bottom_px = std::max(bottom_px, projected->v);
  }
  ann.bbox = {left, top, right, bottom_px};
  return ann;
}

std::array<Eigen::Vector3d, 8> box_corners(const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = 0.5 * box.length;
  const double hw = 0.5 * box.width;
  const double hh = 0.5 * box.height;
  constexpr double kSigns[4][2] = {{1, 1}, {-1, 1}, {-1, -1}, {1, -1}};
  std::array<Eigen::Vector3d, 8> corners;
  for (int i = 0; i < 4; ++i) {
    const double lx = kSigns[i][0] * hl;
    const double ly = kSigns[i][1] * hw;
    const Eigen::Vector3d offset(c * lx - s * ly, s * lx + c * ly, 0.0);
    corners[i] = box.center + offset - Eigen::Vector3d(0, 0, hh);
    corners[i + 4] = box.center + offset + Eigen::Vector3d(0, 0, hh);
  }
  return corners;
}

std::array<Eigen::Vector2d, 4> footprint(const Box3D& box) {
  const auto corners = box_corners(box);
  return {corners[0].head<2>(), corners[1].head<2>(), corners[2].head<2>(),
          corners[3].head<2>()};
}

double convex_intersection_area(std::span<const Eigen::Vector2d> a,
                                std::span<const Eigen::Vector2d> b) {
  // Sutherland-Hodgman: clip `a` successively by each edge of `b`.
  std::vector<Eigen::Vector2d> output(a.begin(), a.end());
  std::vector<Eigen::Vector2d> input;
  for (std::size_t e = 0; e < b.size() && !output.empty(); ++e) {
    const Eigen::Vector2d& edge_start = b[e];
    const Eigen::Vector2d& edge_end = b[(e + 1) % b.size()];
    input.swap(output);
    output.clear();
    for (std::size_t i = 0; i < input.size(); ++i) {
      const Eigen::Vector2d& current = input[i];
      const Eigen::Vector2d& previous = input[(i + input.size() - 1) % input.size()];
      const double side_cur = cross(edge_start, edge_end, current);
      const double side_prev = cross(edge_start, edge_end, previous);
      const bool cur_inside = side_cur >= 0.0;
      const bool prev_inside = side_prev >= 0.0;
      if (cur_inside != prev_inside) {
        const double t = side_prev / (side_prev - side_cur);
        output.push_back(previous + t * (current - previous));
      }
      if (cur_inside) output.push_back(current);
    }
  }
  if (output.size() < 3) return 0.0;
  const double area = polygon_area(output);
  return area > kAreaEpsilon ? area : 0.0;
}

double rotated_intersection_area_bev(const Box3D& a, const Box3D& b) {
  check_same_frame(a, b);
  // Circumscribed-circle rejection.
  const double ra = 0.5 * std::hypot(a.length, a.width);
  const double rb = 0.5 * std::hypot(b.length, b.width);
  if ((a.center.head<2>() - b.center.head<2>()).norm() >= ra + rb) return 0.0;
  const auto fa = footprint(a);
  const auto fb = footprint(b);
  return convex_intersection_area(fa, fb);
}

double rotated_iou_bev(const Box3D& a, const Box3D& b) {
  const double inter = rotated_intersection_area_bev(a, b);
  if (inter <= 0.0) return 0.0;
  const double area_a = a.length * a.width;
  const double area_b = b.length * b.width;
  return std::clamp(inter / (area_a + area_b - inter), 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  const double overlap_z =
      std::min(a.top(), b.top()) - std::max(a.bottom(), b.bottom());
  if (overlap_z <= 0.0) return 0.0;
  const double inter_area = rotated_intersection_area_bev(a, b);
  if (inter_area <= 0.0) return 0.0;
  const double inter = inter_area * overlap_z;
  return std::clamp(inter / (a.volume() + b.volume() - inter), 0.0, 1.0);
}

std::vector<std::size_t> nms_rotated(std::span<const Box3D> boxes,
                                     std::span<const double> scores,
                                     double iou_threshold) {
  if (boxes.size() != scores.size()) {
    throw Error(ErrorCode::kBadBox, "boxes and scores differ in length");
  }
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return scores[i] > scores[j];
  });
  std::vector<std::size_t> kept;
  for (const std::size_t candidate : order) {
    bool suppressed = false;
    for (const std::size_t k : kept) {
      if (rotated_iou_bev(boxes[k], boxes[candidate]) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(candidate);
  }
  return kept;
}

}  // namespace lidarpipe
