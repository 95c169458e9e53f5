#ifndef LIDARPIPE_GEOMETRY3D_H_
#define LIDARPIPE_GEOMETRY3D_H_

// Frame conventions
//   LiDAR:  x forward, y left, z up; yaw measured counter-clockwise from +x.
//   Camera: KITTI rectified camera, x right, y down, z forward; rotation_y
//           about the camera y axis.
// The two yaw conventions are related by yaw_lidar = -rotation_y - pi/2.

#include <Eigen/Core>
#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "lidarpipe/kitti_io.h"

namespace lidarpipe {

enum class Frame { kLidar, kCamera };

// Wraps an angle into (-pi, pi].
double normalize_angle(double radians);

// Oriented box. `center` is the geometric center; `length` runs along the
// heading, `width` across it and `height` along the vertical axis. Use
// Box3D::make to get a validated, yaw-normalized box.
struct Box3D {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double length = 1.0;
  double width = 1.0;
  double height = 1.0;
  double yaw = 0.0;
  Frame frame = Frame::kLidar;

  // Throws Error(kBadBox) for non-positive or non-finite dimensions or a
  // non-finite center/yaw.
  static Box3D make(const Eigen::Vector3d& center, double length, double width,
                    double height, double yaw, Frame frame = Frame::kLidar);

  double volume() const { return length * width * height; }
  double bottom() const { return center.z() - 0.5 * height; }
  double top() const { return center.z() + 0.5 * height; }
};

struct ImagePoint {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
  // Position of the source point in the input sequence.
  std::size_t source_index = 0;
};

// r0_rect * (tr_velo_to_cam * [x y z 1]^T). Reflectance is dropped.
Eigen::Vector3d lidar_to_camera(const Eigen::Vector3d& point,
                                const Calibration& calib);
std::vector<Eigen::Vector3d> lidar_to_camera(const PointCloud& cloud,
                                             const Calibration& calib);
// Exact inverse of lidar_to_camera.
Eigen::Vector3d camera_to_lidar(const Eigen::Vector3d& point,
                                const Calibration& calib);

// Projects one rectified-camera point through P2. Returns nothing for points
// at or behind the camera plane.
std::optional<ImagePoint> project_point(const Eigen::Vector3d& point_cam,
                                        const Calibration& calib);
std::vector<ImagePoint> project_to_image(
    std::span<const Eigen::Vector3d> points_cam, const Calibration& calib);

// Label (camera frame, bottom-center) to a LiDAR-frame box with geometric
// center. DontCare rows throw Error(kNotAPhysicalBox).
Box3D camera_label_to_lidar_box(const Annotation& ann, const Calibration& calib);

// Inverse of camera_label_to_lidar_box. Fills location, dims, rotation_y and
// alpha, and the 2D box as the hull of the projected corners (zero when any
// corner is behind the camera). Truncation and occlusion are left at 0.
Annotation lidar_box_to_camera_label(const Box3D& box, ObjectClass label,
                                     const Calibration& calib);

// Corner order: bottom face counter-clockwise seen from +z starting at the
// front-left corner (+l/2, +w/2), then the top face in the same order.
std::array<Eigen::Vector3d, 8> box_corners(const Box3D& box);

// The four footprint corners, counter-clockwise.
std::array<Eigen::Vector2d, 4> footprint(const Box3D& box);

// Area of the intersection of two convex polygons given counter-clockwise.
double convex_intersection_area(std::span<const Eigen::Vector2d> a,
                                std::span<const Eigen::Vector2d> b);

double rotated_intersection_area_bev(const Box3D& a, const Box3D& b);
double rotated_iou_bev(const Box3D& a, const Box3D& b);
double iou_3d(const Box3D& a, const Box3D& b);

// Greedy suppression in descending score order using rotated_iou_bev. A box
// is dropped when its IoU with an already kept box is strictly greater than
// `iou_threshold`. Equal scores keep the lower index first.
std::vector<std::size_t> nms_rotated(std::span<const Box3D> boxes,
                                     std::span<const double> scores,
                                     double iou_threshold);

}  // namespace lidarpipe

#endif  // LIDARPIPE_GEOMETRY3D_H_
