#ifndef LIDARPIPE_KITTI_IO_H_
#define LIDARPIPE_KITTI_IO_H_

// Readers and writers for the KITTI object benchmark files: velodyne point
// clouds (.bin), label_2 annotations, calib files and 16-field result files.

#include <Eigen/Core>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lidarpipe/binary_io.h"

namespace lidarpipe {

// One velodyne return in the LiDAR frame: x forward, y left, z up (meters),
// r the reflectance in [0, 1].
struct Point {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  float r = 0.0f;

  friend bool operator==(const Point&, const Point&) = default;
};

struct PointCloud {
  std::vector<Point> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

// Consecutive little-endian float32 quadruples (x, y, z, r).
PointCloud parse_point_cloud(std::span<const std::byte> bytes);
Bytes serialize_point_cloud(const PointCloud& cloud);
PointCloud load_point_cloud(const std::filesystem::path& path);

enum class ObjectClass {
  kCar,
  kVan,
  kTruck,
  kPedestrian,
  kPersonSitting,
  kCyclist,
  kTram,
  kMisc,
  kDontCare,
};

inline constexpr ObjectClass kAllClasses[] = {
    ObjectClass::kCar,     ObjectClass::kVan,           ObjectClass::kTruck,
    ObjectClass::kPedestrian, ObjectClass::kPersonSitting, ObjectClass::kCyclist,
    ObjectClass::kTram,    ObjectClass::kMisc,          ObjectClass::kDontCare,
};

// The on-disk token ("Person_sitting", "DontCare", ...).
std::string_view class_token(ObjectClass cls);
// Human-readable name ("Person Sitting", "Don't Care", ...).
std::string_view class_display_name(ObjectClass cls);
std::optional<ObjectClass> parse_class_token(std::string_view token);

struct BBox2D {
  double left = 0.0;
  double top = 0.0;
  double right = 0.0;
  double bottom = 0.0;

  double width() const { return right - left; }
  double height() const { return bottom - top; }

  friend bool operator==(const BBox2D&, const BBox2D&) = default;
};

// Object dimensions in the order the label files store them.
struct Dimensions {
  double height = 0.0;
  double width = 0.0;
  double length = 0.0;

  friend bool operator==(const Dimensions&, const Dimensions&) = default;
};

// One label_2 line. `location` is the bottom-face center of the object in
// rectified camera coordinates; `rotation_y` is the yaw about the camera y
// axis. DontCare rows keep their sentinel values (-1, -1000, -10).
struct Annotation {
  ObjectClass label = ObjectClass::kDontCare;
  double truncated = 0.0;
  int occluded = 0;
  double alpha = 0.0;
  BBox2D bbox;
  Dimensions dims;
  Eigen::Vector3d location = Eigen::Vector3d::Zero();
  double rotation_y = 0.0;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct Detection {
  Annotation object;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

std::vector<Annotation> parse_labels(std::string_view text);
// Writes the 15-field form with 6 decimals; DontCare rows included.
std::string write_labels(std::span<const Annotation> annotations);
std::vector<Annotation> load_labels(const std::filesystem::path& path);

std::vector<Detection> parse_detections(std::string_view text);
std::string write_detections(std::span<const Detection> detections);
std::vector<Detection> load_detections(const std::filesystem::path& path);

struct Calibration {
  Eigen::Matrix<double, 3, 4> p2 = Eigen::Matrix<double, 3, 4>::Identity();
  Eigen::Matrix3d r0_rect = Eigen::Matrix3d::Identity();
  Eigen::Matrix<double, 3, 4> tr_velo_to_cam =
      Eigen::Matrix<double, 3, 4>::Identity();

  friend bool operator==(const Calibration&, const Calibration&) = default;
};

// Reads the "P2:", "R0_rect:" and "Tr_velo_to_cam:" rows; other rows (P0,
// P1, P3, Tr_imu_to_velo) are accepted and ignored.
Calibration parse_calib(std::string_view text);
// Writes the three rows with shortest round-trip decimal representation, so
// parse_calib(serialize_calib(c)) == c exactly.
std::string serialize_calib(const Calibration& calib);
Calibration load_calib(const std::filesystem::path& path);

}  // namespace lidarpipe

#endif  // LIDARPIPE_KITTI_IO_H_
