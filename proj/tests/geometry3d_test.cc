#include "lidarpipe/geometry3d.h"

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "oracles.h"
#include "test_support.h"

namespace lidarpipe {
namespace {

using std::numbers::pi;
using testing_support::error_code_of;
using testing_support::uniform;

Calibration identity_calib() { return Calibration{}; }

Annotation car_label(const Eigen::Vector3d& location, double h, double w, double l,
                     double ry) {
  Annotation a;
  a.label = ObjectClass::kCar;
  a.dims = {h, w, l};
  a.location = location;
  a.rotation_y = ry;
  return a;
}

Calibration random_rigid_calib(std::mt19937_64& rng) {
  const Eigen::Quaterniond q(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1),
                             uniform(rng, -1, 1));
  const Eigen::Quaterniond r(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1),
                             uniform(rng, -1, 1));
  Calibration c;
  c.tr_velo_to_cam.leftCols<3>() = q.normalized().toRotationMatrix();
  c.tr_velo_to_cam.col(3) = Eigen::Vector3d(uniform(rng, -2, 2), uniform(rng, -2, 2),
                                            uniform(rng, -2, 2));
  c.r0_rect = r.normalized().toRotationMatrix();
  return c;
}

TEST(Angles, NormalizeWrapsIntoHalfOpenInterval) {
  EXPECT_DOUBLE_EQ(normalize_angle(0.0), 0.0);
  EXPECT_DOUBLE_EQ(normalize_angle(pi), pi);
  EXPECT_DOUBLE_EQ(normalize_angle(-pi), pi);
  EXPECT_NEAR(normalize_angle(3 * pi / 2), -pi / 2, 1e-12);
  EXPECT_NEAR(normalize_angle(-5 * pi / 2), -pi / 2, 1e-12);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double a = normalize_angle(uniform(rng, -50, 50));
    EXPECT_GT(a, -pi);
    EXPECT_LE(a, pi);
  }
}

TEST(Box, MakeValidatesAndNormalizes) {
  EXPECT_EQ(error_code_of([] { Box3D::make({0, 0, 0}, 0.0, 1, 1, 0); }), "BadBox");
  EXPECT_EQ(error_code_of([] { Box3D::make({0, 0, 0}, 1, -1, 1, 0); }), "BadBox");
  EXPECT_EQ(error_code_of([] { Box3D::make({0, std::nan(""), 0}, 1, 1, 1, 0); }), "BadBox");
  EXPECT_NEAR(Box3D::make({0, 0, 0}, 1, 1, 1, 3 * pi).yaw, pi, 1e-12);
}

TEST(LidarToCamera, IdentityCalibration) {
  EXPECT_EQ(lidar_to_camera(Eigen::Vector3d(2, 4, 10), identity_calib()),
            Eigen::Vector3d(2, 4, 10));
}

TEST(LidarToCamera, PureTranslation) {
  Calibration c;
  c.tr_velo_to_cam(2, 3) = 1.0;
  EXPECT_EQ(lidar_to_camera(Eigen::Vector3d(0, 0, 0), c), Eigen::Vector3d(0, 0, 1));
}

TEST(LidarToCamera, RigidTransformPreservesDistances) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Calibration c = random_rigid_calib(rng);
    const PointCloud cloud = testing_support::random_cloud(rng, 50, -30, 30, -30, 30, -3, 3);
    const auto cam = lidar_to_camera(cloud, c);
    ASSERT_EQ(cam.size(), cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      for (std::size_t j = i + 1; j < cloud.size(); ++j) {
        const Eigen::Vector3d a(cloud.points[i].x, cloud.points[i].y, cloud.points[i].z);
        const Eigen::Vector3d b(cloud.points[j].x, cloud.points[j].y, cloud.points[j].z);
        EXPECT_NEAR((cam[i] - cam[j]).norm(), (a - b).norm(), 1e-9);
      }
    }
  }
}

TEST(LidarToCamera, CameraToLidarInverts) {
  std::mt19937_64 rng(3);
  const Calibration c = testing_support::kitti_calibration();
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d p(uniform(rng, -50, 50), uniform(rng, -50, 50), uniform(rng, -3, 3));
    EXPECT_LT((camera_to_lidar(lidar_to_camera(p, c), c) - p).norm(), 1e-9);
  }
}

TEST(Projection, IdentityP2DividesByDepth) {
  const auto ip = project_point({2, 4, 10}, identity_calib());
  ASSERT_TRUE(ip.has_value());
  EXPECT_DOUBLE_EQ(ip->u, 0.2);
  EXPECT_DOUBLE_EQ(ip->v, 0.4);
  EXPECT_DOUBLE_EQ(ip->depth, 10.0);
}

TEST(Projection, PointsBehindCameraAreExcluded) {
  EXPECT_FALSE(project_point({0, 0, -1}, identity_calib()).has_value());
  EXPECT_FALSE(project_point({1, 1, 0}, identity_calib()).has_value());
  const std::vector<Eigen::Vector3d> pts = {{1, 1, 5}, {0, 0, -1}, {2, 2, 4}};
  const auto out = project_to_image(pts, identity_calib());
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].source_index, 0u);
  EXPECT_EQ(out[1].source_index, 2u);
  EXPECT_DOUBLE_EQ(out[1].u, 0.5);
}

TEST(Projection, PrincipalPoint) {
  Calibration c;
  c.p2 << 100, 0, 50, 0, 0, 100, 50, 0, 0, 0, 1, 0;
  const auto ip = project_point({0, 0, 10}, c);
  ASSERT_TRUE(ip.has_value());
  EXPECT_DOUBLE_EQ(ip->u, 50.0);
  EXPECT_DOUBLE_EQ(ip->v, 50.0);
  EXPECT_DOUBLE_EQ(ip->depth, 10.0);
}

TEST(LabelConversion, LiftsByHalfHeight) {
  // Identity calibration: the camera point maps to the same LiDAR point,
  // then the center is raised by h/2 along LiDAR z.
  const Box3D box = camera_label_to_lidar_box(car_label({0, 0, 10}, 2.0, 1.5, 4.0, 0.0),
                                              identity_calib());
  EXPECT_NEAR(box.center.x(), 0.0, 1e-12);
  EXPECT_NEAR(box.center.y(), 0.0, 1e-12);
  EXPECT_NEAR(box.center.z(), 10.0 + 1.0, 1e-12);
  EXPECT_EQ(box.height, 2.0);
  EXPECT_EQ(box.width, 1.5);
  EXPECT_EQ(box.length, 4.0);
  EXPECT_EQ(box.frame, Frame::kLidar);
}

TEST(LabelConversion, YawMap) {
  const Calibration c = identity_calib();
  EXPECT_NEAR(camera_label_to_lidar_box(car_label({0, 0, 10}, 1, 1, 1, -pi / 2), c).yaw, 0.0,
              1e-12);
  EXPECT_NEAR(camera_label_to_lidar_box(car_label({0, 0, 10}, 1, 1, 1, 0.0), c).yaw, -pi / 2,
              1e-12);
  EXPECT_NEAR(camera_label_to_lidar_box(car_label({0, 0, 10}, 1, 1, 1, pi / 2), c).yaw, pi,
              1e-12);
}

TEST(LabelConversion, KittiFrameHeadingPointsForward) {
  // With real extrinsics a car facing along the camera x axis (ry = 0)
  // points to LiDAR -y, and camera depth becomes LiDAR x.
  const Calibration c = testing_support::kitti_calibration();
  const Box3D box = camera_label_to_lidar_box(car_label({0, 1.65, 20}, 1.5, 1.6, 4, 0), c);
  EXPECT_NEAR(box.center.x(), 20.0, 0.5);
  EXPECT_NEAR(box.center.y(), 0.0, 0.5);
  EXPECT_NEAR(normalize_angle(box.yaw + pi / 2), 0.0, 0.02);
}

TEST(LabelConversion, DontCareIsRejected) {
  Annotation a;
  a.label = ObjectClass::kDontCare;
  EXPECT_EQ(error_code_of([&] { camera_label_to_lidar_box(a, identity_calib()); }),
            "NotAPhysicalBox");
}

TEST(LabelConversion, RoundTripReproducesLabel) {
  std::mt19937_64 rng(4);
  const Calibration c = testing_support::kitti_calibration();
  for (int i = 0; i < 200; ++i) {
    const Annotation a = car_label({uniform(rng, -20, 20), uniform(rng, 0, 3), uniform(rng, 5, 60)},
                                   uniform(rng, 1, 3), uniform(rng, 1, 2), uniform(rng, 3, 6),
                                   uniform(rng, -pi, pi));
    const Box3D box = camera_label_to_lidar_box(a, c);
    const Annotation back = lidar_box_to_camera_label(box, ObjectClass::kCar, c);
    EXPECT_LT((back.location - a.location).norm(), 1e-9);
    EXPECT_NEAR(normalize_angle(back.rotation_y - a.rotation_y), 0.0, 1e-9);
    EXPECT_NEAR(back.dims.height, a.dims.height, 1e-12);
    EXPECT_NEAR(back.dims.width, a.dims.width, 1e-12);
    EXPECT_NEAR(back.dims.length, a.dims.length, 1e-12);
    // And the other direction.
    const Box3D again = camera_label_to_lidar_box(back, c);
    EXPECT_LT((again.center - box.center).norm(), 1e-9);
  }
}

TEST(LabelConversion, ImageBoxHullsProjectedCorners) {
  const Calibration c = testing_support::kitti_calibration();
  const Box3D box = Box3D::make({15, 1, -0.9}, 4, 1.7, 1.5, 0.3);
  const Annotation a = lidar_box_to_camera_label(box, ObjectClass::kCar, c);
  double left = 1e9, right = -1e9, top = 1e9, bottom = -1e9;
  for (const auto& corner : box_corners(box)) {
    const auto ip = project_point(lidar_to_camera(corner, c), c);
    ASSERT_TRUE(ip.has_value());
    left = std::min(left, ip->u);
    right = std::max(right, ip->u);
    top = std::min(top, ip->v);
    bottom = std::max(bottom, ip->v);
  }
  EXPECT_NEAR(a.bbox.left, left, 1e-9);
  EXPECT_NEAR(a.bbox.right, right, 1e-9);
  EXPECT_NEAR(a.bbox.top, top, 1e-9);
  EXPECT_NEAR(a.bbox.bottom, bottom, 1e-9);
}

TEST(Corners, UnitCube) {
  const auto corners = box_corners(Box3D::make({0, 0, 0}, 1, 1, 1, 0));
  for (const auto& c : corners) {
    EXPECT_DOUBLE_EQ(std::abs(c.x()), 0.5);
    EXPECT_DOUBLE_EQ(std::abs(c.y()), 0.5);
    EXPECT_DOUBLE_EQ(std::abs(c.z()), 0.5);
  }
  EXPECT_EQ(corners[0], Eigen::Vector3d(0.5, 0.5, -0.5));
  EXPECT_EQ(corners[1], Eigen::Vector3d(-0.5, 0.5, -0.5));
  EXPECT_EQ(corners[2], Eigen::Vector3d(-0.5, -0.5, -0.5));
  EXPECT_EQ(corners[3], Eigen::Vector3d(0.5, -0.5, -0.5));
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(corners[i + 4].head<2>(), corners[i].head<2>());
    EXPECT_EQ(corners[i + 4].z(), 0.5);
  }
}

TEST(Corners, QuarterTurnSwapsFootprintExtents) {
  const auto corners = box_corners(Box3D::make({0, 0, 0}, 4, 2, 1, pi / 2));
  double max_x = 0, max_y = 0;
  for (const auto& c : corners) {
    max_x = std::max(max_x, std::abs(c.x()));
    max_y = std::max(max_y, std::abs(c.y()));
  }
  EXPECT_NEAR(max_x, 1.0, 1e-12);
  EXPECT_NEAR(max_y, 2.0, 1e-12);
}

TEST(Corners, CentroidIsCenterAndFaceIsCounterClockwise) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const Box3D b = testing_support::random_box(rng);
    const auto corners = box_corners(b);
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (const auto& c : corners) sum += c;
    EXPECT_LT((sum / 8.0 - b.center).norm(), 1e-12);
    const auto fp = footprint(b);
    double twice_area = 0.0;
    for (int k = 0; k < 4; ++k) {
      const auto& p = fp[k];
      const auto& q = fp[(k + 1) % 4];
      twice_area += p.x() * q.y() - q.x() * p.y();
    }
    EXPECT_NEAR(0.5 * twice_area, b.length * b.width, 1e-9);
  }
}

TEST(RotatedIou, HandCases) {
  const Box3D unit = Box3D::make({0, 0, 0}, 1, 1, 1, 0);
  EXPECT_NEAR(rotated_iou_bev(unit, unit), 1.0, 1e-12);
  EXPECT_EQ(rotated_iou_bev(unit, Box3D::make({5, 0, 0}, 1, 1, 1, 0)), 0.0);
  EXPECT_NEAR(rotated_iou_bev(unit, Box3D::make({0.5, 0, 0}, 1, 1, 1, 0)), 1.0 / 3.0, 1e-9);
  // Edge contact has measure zero.
  EXPECT_EQ(rotated_iou_bev(unit, Box3D::make({1, 0, 0}, 1, 1, 1, 0)), 0.0);
  // A square turned by 45 degrees inside a larger square.
  const Box3D big = Box3D::make({0, 0, 0}, 2, 2, 1, 0);
  EXPECT_NEAR(rotated_iou_bev(big, Box3D::make({0, 0, 0}, 1, 1, 1, pi / 4)), 0.25, 1e-12);
  // Half turn describes the same footprint.
  const Box3D r = Box3D::make({1, 2, 0}, 4, 2, 1, 0.3);
  EXPECT_NEAR(rotated_iou_bev(r, Box3D::make({1, 2, 0}, 4, 2, 1, 0.3 + pi)), 1.0, 1e-12);
}

TEST(RotatedIou, SymmetricAndBounded) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 500; ++i) {
    const Box3D a = testing_support::random_box(rng, 3.0);
    const Box3D b = testing_support::nearby_box(rng, a);
    const double ab = rotated_iou_bev(a, b);
    EXPECT_NEAR(ab, rotated_iou_bev(b, a), 1e-12);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0 + 1e-12);
    const double v = iou_3d(a, b);
    EXPECT_NEAR(v, iou_3d(b, a), 1e-12);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0 + 1e-12);
  }
}

TEST(RotatedIou, FrameMismatchIsRejected) {
  const Box3D a = Box3D::make({0, 0, 0}, 1, 1, 1, 0, Frame::kLidar);
  const Box3D b = Box3D::make({0, 0, 0}, 1, 1, 1, 0, Frame::kCamera);
  EXPECT_EQ(error_code_of([&] { rotated_iou_bev(a, b); }), "BadBox");
}

TEST(RotatedIou, AgreesWithMonteCarlo) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 40; ++i) {
    const Box3D a = testing_support::random_box(rng, 3.0);
    const Box3D b = testing_support::nearby_box(rng, a);
    EXPECT_NEAR(rotated_iou_bev(a, b), oracle::monte_carlo_iou_bev(a, b, 600, 100 + i), 5e-3);
  }
}

TEST(Iou3d, HandCases) {
  const Box3D unit = Box3D::make({0, 0, 0}, 1, 1, 1, 0);
  EXPECT_NEAR(iou_3d(unit, unit), 1.0, 1e-12);
  EXPECT_EQ(iou_3d(unit, Box3D::make({0, 0, 1}, 1, 1, 1, 0)), 0.0);
  EXPECT_NEAR(iou_3d(unit, Box3D::make({0.5, 0, 0.5}, 1, 1, 1, 0)), 1.0 / 7.0, 1e-12);
}

TEST(Iou3d, AgreesWithMonteCarlo) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 15; ++i) {
    const Box3D a = testing_support::random_box(rng, 3.0);
    const Box3D b = testing_support::nearby_box(rng, a);
    EXPECT_NEAR(iou_3d(a, b), oracle::monte_carlo_iou_3d(a, b, 100, 200 + i), 5e-3);
  }
}

TEST(ConvexIntersection, HandlesContainmentAndDisjoint) {
  const std::vector<Eigen::Vector2d> sq = {{0, 0}, {2, 0}, {2, 2}, {0, 2}};
  const std::vector<Eigen::Vector2d> inner = {{0.5, 0.5}, {1, 0.5}, {1, 1}, {0.5, 1}};
  const std::vector<Eigen::Vector2d> far = {{5, 5}, {6, 5}, {6, 6}, {5, 6}};
  EXPECT_NEAR(convex_intersection_area(sq, inner), 0.25, 1e-12);
  EXPECT_NEAR(convex_intersection_area(inner, sq), 0.25, 1e-12);
  EXPECT_EQ(convex_intersection_area(sq, far), 0.0);
}

TEST(Nms, SingleBox) {
  const std::vector<Box3D> boxes = {Box3D::make({0, 0, 0}, 1, 1, 1, 0)};
  EXPECT_EQ(nms_rotated(boxes, std::vector<double>{0.3}, 0.5),
            (std::vector<std::size_t>{0}));
}

TEST(Nms, DuplicateKeepsHigherScore) {
  const Box3D b = Box3D::make({0, 0, 0}, 1, 1, 1, 0);
  const std::vector<Box3D> boxes = {b, b};
  EXPECT_EQ(nms_rotated(boxes, std::vector<double>{0.8, 0.9}, 0.5),
            (std::vector<std::size_t>{1}));
}

TEST(Nms, ThirdOverlapAboveThresholdIsSuppressed) {
  const std::vector<Box3D> boxes = {Box3D::make({0, 0, 0}, 1, 1, 1, 0),
                                    Box3D::make({0.5, 0, 0}, 1, 1, 1, 0),
                                    Box3D::make({10, 0, 0}, 1, 1, 1, 0)};
  EXPECT_EQ(nms_rotated(boxes, std::vector<double>{0.9, 0.8, 0.7}, 0.3),
            (std::vector<std::size_t>{0, 2}));
  // At a threshold above 1/3 both survive.
  EXPECT_EQ(nms_rotated(boxes, std::vector<double>{0.9, 0.8, 0.7}, 0.34),
            (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Nms, EqualScoresPreferLowerIndex) {
  const Box3D b = Box3D::make({0, 0, 0}, 1, 1, 1, 0);
  const std::vector<Box3D> boxes = {b, b, b};
  EXPECT_EQ(nms_rotated(boxes, std::vector<double>{0.5, 0.5, 0.5}, 0.5),
            (std::vector<std::size_t>{0}));
}

TEST(Nms, SizeMismatchIsRejected) {
  const std::vector<Box3D> boxes = {Box3D::make({0, 0, 0}, 1, 1, 1, 0)};
  EXPECT_EQ(error_code_of([&] { nms_rotated(boxes, std::vector<double>{}, 0.5); }), "BadBox");
}

TEST(Nms, RetainedSetIsOrderedAndSeparated) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Box3D> boxes;
    std::vector<double> scores;
    for (int i = 0; i < 40; ++i) {
      boxes.push_back(testing_support::random_box(rng, 4.0));
      scores.push_back(uniform(rng, 0, 1));
    }
    const double threshold = uniform(rng, 0.1, 0.7);
    const auto kept = nms_rotated(boxes, scores, threshold);
    ASSERT_FALSE(kept.empty());
    for (std::size_t i = 1; i < kept.size(); ++i) {
      EXPECT_GE(scores[kept[i - 1]], scores[kept[i]]);
    }
    for (std::size_t i = 0; i < kept.size(); ++i) {
      for (std::size_t j = i + 1; j < kept.size(); ++j) {
        EXPECT_LE(rotated_iou_bev(boxes[kept[i]], boxes[kept[j]]), threshold);
      }
    }
    // Every dropped box overlaps some kept box with a higher score.
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (std::find(kept.begin(), kept.end(), i) != kept.end()) continue;
      bool covered = false;
      for (const std::size_t k : kept) {
        covered |= scores[k] >= scores[i] && rotated_iou_bev(boxes[k], boxes[i]) > threshold;
      }
      EXPECT_TRUE(covered);
    }
  }
}

}  // namespace
}  // namespace lidarpipe
