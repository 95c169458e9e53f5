#ifndef LIDARPIPE_VOXEL_ENCODER_H_
#define LIDARPIPE_VOXEL_ENCODER_H_

// Voxel front end: 3D voxelization with 7 per-point features
// (x, y, z, r, x - v_x, y - v_y, z - v_z), optional fusion of a 16-channel
// image feature map, the VFE layer evaluated with supplied weights, and the
// sparse C x D' x H' x W' output tensor.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "lidarpipe/binary_io.h"
#include "lidarpipe/grid.h"
#include "lidarpipe/kitti_io.h"

namespace lidarpipe {

struct VoxelConfig {
  Range x_range{0.0, 70.4};
  Range y_range{-40.0, 40.0};
  Range z_range{-3.0, 1.0};
  double voxel_x = 0.2;  // v_W
  double voxel_y = 0.2;  // v_H
  double voxel_z = 0.4;  // v_D
  std::size_t max_points_per_voxel = 35;

  // Throws Error(kBadConfig) unless every axis holds a whole number of voxels
  // and the point cap is at least 1.
  void validate() const;
  std::int64_t grid_d() const;  // along z
  std::int64_t grid_h() const;  // along y
  std::int64_t grid_w() const;  // along x
};

struct VoxelCoord {
  std::int32_t iz = 0;
  std::int32_t iy = 0;
  std::int32_t ix = 0;

  friend bool operator==(const VoxelCoord&, const VoxelCoord&) = default;
};

// K x T x F block of per-point features, row (k, t) at (k * T + t) * F.
template <typename Scalar>
struct PointFeatures {
  std::size_t num_voxels = 0;
  std::size_t max_points = 0;
  std::size_t channels = 0;
  std::vector<Scalar> data;

  PointFeatures() = default;
  PointFeatures(std::size_t k, std::size_t t, std::size_t f)
      : num_voxels(k), max_points(t), channels(f), data(k * t * f, Scalar(0)) {}

  Scalar at(std::size_t k, std::size_t t, std::size_t c) const {
    return data[(k * max_points + t) * channels + c];
  }
  Scalar& at(std::size_t k, std::size_t t, std::size_t c) {
    return data[(k * max_points + t) * channels + c];
  }
  std::span<const Scalar> row(std::size_t k, std::size_t t) const {
    return {data.data() + (k * max_points + t) * channels, channels};
  }

  friend bool operator==(const PointFeatures&, const PointFeatures&) = default;
};

struct VoxelGrid {
  static constexpr std::size_t kLidarFeatureDim = 7;
  static constexpr std::size_t kImageFeatureDim = 16;
  static constexpr std::size_t kFusedFeatureDim = kLidarFeatureDim + kImageFeatureDim;

  std::int64_t grid_d = 0;
  std::int64_t grid_h = 0;
  std::int64_t grid_w = 0;
  std::vector<VoxelCoord> coords;        // K, unique, first-occurrence order
  PointFeatures<float> features;         // K x T x F
  std::vector<std::uint32_t> counts;     // K
  std::vector<std::array<double, 3>> centroids;  // K, mean of retained points

  std::size_t size() const { return coords.size(); }

  friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;
};

// Keep-first T points per voxel, voxels ordered by first occurrence. Points
// on the max face of any range are outside.
VoxelGrid voxelize(const PointCloud& cloud, const VoxelConfig& cfg);

// Linear (c_in x c_out/2, row-major) + inference batch norm + ReLU.
struct VfeWeights {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::vector<double> linear;
  std::vector<double> bias;
  std::vector<double> bn_scale;
  std::vector<double> bn_shift;
  std::vector<double> bn_mean;
  std::vector<double> bn_var;
  double epsilon = 1e-3;

  std::size_t half() const { return out_channels / 2; }
  // Throws Error(kBadWeights) for odd c_out, size mismatches, negative
  // variance or a non-positive bn denominator.
  void validate() const;

  // Copies the first min(c_in, c_out/2) input channels into the point-wise
  // half; batch norm is the identity.
  static VfeWeights passthrough(std::size_t in_channels, std::size_t out_channels);
};

// Text form: "c_in c_out" then the linear matrix row by row, bias, bn_scale,
// bn_shift, bn_mean, bn_var (c_out/2 values each) and epsilon, all
// whitespace separated. '#' starts a comment.
VfeWeights parse_vfe_weights(std::string_view text);

// For every valid point: h = relu(bn(linear(f))). Each output row is
// concat(h, m) with m the element-wise max of h over the voxel's valid points.
// Invalid slots stay zero. Instantiated for float and double.
template <typename Scalar>
PointFeatures<Scalar> vfe_layer(const PointFeatures<Scalar>& input,
                                std::span<const std::uint32_t> counts,
                                const VfeWeights& weights);

// K x C element-wise max over each voxel's valid rows (zero for an empty
// voxel), the per-voxel descriptor fed to the sparse tensor.
template <typename Scalar>
std::vector<Scalar> aggregate_voxels(const PointFeatures<Scalar>& input,
                                     std::span<const std::uint32_t> counts);

// Dense C x H x W image feature map, sampled at the nearest pixel.
struct ImageFeatureMap {
  std::size_t channels = VoxelGrid::kImageFeatureDim;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;

  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * height + y) * width + x];
  }
  float& at(std::size_t c, std::size_t y, std::size_t x) {
    return data[(c * height + y) * width + x];
  }
};

// File layout: C, H, W as uint32 LE followed by C*H*W float32 LE.
ImageFeatureMap parse_feature_map(std::span<const std::byte> bytes);
Bytes write_feature_map(const ImageFeatureMap& map);

// Appends the 16 image channels to every valid point of a 7-channel grid.
// Points behind the camera or projecting outside the map get zeros.
VoxelGrid append_image_features(const VoxelGrid& grid, const ImageFeatureMap& map,
                                const Calibration& calib);

struct SparseTensor {
  std::uint32_t channels = 0;
  std::uint32_t depth = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<VoxelCoord> coords;
  std::vector<float> values;  // coords.size() x channels

  // Zero-filled C x D' x H' x W' array.
  std::vector<float> densify() const;

  friend bool operator==(const SparseTensor&, const SparseTensor&) = default;
};

// `voxel_features` is K x C row-major. Throws Error(kCoordOutOfGrid) for a
// coordinate outside the grid.
SparseTensor to_sparse_tensor(const VoxelGrid& grid,
                              std::span<const float> voxel_features,
                              std::size_t channels);

// Dump layout: K, C, D', H', W' as uint32 LE; then K coordinate triples
// (iz, iy, ix) as uint32 LE; then K x C float32 LE values.
Bytes write_sparse_dump(const SparseTensor& tensor);
SparseTensor read_sparse_dump(std::span<const std::byte> bytes);

}  // namespace lidarpipe

#endif  // LIDARPIPE_VOXEL_ENCODER_H_
