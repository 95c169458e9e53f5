#include "lidarpipe/voxel_encoder.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

#include "lidarpipe/error.h"
#include "lidarpipe/geometry3d.h"
#include "text_util.h"

namespace lidarpipe {

void VoxelConfig::validate() const {
  grid_d();
  grid_h();
  grid_w();
  if (max_points_per_voxel == 0) {
    throw Error(ErrorCode::kBadConfig, "max points per voxel must be at least 1");
  }
}

std::int64_t VoxelConfig::grid_d() const {
  return integral_cell_count(z_range, voxel_z, "z");
}

std::int64_t VoxelConfig::grid_h() const {
  return integral_cell_count(y_range, voxel_y, "y");
}

std::int64_t VoxelConfig::grid_w() const {
  return integral_cell_count(x_range, voxel_x, "x");
}

VoxelGrid voxelize(const PointCloud& cloud, const VoxelConfig& cfg) {
  cfg.validate();
  const std::int64_t depth = cfg.grid_d();
  const std::int64_t height = cfg.grid_h();
  const std::int64_t width = cfg.grid_w();
  const std::size_t max_points = cfg.max_points_per_voxel;
  constexpr std::size_t kF = VoxelGrid::kLidarFeatureDim;

  VoxelGrid grid;
  grid.grid_d = depth;
  grid.grid_h = height;
  grid.grid_w = width;

  // First pass: assign voxels and collect retained point indices.
  std::unordered_map<std::int64_t, std::uint32_t> voxel_of_cell;
  std::vector<std::uint32_t> members;  // K x T point indices
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point& p = cloud.points[i];
    const double x = p.x;
    const double y = p.y;
    const double z = p.z;
    if (!cfg.x_range.contains(x) || !cfg.y_range.contains(y) ||
        !cfg.z_range.contains(z)) {
      continue;
    }
    const std::int64_t iz = cell_index(z, cfg.z_range, cfg.voxel_z, depth);
    const std::int64_t iy = cell_index(y, cfg.y_range, cfg.voxel_y, height);
    const std::int64_t ix = cell_index(x, cfg.x_range, cfg.voxel_x, width);
    const std::int64_t key = (iz * height + iy) * width + ix;
    auto [it, inserted] =
        voxel_of_cell.try_emplace(key, static_cast<std::uint32_t>(grid.coords.size()));
    if (inserted) {
      grid.coords.push_back({static_cast<std::int32_t>(iz),
                             static_cast<std::int32_t>(iy),
                             static_cast<std::int32_t>(ix)});
      grid.counts.push_back(0);
      members.resize(members.size() + max_points, 0);
    }
    const std::uint32_t k = it->second;
    if (grid.counts[k] >= max_points) continue;
    members[k * max_points + grid.counts[k]] = static_cast<std::uint32_t>(i);
    ++grid.counts[k];
  }

  // Second pass: centroids over retained points, then the feature rows.
  const std::size_t num_voxels = grid.coords.size();
  grid.features = PointFeatures<float>(num_voxels, max_points, kF);
  grid.centroids.resize(num_voxels);
  for (std::size_t k = 0; k < num_voxels; ++k) {
    const std::size_t count = grid.counts[k];
    double sx = 0.0;
    double sy = 0.0;
    double sz = 0.0;
    for (std::size_t t = 0; t < count; ++t) {
      const Point& p = cloud.points[members[k * max_points + t]];
      sx += p.x;
      sy += p.y;
      sz += p.z;
    }
    const double inv = 1.0 / static_cast<double>(count);
    const std::array<double, 3> centroid = {sx * inv, sy * inv, sz * inv};
    grid.centroids[k] = centroid;
    for (std::size_t t = 0; t < count; ++t) {
      const Point& p = cloud.points[members[k * max_points + t]];
      grid.features.at(k, t, 0) = p.x;
      grid.features.at(k, t, 1) = p.y;
      grid.features.at(k, t, 2) = p.z;
      grid.features.at(k, t, 3) = p.r;
      grid.features.at(k, t, 4) = static_cast<float>(p.x - centroid[0]);
      grid.features.at(k, t, 5) = static_cast<float>(p.y - centroid[1]);
      grid.features.at(k, t, 6) = static_cast<float>(p.z - centroid[2]);
    }
  }
  return grid;
}

void VfeWeights::validate() const {
  if (out_channels == 0 || out_channels % 2 != 0) {
    throw Error(ErrorCode::kBadWeights,
                "c_out must be even and positive, got " + std::to_string(out_channels));
  }
  if (in_channels == 0) throw Error(ErrorCode::kBadWeights, "c_in must be positive");
  const std::size_t h = half();
  if (linear.size() != in_channels * h) {
    throw Error(ErrorCode::kBadWeights, "linear matrix must be c_in x c_out/2");
  }
  for (const auto* v : {&bias, &bn_scale, &bn_shift, &bn_mean, &bn_var}) {
    if (v->size() != h) {
      throw Error(ErrorCode::kBadWeights, "per-channel vectors must have c_out/2 entries");
    }
  }
  if (!(epsilon >= 0.0)) throw Error(ErrorCode::kBadWeights, "epsilon must be >= 0");
  for (std::size_t c = 0; c < h; ++c) {
    if (!(bn_var[c] >= 0.0) || !(bn_var[c] + epsilon > 0.0)) {
      throw Error(ErrorCode::kBadWeights, "batch-norm variance must be >= 0 with a "
                                          "positive denominator");
    }
  }
}

VfeWeights VfeWeights::passthrough(std::size_t in_channels,
                                   std::size_t out_channels) {
  VfeWeights w;
  w.in_channels = in_channels;
  w.out_channels = out_channels;
  const std::size_t h = out_channels / 2;
  w.linear.assign(in_channels * h, 0.0);
  for (std::size_t i = 0; i < std::min(in_channels, h); ++i) w.linear[i * h + i] = 1.0;
  w.bias.assign(h, 0.0);
  w.bn_scale.assign(h, 1.0);
  w.bn_shift.assign(h, 0.0);
  w.bn_mean.assign(h, 0.0);
  w.bn_var.assign(h, 1.0);
  w.epsilon = 0.0;
  return w;
}

VfeWeights parse_vfe_weights(std::string_view text) {
  std::vector<double> numbers;
  for (const auto raw_line : split_lines(text)) {
    auto line = raw_line;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    for (const auto token : split_whitespace(line)) {
      const auto value = parse_double(token);
      if (!value || !std::isfinite(*value)) {
        throw Error(ErrorCode::kBadWeights, "bad number '" + std::string(token) + "'");
      }
      numbers.push_back(*value);
    }
  }
  if (numbers.size() < 2 || numbers[0] < 1 || numbers[1] < 1 ||
      numbers[0] != std::floor(numbers[0]) || numbers[1] != std::floor(numbers[1])) {
    throw Error(ErrorCode::kBadWeights, "weights must start with integer c_in c_out");
  }
  VfeWeights w;
  w.in_channels = static_cast<std::size_t>(numbers[0]);
  w.out_channels = static_cast<std::size_t>(numbers[1]);
  if (w.out_channels % 2 != 0) {
    throw Error(ErrorCode::kBadWeights, "c_out must be even");
  }
  const std::size_t h = w.half();
  const std::size_t expected = 2 + w.in_channels * h + 5 * h + 1;
  if (numbers.size() != expected) {
    throw Error(ErrorCode::kBadWeights, "expected " + std::to_string(expected) +
                                            " numbers, got " +
                                            std::to_string(numbers.size()));
  }
  auto cursor = numbers.begin() + 2;
  auto take = [&](std::size_t n) {
    std::vector<double> out(cursor, cursor + static_cast<std::ptrdiff_t>(n));
    cursor += static_cast<std::ptrdiff_t>(n);
    return out;
  };
  w.linear = take(w.in_channels * h);
  w.bias = take(h);
  w.bn_scale = take(h);
  w.bn_shift = take(h);
  w.bn_mean = take(h);
  w.bn_var = take(h);
  w.epsilon = *cursor;
  w.validate();
  return w;
}

template <typename Scalar>
PointFeatures<Scalar> vfe_layer(const PointFeatures<Scalar>& input,
                                std::span<const std::uint32_t> counts,
                                const VfeWeights& weights) {
  weights.validate();
  if (input.channels != weights.in_channels) {
    throw Error(ErrorCode::kBadWeights,
                "input has " + std::to_string(input.channels) +
                    " channels, weights expect " + std::to_string(weights.in_channels));
  }
  if (counts.size() != input.num_voxels) {
    throw Error(ErrorCode::kBadWeights, "counts length differs from voxel count");
  }
  const std::size_t h = weights.half();
  const std::size_t c_in = weights.in_channels;

  // Fold bias and batch norm into one affine map per channel:
  // bn(z) = gain * z + offset, z = f . W[:, c] + bias[c].
  std::vector<Scalar> gain(h);
  std::vector<Scalar> offset(h);
  for (std::size_t c = 0; c < h; ++c) {
    const double g = weights.bn_scale[c] / std::sqrt(weights.bn_var[c] + weights.epsilon);
    gain[c] = static_cast<Scalar>(g);
    offset[c] = static_cast<Scalar>(g * (weights.bias[c] - weights.bn_mean[c]) +
                                    weights.bn_shift[c]);
  }
  std::vector<Scalar> matrix(weights.linear.begin(), weights.linear.end());

  PointFeatures<Scalar> out(input.num_voxels, input.max_points, weights.out_channels);
  std::vector<Scalar> pooled(h);
  for (std::size_t k = 0; k < input.num_voxels; ++k) {
    const std::size_t count = std::min<std::size_t>(counts[k], input.max_points);
    std::fill(pooled.begin(), pooled.end(), Scalar(0));
    for (std::size_t t = 0; t < count; ++t) {
      const auto row = input.row(k, t);
      for (std::size_t c = 0; c < h; ++c) {
        Scalar z = 0;
        for (std::size_t i = 0; i < c_in; ++i) z += row[i] * matrix[i * h + c];
        const Scalar activated = std::max(Scalar(0), gain[c] * z + offset[c]);
        out.at(k, t, c) = activated;
        // ReLU outputs are >= 0, so a zero start is the identity for max.
        pooled[c] = std::max(pooled[c], activated);
      }
    }
    for (std::size_t t = 0; t < count; ++t) {
      for (std::size_t c = 0; c < h; ++c) out.at(k, t, h + c) = pooled[c];
    }
  }
  return out;
}

template <typename Scalar>
std::vector<Scalar> aggregate_voxels(const PointFeatures<Scalar>& input,
                                     std::span<const std::uint32_t> counts) {
  if (counts.size() != input.num_voxels) {
    throw Error(ErrorCode::kBadConfig, "counts length differs from voxel count");
  }
  std::vector<Scalar> out(input.num_voxels * input.channels, Scalar(0));
  for (std::size_t k = 0; k < input.num_voxels; ++k) {
    const std::size_t count = std::min<std::size_t>(counts[k], input.max_points);
    if (count == 0) continue;
    for (std::size_t c = 0; c < input.channels; ++c) {
      Scalar best = -std::numeric_limits<Scalar>::infinity();
      for (std::size_t t = 0; t < count; ++t) best = std::max(best, input.at(k, t, c));
      out[k * input.channels + c] = best;
    }
  }
  return out;
}

template PointFeatures<float> vfe_layer(const PointFeatures<float>&,
                                        std::span<const std::uint32_t>,
                                        const VfeWeights&);
template PointFeatures<double> vfe_layer(const PointFeatures<double>&,
                                         std::span<const std::uint32_t>,
                                         const VfeWeights&);
template std::vector<float> aggregate_voxels(const PointFeatures<float>&,
                                             std::span<const std::uint32_t>);
template std::vector<double> aggregate_voxels(const PointFeatures<double>&,
                                              std::span<const std::uint32_t>);

ImageFeatureMap parse_feature_map(std::span<const std::byte> bytes) {
  if (bytes.size() < 12) {
    throw Error(ErrorCode::kBadConfig, "feature map shorter than its header");
  }
  ImageFeatureMap map;
  map.channels = read_u32_le(bytes, 0);
  map.height = read_u32_le(bytes, 4);
  map.width = read_u32_le(bytes, 8);
  const std::size_t count = map.channels * map.height * map.width;
  if (bytes.size() != 12 + 4 * count) {
    throw Error(ErrorCode::kBadConfig, "feature map size disagrees with header");
  }
  map.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) map.data[i] = read_f32_le(bytes, 12 + 4 * i);
  return map;
}

Bytes write_feature_map(const ImageFeatureMap& map) {
  Bytes out;
  out.reserve(12 + 4 * map.data.size());
  append_u32_le(out, static_cast<std::uint32_t>(map.channels));
  append_u32_le(out, static_cast<std::uint32_t>(map.height));
  append_u32_le(out, static_cast<std::uint32_t>(map.width));
  for (const float v : map.data) append_f32_le(out, v);
  return out;
}

VoxelGrid append_image_features(const VoxelGrid& grid, const ImageFeatureMap& map,
                                const Calibration& calib) {
  constexpr std::size_t kLidar = VoxelGrid::kLidarFeatureDim;
  constexpr std::size_t kImage = VoxelGrid::kImageFeatureDim;
  if (grid.features.channels != kLidar) {
    throw Error(ErrorCode::kBadConfig, "image features append to 7-channel grids only");
  }
  if (map.channels != kImage || map.data.size() != map.channels * map.height * map.width) {
    throw Error(ErrorCode::kBadConfig, "image feature map must be 16 x H x W");
  }

  VoxelGrid fused = grid;
  fused.features = PointFeatures<float>(grid.size(), grid.features.max_points,
                                        VoxelGrid::kFusedFeatureDim);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    for (std::size_t t = 0; t < grid.counts[k]; ++t) {
      for (std::size_t c = 0; c < kLidar; ++c) {
        fused.features.at(k, t, c) = grid.features.at(k, t, c);
      }
      const Eigen::Vector3d lidar(grid.features.at(k, t, 0), grid.features.at(k, t, 1),
                                  grid.features.at(k, t, 2));
      const auto pixel = project_point(lidar_to_camera(lidar, calib), calib);
      if (!pixel) continue;
      const double col = std::round(pixel->u);
      const double row = std::round(pixel->v);
      if (col < 0.0 || row < 0.0 || col >= static_cast<double>(map.width) ||
          row >= static_cast<double>(map.height)) {
        continue;
      }
      const auto x = static_cast<std::size_t>(col);
      const auto y = static_cast<std::size_t>(row);
      for (std::size_t c = 0; c < kImage; ++c) {
        fused.features.at(k, t, kLidar + c) = map.at(c, y, x);
      }
    }
  }
  return fused;
}

std::vector<float> SparseTensor::densify() const {
  const std::size_t plane = static_cast<std::size_t>(depth) * height * width;
  std::vector<float> dense(channels * plane, 0.0f);
  for (std::size_t k = 0; k < coords.size(); ++k) {
    const VoxelCoord& v = coords[k];
    const std::size_t cell =
        (static_cast<std::size_t>(v.iz) * height + static_cast<std::size_t>(v.iy)) * width +
        static_cast<std::size_t>(v.ix);
    for (std::size_t c = 0; c < channels; ++c) {
      dense[c * plane + cell] = values[k * channels + c];
    }
  }
  return dense;
}

SparseTensor to_sparse_tensor(const VoxelGrid& grid,
                              std::span<const float> voxel_features,
                              std::size_t channels) {
  if (voxel_features.size() != grid.size() * channels) {
    throw Error(ErrorCode::kBadConfig, "voxel features must be K x C");
  }
  SparseTensor tensor;
  tensor.channels = static_cast<std::uint32_t>(channels);
  tensor.depth = static_cast<std::uint32_t>(grid.grid_d);
  tensor.height = static_cast<std::uint32_t>(grid.grid_h);
  tensor.width = static_cast<std::uint32_t>(grid.grid_w);
  for (const VoxelCoord& v : grid.coords) {
    if (v.iz < 0 || v.iy < 0 || v.ix < 0 || v.iz >= grid.grid_d ||
        v.iy >= grid.grid_h || v.ix >= grid.grid_w) {
      throw Error(ErrorCode::kCoordOutOfGrid,
                  "voxel (" + std::to_string(v.iz) + ", " + std::to_string(v.iy) +
                      ", " + std::to_string(v.ix) + ") outside the grid");
    }
  }
  tensor.coords = grid.coords;
  tensor.values.assign(voxel_features.begin(), voxel_features.end());
  return tensor;
}

Bytes write_sparse_dump(const SparseTensor& tensor) {
  Bytes out;
  append_u32_le(out, static_cast<std::uint32_t>(tensor.coords.size()));
  append_u32_le(out, tensor.channels);
  append_u32_le(out, tensor.depth);
  append_u32_le(out, tensor.height);
  append_u32_le(out, tensor.width);
  for (const VoxelCoord& v : tensor.coords) {
    append_u32_le(out, static_cast<std::uint32_t>(v.iz));
    append_u32_le(out, static_cast<std::uint32_t>(v.iy));
    append_u32_le(out, static_cast<std::uint32_t>(v.ix));
  }
  for (const float value : tensor.values) append_f32_le(out, value);
  return out;
}

SparseTensor read_sparse_dump(std::span<const std::byte> bytes) {
  if (bytes.size() < 20) {
    throw Error(ErrorCode::kMalformedCloud, "sparse dump shorter than its header");
  }
  const std::size_t num = read_u32_le(bytes, 0);
  SparseTensor tensor;
  tensor.channels = read_u32_le(bytes, 4);
  tensor.depth = read_u32_le(bytes, 8);
  tensor.height = read_u32_le(bytes, 12);
  tensor.width = read_u32_le(bytes, 16);
  if (bytes.size() != 20 + 12 * num + 4 * num * tensor.channels) {
    throw Error(ErrorCode::kMalformedCloud, "sparse dump size disagrees with header");
  }
  std::size_t offset = 20;
  tensor.coords.resize(num);
  for (auto& v : tensor.coords) {
    v.iz = static_cast<std::int32_t>(read_u32_le(bytes, offset));
    v.iy = static_cast<std::int32_t>(read_u32_le(bytes, offset + 4));
    v.ix = static_cast<std::int32_t>(read_u32_le(bytes, offset + 8));
    offset += 12;
  }
  tensor.values.resize(num * tensor.channels);
  for (auto& value : tensor.values) {
    value = read_f32_le(bytes, offset);
    offset += 4;
  }
  return tensor;
}

}  // namespace lidarpipe
