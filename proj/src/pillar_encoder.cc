#include "lidarpipe/pillar_encoder.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lidarpipe/error.h"

namespace lidarpipe {

void PillarConfig::validate() const {
  grid_nx();
  grid_ny();
  if (!std::isfinite(z_range.min) || !std::isfinite(z_range.max) ||
      !(z_range.max > z_range.min)) {
    throw Error(ErrorCode::kBadConfig, "z range is empty");
  }
  if (max_pillars == 0 || max_points_per_pillar == 0) {
    throw Error(ErrorCode::kBadConfig, "pillar caps must be at least 1");
  }
}

std::int64_t PillarConfig::grid_nx() const {
  return integral_cell_count(x_range, pillar_dx, "x");
}

std::int64_t PillarConfig::grid_ny() const {
  return integral_cell_count(y_range, pillar_dy, "y");
}

bool pillar_cell_of(const Point& p, const PillarConfig& cfg, PillarCoord& cell) {
  const double x = p.x;
  const double y = p.y;
  const double z = p.z;
  if (!cfg.x_range.contains(x) || !cfg.y_range.contains(y) ||
      !cfg.z_range.contains(z)) {
    return false;
  }
  cell.ix = static_cast<std::int32_t>(
      cell_index(x, cfg.x_range, cfg.pillar_dx, cfg.grid_nx()));
  cell.iy = static_cast<std::int32_t>(
      cell_index(y, cfg.y_range, cfg.pillar_dy, cfg.grid_ny()));
  return true;
}

PillarTensor encode_pillars(const PointCloud& cloud, const PillarConfig& cfg) {
  cfg.validate();
  const std::int64_t nx = cfg.grid_nx();
  const std::int64_t ny = cfg.grid_ny();
  const std::size_t num_pillars = cfg.max_pillars;
  const std::size_t num_points = cfg.max_points_per_pillar;

  PillarTensor out;
  out.max_pillars = num_pillars;
  out.max_points = num_points;
  out.features.assign(PillarTensor::kFeatureDim * num_pillars * num_points, 0.0f);
  out.pillar_coords.assign(num_pillars, PillarCoord{});
  out.counts.assign(num_pillars, 0);

  std::vector<std::int32_t> cell_to_pillar(static_cast<std::size_t>(nx * ny), -1);
  std::vector<std::array<double, 3>> sums(num_pillars, {0.0, 0.0, 0.0});

  for (const Point& p : cloud.points) {
    const double x = p.x;
    const double y = p.y;
    const double z = p.z;
    if (!cfg.x_range.contains(x) || !cfg.y_range.contains(y) ||
        !cfg.z_range.contains(z)) {
      continue;
    }
    const std::int64_t ix = cell_index(x, cfg.x_range, cfg.pillar_dx, nx);
    const std::int64_t iy = cell_index(y, cfg.y_range, cfg.pillar_dy, ny);
    std::int32_t& slot = cell_to_pillar[static_cast<std::size_t>(iy * nx + ix)];
    if (slot < 0) {
      if (out.num_nonempty == num_pillars) continue;
      slot = static_cast<std::int32_t>(out.num_nonempty++);
      out.pillar_coords[slot] = {static_cast<std::int32_t>(ix),
                                 static_cast<std::int32_t>(iy)};
    }
    const auto pillar = static_cast<std::size_t>(slot);
    if (out.counts[pillar] >= num_points) continue;
    const std::size_t n = out.counts[pillar]++;

    out.at(0, pillar, n) = p.x;
    out.at(1, pillar, n) = p.y;
    out.at(2, pillar, n) = p.z;
    out.at(3, pillar, n) = p.r;
    out.at(7, pillar, n) = static_cast<float>(
        cfg.x_range.min + (static_cast<double>(ix) + 0.5) * cfg.pillar_dx);
    out.at(8, pillar, n) = static_cast<float>(
        cfg.y_range.min + (static_cast<double>(iy) + 0.5) * cfg.pillar_dy);
    sums[pillar][0] += x;
    sums[pillar][1] += y;
    sums[pillar][2] += z;
  }

  for (std::size_t pillar = 0; pillar < out.num_nonempty; ++pillar) {
    const std::size_t count = out.counts[pillar];
    const double inv = 1.0 / static_cast<double>(count);
    const double cx = sums[pillar][0] * inv;
    const double cy = sums[pillar][1] * inv;
    const double cz = sums[pillar][2] * inv;
    for (std::size_t n = 0; n < count; ++n) {
      out.at(4, pillar, n) = static_cast<float>(out.at(0, pillar, n) - cx);
      out.at(5, pillar, n) = static_cast<float>(out.at(1, pillar, n) - cy);
      out.at(6, pillar, n) = static_cast<float>(out.at(2, pillar, n) - cz);
    }
  }
  return out;
}

namespace {

Canvas blank_canvas(std::size_t channels, std::size_t grid_nx,
                    std::size_t grid_ny) {
  Canvas canvas;
  canvas.channels = channels;
  canvas.height = grid_ny;
  canvas.width = grid_nx;
  canvas.data.assign(channels * grid_ny * grid_nx, 0.0f);
  return canvas;
}

void check_in_grid(const PillarCoord& coord, std::size_t grid_nx,
                   std::size_t grid_ny) {
  if (coord.ix < 0 || coord.iy < 0 ||
      static_cast<std::size_t>(coord.ix) >= grid_nx ||
      static_cast<std::size_t>(coord.iy) >= grid_ny) {
    throw Error(ErrorCode::kCoordOutOfGrid,
                "pillar (" + std::to_string(coord.ix) + ", " +
                    std::to_string(coord.iy) + ") outside " +
                    std::to_string(grid_nx) + "x" + std::to_string(grid_ny));
  }
}

}  // namespace

Canvas scatter_to_canvas(const PillarTensor& pillars, std::size_t grid_nx,
                         std::size_t grid_ny, Reducer reducer) {
  Canvas canvas = blank_canvas(PillarTensor::kFeatureDim, grid_nx, grid_ny);
  for (std::size_t p = 0; p < pillars.num_nonempty; ++p) {
    const PillarCoord coord = pillars.pillar_coords[p];
    check_in_grid(coord, grid_nx, grid_ny);
    const std::size_t count = pillars.counts[p];
    for (std::size_t d = 0; d < PillarTensor::kFeatureDim; ++d) {
      float value = 0.0f;
      if (reducer == Reducer::kMean) {
        double sum = 0.0;
        for (std::size_t n = 0; n < count; ++n) sum += pillars.at(d, p, n);
        value = count > 0 ? static_cast<float>(sum / static_cast<double>(count))
                          : 0.0f;
      } else {
        value = count > 0 ? -std::numeric_limits<float>::infinity() : 0.0f;
        for (std::size_t n = 0; n < count; ++n) {
          value = std::max(value, pillars.at(d, p, n));
        }
      }
      canvas.at(d, static_cast<std::size_t>(coord.iy),
                static_cast<std::size_t>(coord.ix)) = value;
    }
  }
  return canvas;
}

Canvas scatter_to_canvas(const PillarTensor& pillars, std::size_t grid_nx,
                         std::size_t grid_ny,
                         std::span<const float> pillar_features,
                         std::size_t channels) {
  if (pillar_features.size() != pillars.num_nonempty * channels) {
    throw Error(ErrorCode::kBadConfig,
                "expected " + std::to_string(pillars.num_nonempty) + " x " +
                    std::to_string(channels) + " pillar features");
  }
  Canvas canvas = blank_canvas(channels, grid_nx, grid_ny);
  for (std::size_t p = 0; p < pillars.num_nonempty; ++p) {
    const PillarCoord coord = pillars.pillar_coords[p];
    check_in_grid(coord, grid_nx, grid_ny);
    for (std::size_t c = 0; c < channels; ++c) {
      canvas.at(c, static_cast<std::size_t>(coord.iy),
                static_cast<std::size_t>(coord.ix)) = pillar_features[p * channels + c];
    }
  }
  return canvas;
}

Bytes write_pillar_dump(const PillarTensor& pillars) {
  Bytes out;
  out.reserve(12 + 4 * pillars.features.size());
  append_u32_le(out, static_cast<std::uint32_t>(PillarTensor::kFeatureDim));
  append_u32_le(out, static_cast<std::uint32_t>(pillars.max_pillars));
  append_u32_le(out, static_cast<std::uint32_t>(pillars.max_points));
  for (const float v : pillars.features) append_f32_le(out, v);
  return out;
}

PseudoImage read_pillar_dump(std::span<const std::byte> bytes) {
  if (bytes.size() < 12) {
    throw Error(ErrorCode::kMalformedCloud, "pillar dump shorter than its header");
  }
  PseudoImage image;
  image.feature_dim = read_u32_le(bytes, 0);
  image.max_pillars = read_u32_le(bytes, 4);
  image.max_points = read_u32_le(bytes, 8);
  const std::size_t count = static_cast<std::size_t>(image.feature_dim) *
                            image.max_pillars * image.max_points;
  if (bytes.size() != 12 + 4 * count) {
    throw Error(ErrorCode::kMalformedCloud, "pillar dump size disagrees with header");
  }
  image.features.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    image.features[i] = read_f32_le(bytes, 12 + 4 * i);
  }
  return image;
}

}  // namespace lidarpipe
