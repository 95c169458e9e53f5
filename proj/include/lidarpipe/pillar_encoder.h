#ifndef LIDARPIPE_PILLAR_ENCODER_H_
#define LIDARPIPE_PILLAR_ENCODER_H_

// Pillar front end: buckets points into full-height XY columns, augments each
// point to 9 features and packs the result into a dense D x P x N pseudo
// image.
//
// Per-point features, in channel order:
//   0..3  x, y, z, r
//   4..6  x - x_c, y - y_c, z - z_c   (offset from the pillar's point centroid)
//   7..8  x_g, y_g                    (geometric center of the pillar cell)

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lidarpipe/binary_io.h"
#include "lidarpipe/grid.h"
#include "lidarpipe/kitti_io.h"

namespace lidarpipe {

struct PillarConfig {
  Range x_range{0.0, 69.12};
  Range y_range{-39.68, 39.68};
  Range z_range{-3.0, 1.0};
  double pillar_dx = 0.16;
  double pillar_dy = 0.16;
  std::size_t max_pillars = 12000;
  std::size_t max_points_per_pillar = 100;

  // Throws Error(kBadConfig) on empty ranges, non-positive sizes, zero caps or
  // a non-integral grid.
  void validate() const;
  std::int64_t grid_nx() const;
  std::int64_t grid_ny() const;
};

struct PillarCoord {
  std::int32_t ix = 0;
  std::int32_t iy = 0;

  friend bool operator==(const PillarCoord&, const PillarCoord&) = default;
};

struct PillarTensor {
  static constexpr std::size_t kFeatureDim = 9;

  std::size_t max_pillars = 0;  // P
  std::size_t max_points = 0;   // N
  // D-major: feature d of slot n in pillar p lives at (d * P + p) * N + n.
  std::vector<float> features;
  std::vector<PillarCoord> pillar_coords;  // length P
  std::vector<std::uint32_t> counts;       // length P
  std::size_t num_nonempty = 0;

  float at(std::size_t d, std::size_t p, std::size_t n) const {
    return features[(d * max_pillars + p) * max_points + n];
  }
  float& at(std::size_t d, std::size_t p, std::size_t n) {
    return features[(d * max_pillars + p) * max_points + n];
  }

  friend bool operator==(const PillarTensor&, const PillarTensor&) = default;
};

// Keep-first caps in input order: pillars are numbered by the first point
// that lands in them, and only the first N points of a pillar are retained.
// Centroids are taken over the retained points.
PillarTensor encode_pillars(const PointCloud& cloud, const PillarConfig& cfg);

// Maps a point to its pillar cell, or returns false when it is out of range.
bool pillar_cell_of(const Point& p, const PillarConfig& cfg, PillarCoord& cell);

// C x H x W grid with H = grid_ny rows (indexed by iy) and W = grid_nx.
struct Canvas {
  std::size_t channels = 0;
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

enum class Reducer { kMean, kMax };

// Reduces each non-empty pillar's 9 raw features over its valid points and
// writes the result at (iy, ix). Throws Error(kCoordOutOfGrid) for a pillar
// outside the grid.
Canvas scatter_to_canvas(const PillarTensor& pillars, std::size_t grid_nx,
                         std::size_t grid_ny, Reducer reducer);

// Scatters externally computed per-pillar vectors, num_nonempty x channels in
// row-major order.
Canvas scatter_to_canvas(const PillarTensor& pillars, std::size_t grid_nx,
                         std::size_t grid_ny,
                         std::span<const float> pillar_features,
                         std::size_t channels);

// The D x P x N feature block as stored in a dump file.
struct PseudoImage {
  std::uint32_t feature_dim = 0;
  std::uint32_t max_pillars = 0;
  std::uint32_t max_points = 0;
  std::vector<float> features;
};

// Dump layout: D, P, N as uint32 LE, then D*P*N float32 LE in D-major order.
Bytes write_pillar_dump(const PillarTensor& pillars);
// Throws Error(kMalformedCloud) when the byte count disagrees with the header.
PseudoImage read_pillar_dump(std::span<const std::byte> bytes);

}  // namespace lidarpipe

#endif  // LIDARPIPE_PILLAR_ENCODER_H_
