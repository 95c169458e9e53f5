#ifndef LIDARPIPE_BEV_RASTER_H_
#define LIDARPIPE_BEV_RASTER_H_

// Bird's-eye-view height images and image-plane point overlays, written as
// binary PPM.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lidarpipe/binary_io.h"
#include "lidarpipe/geometry3d.h"
#include "lidarpipe/grid.h"
#include "lidarpipe/kitti_io.h"

namespace lidarpipe {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

enum class Palette { kViridis, kMagma, kTurbo, kGray };

std::optional<Palette> parse_palette(std::string_view name);
std::string_view palette_name(Palette palette);

// Color for a normalized value t in [0, 1] (clamped); entry lround(t * 255).
Rgb palette_color(Palette palette, double t);

struct BevConfig {
  Range x_range{0.0, 69.12};
  Range y_range{-39.68, 39.68};
  // Closed on both ends: a point at z_max gets the top palette color.
  Range z_range{-3.0, 1.0};
  double resolution = 0.1;  // meters per pixel
  Palette palette = Palette::kViridis;

  // Throws Error(kBadConfig) for empty ranges or a non-positive resolution.
  void validate() const;
  std::size_t rows() const;  // ceil(x extent / resolution)
  std::size_t cols() const;  // ceil(y extent / resolution)
};

struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB triples

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h * 3, 0) {}

  Rgb at(std::size_t row, std::size_t col) const {
    const std::size_t i = (row * width + col) * 3;
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
  }
  void set(std::size_t row, std::size_t col, Rgb c) {
    const std::size_t i = (row * width + col) * 3;
    pixels[i] = c.r;
    pixels[i + 1] = c.g;
    pixels[i + 2] = c.b;
  }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

// Max-height BEV: each pixel shows the highest in-range point that falls in
// it (later points win ties), colored by its normalized height. Row 0 is the
// far end of the x range (forward is up); column 0 is the +y (left) edge.
// Empty pixels are black.
RgbImage rasterize_bev(const PointCloud& cloud, const BevConfig& cfg);

// Draws projected points on a black canvas colored by depth / max_depth.
// Points are placed at the nearest pixel; nearer points overwrite farther
// ones.
RgbImage rasterize_projection(std::span<const ImagePoint> points, std::size_t width,
                              std::size_t height, Palette palette, double max_depth);

Bytes write_ppm(const RgbImage& image);
// Reads the binary P6 form written by write_ppm (maxval 255). Throws
// Error(kIo) on anything else.
RgbImage parse_ppm(std::span<const std::byte> bytes);

}  // namespace lidarpipe

#endif  // LIDARPIPE_BEV_RASTER_H_
