#include "lidarpipe/bev_raster.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lidarpipe/error.h"
#include "palettes.h"

namespace lidarpipe {

namespace {

std::size_t pixel_count(const Range& range, double resolution) {
  const double ratio = range.extent() / resolution;
  // Absorb the rounding of exact multiples (80 / 0.1 -> 800, not 801).
  return static_cast<std::size_t>(std::ceil(ratio - 1e-9 * ratio));
}

void check_range(const Range& range, const char* axis) {
  if (!std::isfinite(range.min) || !std::isfinite(range.max) ||
      !(range.max > range.min)) {
    throw Error(ErrorCode::kBadConfig, std::string(axis) + " range is empty");
  }
}

std::size_t parse_header_field(std::span<const std::byte> bytes, std::size_t& pos) {
  auto is_ws = [](char c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t'; };
  while (pos < bytes.size() && is_ws(static_cast<char>(bytes[pos]))) ++pos;
  std::size_t value = 0;
  std::size_t digits = 0;
  while (pos < bytes.size()) {
    const char c = static_cast<char>(bytes[pos]);
    if (c < '0' || c > '9') break;
    value = value * 10 + static_cast<std::size_t>(c - '0');
    ++digits;
    ++pos;
  }
  if (digits == 0) throw Error(ErrorCode::kIo, "malformed PPM header");
  return value;
}

}  // namespace

std::optional<Palette> parse_palette(std::string_view name) {
  if (name == "viridis") return Palette::kViridis;
  if (name == "magma") return Palette::kMagma;
  if (name == "turbo") return Palette::kTurbo;
  if (name == "gray") return Palette::kGray;
  return std::nullopt;
}

std::string_view palette_name(Palette palette) {
  switch (palette) {
    case Palette::kViridis: return "viridis";
    case Palette::kMagma: return "magma";
    case Palette::kTurbo: return "turbo";
    case Palette::kGray: return "gray";
  }
  return "viridis";
}

Rgb palette_color(Palette palette, double t) {
  const double clamped = std::isnan(t) ? 0.0 : std::clamp(t, 0.0, 1.0);
  const auto index = static_cast<std::size_t>(std::lround(clamped * 255.0));
  switch (palette) {
    case Palette::kViridis: return kViridisPalette[index];
    case Palette::kMagma: return kMagmaPalette[index];
    case Palette::kTurbo: return kTurboPalette[index];
    case Palette::kGray: {
      const auto v = static_cast<std::uint8_t>(index);
      return {v, v, v};
    }
  }
  return kViridisPalette[index];
}

void BevConfig::validate() const {
  check_range(x_range, "x");
  check_range(y_range, "y");
  check_range(z_range, "z");
  if (!(resolution > 0.0) || !std::isfinite(resolution)) {
    throw Error(ErrorCode::kBadConfig, "resolution must be positive");
  }
}

std::size_t BevConfig::rows() const { return pixel_count(x_range, resolution); }

std::size_t BevConfig::cols() const { return pixel_count(y_range, resolution); }

RgbImage rasterize_bev(const PointCloud& cloud, const BevConfig& cfg) {
  cfg.validate();
  const std::size_t rows = cfg.rows();
  const std::size_t cols = cfg.cols();
  std::vector<float> best_z(rows * cols, -std::numeric_limits<float>::infinity());
  std::vector<bool> occupied(rows * cols, false);

  for (const Point& p : cloud.points) {
    const double x = p.x;
    const double y = p.y;
    const double z = p.z;
    if (!cfg.x_range.contains(x) || !cfg.y_range.contains(y) || z < cfg.z_range.min ||
        z > cfg.z_range.max) {
      continue;
    }
    const auto from_bottom = cell_index(x, cfg.x_range, cfg.resolution,
                                        static_cast<std::int64_t>(rows));
    const auto from_right = cell_index(y, cfg.y_range, cfg.resolution,
                                       static_cast<std::int64_t>(cols));
    const std::size_t row = rows - 1 - static_cast<std::size_t>(from_bottom);
    const std::size_t col = cols - 1 - static_cast<std::size_t>(from_right);
    const std::size_t cell = row * cols + col;
    if (!occupied[cell] || p.z >= best_z[cell]) {
      best_z[cell] = p.z;
      occupied[cell] = true;
    }
  }

  RgbImage image(cols, rows);
  const double extent = cfg.z_range.extent();
  for (std::size_t row = 0; row < rows; ++row) {
    for (std::size_t col = 0; col < cols; ++col) {
      const std::size_t cell = row * cols + col;
      if (!occupied[cell]) continue;
      const double t = (static_cast<double>(best_z[cell]) - cfg.z_range.min) / extent;
      image.set(row, col, palette_color(cfg.palette, t));
    }
  }
  return image;
}

RgbImage rasterize_projection(std::span<const ImagePoint> points, std::size_t width,
                              std::size_t height, Palette palette, double max_depth) {
  if (width == 0 || height == 0) {
    throw Error(ErrorCode::kBadConfig, "image dimensions must be positive");
  }
  if (!(max_depth > 0.0)) throw Error(ErrorCode::kBadConfig, "max depth must be positive");
  RgbImage image(width, height);
  std::vector<double> depth(width * height, std::numeric_limits<double>::infinity());
  for (const ImagePoint& p : points) {
    const double col = std::round(p.u);
    const double row = std::round(p.v);
    if (col < 0.0 || row < 0.0 || col >= static_cast<double>(width) ||
        row >= static_cast<double>(height)) {
      continue;
    }
    const auto c = static_cast<std::size_t>(col);
    const auto r = static_cast<std::size_t>(row);
    if (p.depth < depth[r * width + c]) {
      depth[r * width + c] = p.depth;
      image.set(r, c, palette_color(palette, p.depth / max_depth));
    }
  }
  return image;
}

Bytes write_ppm(const RgbImage& image) {
  const std::string header = "P6\n" + std::to_string(image.width) + " " +
                             std::to_string(image.height) + "\n255\n";
  Bytes out;
  out.reserve(header.size() + image.pixels.size());
  for (const char c : header) out.push_back(static_cast<std::byte>(c));
  for (const std::uint8_t v : image.pixels) out.push_back(static_cast<std::byte>(v));
  return out;
}

RgbImage parse_ppm(std::span<const std::byte> bytes) {
  if (bytes.size() < 2 || static_cast<char>(bytes[0]) != 'P' ||
      static_cast<char>(bytes[1]) != '6') {
    throw Error(ErrorCode::kIo, "not a binary PPM");
  }
  std::size_t pos = 2;
  const std::size_t width = parse_header_field(bytes, pos);
  const std::size_t height = parse_header_field(bytes, pos);
  const std::size_t maxval = parse_header_field(bytes, pos);
  if (maxval != 255) throw Error(ErrorCode::kIo, "only 8-bit PPM is supported");
  ++pos;  // single whitespace after maxval
  if (bytes.size() != pos + width * height * 3) {
    throw Error(ErrorCode::kIo, "PPM pixel data size mismatch");
  }
  RgbImage image(width, height);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    image.pixels[i] = static_cast<std::uint8_t>(bytes[pos + i]);
  }
  return image;
}

}  // namespace lidarpipe
