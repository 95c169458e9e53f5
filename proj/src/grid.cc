#include "lidarpipe/grid.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "lidarpipe/error.h"

namespace lidarpipe {

std::int64_t integral_cell_count(const Range& range, double cell,
                                 const char* axis) {
  if (!std::isfinite(range.min) || !std::isfinite(range.max) ||
      !(range.max > range.min)) {
    throw Error(ErrorCode::kBadConfig, std::string(axis) + " range is empty");
  }
  if (!(cell > 0.0) || !std::isfinite(cell)) {
    throw Error(ErrorCode::kBadConfig,
                std::string(axis) + " cell size must be positive");
  }
  const double ratio = range.extent() / cell;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-6 * rounded) {
    throw Error(ErrorCode::kBadConfig,
                std::string(axis) + " extent is not a whole number of cells");
  }
  return static_cast<std::int64_t>(rounded);
}

std::int64_t cell_index(double value, const Range& range, double cell,
                        std::int64_t count) {
  auto index = static_cast<std::int64_t>(std::floor((value - range.min) / cell));
  if (value < range.min + static_cast<double>(index) * cell) --index;
  if (value >= range.min + static_cast<double>(index + 1) * cell) ++index;
  return std::clamp<std::int64_t>(index, 0, count - 1);
}

}  // namespace lidarpipe
