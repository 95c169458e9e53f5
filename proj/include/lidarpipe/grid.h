#ifndef LIDARPIPE_GRID_H_
#define LIDARPIPE_GRID_H_

#include <cstdint>

namespace lidarpipe {

// Half-open interval [min, max).
struct Range {
  double min = 0.0;
  double max = 0.0;

  double extent() const { return max - min; }
  bool contains(double v) const { return v >= min && v < max; }
};

// Returns round(extent / cell) when that ratio is a positive integer within
// a relative tolerance of 1e-6, otherwise throws Error(kBadConfig).
std::int64_t integral_cell_count(const Range& range, double cell,
                                 const char* axis);

// Index of the half-open cell [min + i*cell, min + (i+1)*cell) holding
// `value`, clamped to [0, count). The caller has already checked that
// `value` lies in `range`; the correction steps absorb the rounding of the
// division so the point really lies inside the returned cell.
std::int64_t cell_index(double value, const Range& range, double cell,
                        std::int64_t count);

}  // namespace lidarpipe

#endif  // LIDARPIPE_GRID_H_
