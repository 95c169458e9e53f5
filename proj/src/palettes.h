#ifndef LIDARPIPE_SRC_PALETTES_H_
#define LIDARPIPE_SRC_PALETTES_H_

#include <array>

#include "lidarpipe/bev_raster.h"

namespace lidarpipe {

extern const std::array<Rgb, 256> kViridisPalette;
extern const std::array<Rgb, 256> kMagmaPalette;
extern const std::array<Rgb, 256> kTurboPalette;

}  // namespace lidarpipe

#endif  // LIDARPIPE_SRC_PALETTES_H_
