#ifndef LIDARPIPE_TOOLS_RUN_CONFIG_H_
#define LIDARPIPE_TOOLS_RUN_CONFIG_H_

// Settings shared by every subcommand. Loaded from a sectioned ini file,
// then overridden by command-line flags.
//
//   [data]     root
//   [output]   dir
//   [run]      threads
//   [pillar]   x_min x_max y_min y_max z_min z_max pillar_dx pillar_dy
//              max_pillars max_points
//   [voxel]    x_min x_max y_min y_max z_min z_max voxel_x voxel_y voxel_z
//              max_points
//   [bev]      x_min x_max y_min y_max z_min z_max resolution palette
//   [project]  width height max_depth palette
//   [eval]     metric (2d, bev, 3d or all)  mode (11 or 40)
//              classes (comma separated label tokens)
//
// Unknown sections or keys are rejected.

#include <cstddef>
#include <filesystem>
#include <string_view>
#include <vector>

#include "lidarpipe/bev_raster.h"
#include "lidarpipe/kitti_eval.h"
#include "lidarpipe/pillar_encoder.h"
#include "lidarpipe/voxel_encoder.h"

namespace lidarpipe::cli {

struct ProjectConfig {
  std::size_t width = 1242;
  std::size_t height = 375;
  double max_depth = 80.0;
  Palette palette = Palette::kViridis;
};

struct EvalConfig {
  std::vector<Metric> metrics = {Metric::kBbox2d, Metric::kBboxBev, Metric::kBbox3d};
  ApMode mode = ApMode::kInterp40;
  std::vector<ObjectClass> classes = {ObjectClass::kCar, ObjectClass::kPedestrian,
                                      ObjectClass::kCyclist};
};

struct RunConfig {
  std::filesystem::path data_root;
  std::filesystem::path output_dir = ".";
  std::size_t threads = 1;
  PillarConfig pillar;
  VoxelConfig voxel;
  BevConfig bev;
  ProjectConfig project;
  EvalConfig eval;
};

// Throws Error(kBadConfig) on syntax errors, unknown keys or bad values.
RunConfig parse_run_config(std::string_view text);

std::vector<Metric> parse_metric_list(std::string_view text);
std::vector<ObjectClass> parse_class_list(std::string_view text);

}  // namespace lidarpipe::cli

#endif  // LIDARPIPE_TOOLS_RUN_CONFIG_H_
