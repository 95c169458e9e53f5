#include "cli.h"

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <thread>

#include "lidarpipe/bev_raster.h"
#include "lidarpipe/error.h"
#include "lidarpipe/geometry3d.h"
#include "lidarpipe/kitti_eval.h"
#include "lidarpipe/kitti_io.h"
#include "lidarpipe/pillar_encoder.h"
#include "lidarpipe/voxel_encoder.h"
#include "run_config.h"

namespace lidarpipe::cli {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr std::size_t kDefaultVfeOutChannels = 32;

struct GlobalFlags {
  std::string config_path;
  std::string data_root;
  std::string output_dir;
  std::size_t threads = 0;
};

struct FrameArgs {
  std::vector<std::string> ids;
};

std::string format(const char* fmt, auto... args) {
  const int n = std::snprintf(nullptr, 0, fmt, args...);
  std::string s(static_cast<std::size_t>(n), '\0');
  std::snprintf(s.data(), s.size() + 1, fmt, args...);
  return s;
}

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string normalize_frame_id(const std::string& id) {
  if (id.empty() || id.find('/') != std::string::npos) {
    throw Error(ErrorCode::kBadConfig, "bad frame id '" + id + "'");
  }
  if (id.size() < 6 && std::all_of(id.begin(), id.end(), [](char c) {
        return c >= '0' && c <= '9';
      })) {
    return std::string(6 - id.size(), '0') + id;
  }
  return id;
}

std::vector<std::string> list_frames(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kIo, "no directory " + dir.string());
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) {
      ids.push_back(entry.path().stem().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

struct Dataset {
  fs::path root;

  fs::path velodyne(const std::string& id) const { return root / "velodyne" / (id + ".bin"); }
  fs::path label(const std::string& id) const { return root / "label_2" / (id + ".txt"); }
  fs::path calib(const std::string& id) const { return root / "calib" / (id + ".txt"); }

  // Explicit ids, or every frame found in `subdir`.
  std::vector<std::string> frames(const std::vector<std::string>& ids,
                                  const char* subdir, const char* ext) const {
    if (ids.empty()) return list_frames(root / subdir, ext);
    std::vector<std::string> out;
    for (const auto& id : ids) out.push_back(normalize_frame_id(id));
    return out;
  }
};

// Runs `fn(i)` for every frame on up to `threads` workers and returns the
// results in frame order. The first failure in frame order is rethrown.
template <typename Fn>
auto for_each_frame(std::size_t count, std::size_t threads, Fn fn) {
  using Result = decltype(fn(std::size_t{0}));
  std::vector<Result> results(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        results[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, count));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

RunConfig load_config(const GlobalFlags& flags) {
  RunConfig cfg;
  if (!flags.config_path.empty()) cfg = parse_run_config(read_file_text(flags.config_path));
  if (cfg.data_root.empty()) {
    if (const char* env = std::getenv("LIDARPIPE_DATA")) cfg.data_root = env;
  }
  if (!flags.data_root.empty()) cfg.data_root = flags.data_root;
  if (!flags.output_dir.empty()) cfg.output_dir = flags.output_dir;
  if (flags.threads > 0) cfg.threads = flags.threads;
  return cfg;
}

Dataset require_dataset(const RunConfig& cfg) {
  if (cfg.data_root.empty()) {
    throw Error(ErrorCode::kBadConfig, "no dataset root; pass --data or set LIDARPIPE_DATA");
  }
  if (!fs::is_directory(cfg.data_root)) {
    throw Error(ErrorCode::kIo, "dataset root " + cfg.data_root.string() + " does not exist");
  }
  return {cfg.data_root};
}

void prepare_output(const RunConfig& cfg) { fs::create_directories(cfg.output_dir); }

void print_all(std::ostream& out, const std::vector<std::string>& lines) {
  for (const auto& line : lines) out << line;
}

// --- inspect -----------------------------------------------------------------

std::map<ObjectClass, std::size_t> class_counts(const std::vector<Annotation>& labels) {
  std::map<ObjectClass, std::size_t> counts;
  for (const auto& a : labels) ++counts[a.label];
  return counts;
}

int cmd_inspect(const RunConfig& cfg, const FrameArgs& frame_args, bool counts_only,
                std::ostream& out) {
  const Dataset data = require_dataset(cfg);
  if (counts_only) {
    const auto ids = data.frames(frame_args.ids, "label_2", ".txt");
    const auto per_frame = for_each_frame(ids.size(), cfg.threads, [&](std::size_t i) {
      return class_counts(load_labels(data.label(ids[i])));
    });
    std::map<ObjectClass, std::size_t> total;
    for (const auto& counts : per_frame) {
      for (const auto& [cls, n] : counts) total[cls] += n;
    }
    out << "frames " << ids.size() << '\n';
    std::size_t sum = 0;
    for (const ObjectClass cls : kAllClasses) {
      out << format("%-16s %zu\n", std::string(class_token(cls)).c_str(), total[cls]);
      sum += total[cls];
    }
    out << format("%-16s %zu\n", "total", sum);
    return kExitOk;
  }

  const auto ids = data.frames(frame_args.ids, "velodyne", ".bin");
  const auto text = for_each_frame(ids.size(), cfg.threads, [&](std::size_t i) {
    const PointCloud cloud = load_point_cloud(data.velodyne(ids[i]));
    const auto labels = load_labels(data.label(ids[i]));
    const Calibration calib = load_calib(data.calib(ids[i]));
    std::string s = "frame " + ids[i] + "\n";
    s += format("  points %zu\n", cloud.size());
    s += "  labels";
    const auto counts = class_counts(labels);
    if (counts.empty()) s += " none";
    for (const ObjectClass cls : kAllClasses) {
      if (const auto it = counts.find(cls); it != counts.end()) {
        s += format(" %s=%zu", std::string(class_token(cls)).c_str(), it->second);
      }
    }
    s += '\n';
    const Eigen::Vector3d t = calib.tr_velo_to_cam.col(3);
    s += format("  calib fu=%.6f fv=%.6f cu=%.6f cv=%.6f velo_to_cam_t=(%.6f, %.6f, %.6f)\n",
                calib.p2(0, 0), calib.p2(1, 1), calib.p2(0, 2), calib.p2(1, 2), t.x(),
                t.y(), t.z());
    return s;
  });
  print_all(out, text);
  return kExitOk;
}

// --- pillars / voxelize ------------------------------------------------------

int cmd_pillars(const RunConfig& cfg, const FrameArgs& frame_args, std::ostream& out,
                std::ostream& err) {
  cfg.pillar.validate();
  const Dataset data = require_dataset(cfg);
  const auto ids = data.frames(frame_args.ids, "velodyne", ".bin");
  prepare_output(cfg);
  const auto start = Clock::now();
  const auto lines = for_each_frame(ids.size(), cfg.threads, [&](std::size_t i) {
    const PointCloud cloud = load_point_cloud(data.velodyne(ids[i]));
    const PillarTensor pillars = encode_pillars(cloud, cfg.pillar);
    write_file_bytes(cfg.output_dir / (ids[i] + ".pillars.bin"), write_pillar_dump(pillars));
    return format("%s points=%zu pillars=%zu\n", ids[i].c_str(), cloud.size(),
                  pillars.num_nonempty);
  });
  print_all(out, lines);
  err << format("elapsed_ms=%.3f\n", elapsed_ms(start));
  return kExitOk;
}

struct VoxelizeArgs {
  std::string image_features;
  std::string vfe_weights;
};

int cmd_voxelize(const RunConfig& cfg, const FrameArgs& frame_args,
                 const VoxelizeArgs& args, std::ostream& out, std::ostream& err) {
  cfg.voxel.validate();
  const Dataset data = require_dataset(cfg);
  const bool fuse = !args.image_features.empty();
  if (fuse && !fs::is_directory(args.image_features)) {
    throw Error(ErrorCode::kIo, "no directory " + args.image_features);
  }
  const std::size_t in_channels =
      fuse ? VoxelGrid::kFusedFeatureDim : VoxelGrid::kLidarFeatureDim;
  const VfeWeights weights =
      args.vfe_weights.empty()
          ? VfeWeights::passthrough(in_channels, kDefaultVfeOutChannels)
          : parse_vfe_weights(read_file_text(args.vfe_weights));
  weights.validate();
  if (weights.in_channels != in_channels) {
    throw Error(ErrorCode::kBadWeights,
                format("weights expect %zu input channels, features have %zu",
                       weights.in_channels, in_channels));
  }
  const auto ids = data.frames(frame_args.ids, "velodyne", ".bin");
  prepare_output(cfg);
  const auto start = Clock::now();
  const auto lines = for_each_frame(ids.size(), cfg.threads, [&](std::size_t i) {
    const PointCloud cloud = load_point_cloud(data.velodyne(ids[i]));
    VoxelGrid grid = voxelize(cloud, cfg.voxel);
    if (fuse) {
      const auto map = parse_feature_map(
          read_file_bytes(fs::path(args.image_features) / (ids[i] + ".bin")));
      grid = append_image_features(grid, map, load_calib(data.calib(ids[i])));
    }
    const auto point_features = vfe_layer(grid.features, grid.counts, weights);
    const auto voxel_features = aggregate_voxels(point_features, grid.counts);
    const SparseTensor tensor =
        to_sparse_tensor(grid, voxel_features, weights.out_channels);
    write_file_bytes(cfg.output_dir / (ids[i] + ".voxels.bin"), write_sparse_dump(tensor));
    return format("%s points=%zu voxels=%zu channels=%zu\n", ids[i].c_str(), cloud.size(),
                  grid.size(), weights.out_channels);
  });
  print_all(out, lines);
  err << format("elapsed_ms=%.3f\n", elapsed_ms(start));
  return kExitOk;
}

// --- bev / project -----------------------------------------------------------

int cmd_bev(const RunConfig& cfg, const FrameArgs& frame_args, std::ostream& out) {
  cfg.bev.validate();
  const Dataset data = require_dataset(cfg);
  const auto ids = data.frames(frame_args.ids, "velodyne", ".bin");
  prepare_output(cfg);
  const auto lines = for_each_frame(ids.size(), cfg.threads, [&](std::size_t i) {
    const PointCloud cloud = load_point_cloud(data.velodyne(ids[i]));
    const RgbImage image = rasterize_bev(cloud, cfg.bev);
    write_file_bytes(cfg.output_dir / (ids[i] + ".bev.ppm"), write_ppm(image));
    return format("%s points=%zu image=%zux%zu\n", ids[i].c_str(), cloud.size(),
                  image.width, image.height);
  });
  print_all(out, lines);
  return kExitOk;
}

int cmd_project(const RunConfig& cfg, const FrameArgs& frame_args, std::ostream& out) {
  const ProjectConfig& p = cfg.project;
  if (p.width == 0 || p.height == 0) {
    throw Error(ErrorCode::kBadConfig, "image width and height must be positive");
  }
  const Dataset data = require_dataset(cfg);
  const auto ids = data.frames(frame_args.ids, "velodyne", ".bin");
  prepare_output(cfg);
  const auto lines = for_each_frame(ids.size(), cfg.threads, [&](std::size_t i) {
    const PointCloud cloud = load_point_cloud(data.velodyne(ids[i]));
    const Calibration calib = load_calib(data.calib(ids[i]));
    const auto camera_points = lidar_to_camera(cloud, calib);
    const auto projected = project_to_image(camera_points, calib);
    const RgbImage image =
        rasterize_projection(projected, p.width, p.height, p.palette, p.max_depth);
    std::size_t on_canvas = 0;
    for (const ImagePoint& ip : projected) {
      const double u = std::round(ip.u);
      const double v = std::round(ip.v);
      if (u >= 0.0 && v >= 0.0 && u < static_cast<double>(p.width) &&
          v < static_cast<double>(p.height)) {
        ++on_canvas;
      }
    }
    write_file_bytes(cfg.output_dir / (ids[i] + ".proj.ppm"), write_ppm(image));
    return format("%s points=%zu projected=%zu\n", ids[i].c_str(), cloud.size(), on_canvas);
  });
  print_all(out, lines);
  return kExitOk;
}

// --- eval --------------------------------------------------------------------

struct EvalArgs {
  std::string gt_dir;
  std::string det_dir;
  std::string calib_dir;
  std::string metric;
  std::string mode;
  std::string classes;
};

int cmd_eval(RunConfig cfg, const EvalArgs& args, std::ostream& out) {
  if (!args.metric.empty()) cfg.eval.metrics = parse_metric_list(args.metric);
  if (!args.mode.empty()) {
    const auto mode = parse_ap_mode(args.mode);
    if (!mode) throw Error(ErrorCode::kBadConfig, "unknown AP mode '" + args.mode + "'");
    cfg.eval.mode = *mode;
  }
  if (!args.classes.empty()) cfg.eval.classes = parse_class_list(args.classes);

  auto dir_or_root = [&](const std::string& given, const char* subdir) {
    return given.empty() ? require_dataset(cfg).root / subdir : fs::path(given);
  };
  const fs::path gt_dir = dir_or_root(args.gt_dir, "label_2");
  const fs::path det_dir = args.det_dir;
  const bool needs_calib = std::any_of(cfg.eval.metrics.begin(), cfg.eval.metrics.end(),
                                       [](Metric m) { return m != Metric::kBbox2d; });
  const fs::path calib_dir = needs_calib ? dir_or_root(args.calib_dir, "calib") : fs::path();

  const auto gt_ids = list_frames(gt_dir, ".txt");
  const auto det_ids = list_frames(det_dir, ".txt");
  const std::set<std::string> gt_set(gt_ids.begin(), gt_ids.end());
  for (const auto& id : det_ids) {
    if (!gt_set.contains(id)) {
      throw Error(ErrorCode::kFrameSetMismatch, "detections for frame " + id +
                                                    " have no ground truth");
    }
  }
  const std::set<std::string> det_set(det_ids.begin(), det_ids.end());

  struct Loaded {
    std::vector<Annotation> gt;
    std::vector<Detection> det;
    Calibration calib;
  };
  const auto loaded = for_each_frame(gt_ids.size(), cfg.threads, [&](std::size_t i) {
    const std::string& id = gt_ids[i];
    Loaded l;
    l.gt = load_labels(gt_dir / (id + ".txt"));
    if (det_set.contains(id)) l.det = load_detections(det_dir / (id + ".txt"));
    if (needs_calib) l.calib = load_calib(calib_dir / (id + ".txt"));
    return l;
  });

  FrameAnnotations gts;
  FrameDetections dets;
  FrameCalibrations calibs;
  for (std::size_t i = 0; i < gt_ids.size(); ++i) {
    gts[gt_ids[i]] = loaded[i].gt;
    dets[gt_ids[i]] = loaded[i].det;
    if (needs_calib) calibs[gt_ids[i]] = loaded[i].calib;
  }

  EvalOptions options;
  options.mode = cfg.eval.mode;
  std::vector<EvalReport> reports;
  for (const Metric metric : cfg.eval.metrics) {
    reports.push_back(evaluate(dets, gts, calibs, metric, cfg.eval.classes, options));
  }
  const std::string table = format_report_table(reports);
  prepare_output(cfg);
  write_file_text(cfg.output_dir / "eval_report.txt", table);
  write_file_text(cfg.output_dir / "eval_report.kv", format_report_kv(reports));
  out << table;
  return kExitOk;
}

// --- bench -------------------------------------------------------------------

struct BenchArgs {
  std::string encoder = "pillars";
  std::size_t iterations = 1;
};

double percentile(std::vector<double> samples, double q) {
  if (samples.empty()) return 0.0;
  std::sort(samples.begin(), samples.end());
  const auto rank = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(samples.size())));
  return samples[std::clamp<std::size_t>(rank, 1, samples.size()) - 1];
}

int cmd_bench(const RunConfig& cfg, const FrameArgs& frame_args, const BenchArgs& args,
              std::ostream& out, std::ostream& err) {
  const bool pillars = args.encoder == "pillars";
  if (!pillars && args.encoder != "voxels") {
    throw Error(ErrorCode::kBadConfig, "unknown encoder '" + args.encoder + "'");
  }
  if (pillars) {
    cfg.pillar.validate();
  } else {
    cfg.voxel.validate();
  }
  const Dataset data = require_dataset(cfg);
  const auto ids = data.frames(frame_args.ids, "velodyne", ".bin");
  std::vector<PointCloud> clouds;
  std::size_t total_points = 0;
  for (const auto& id : ids) {
    clouds.push_back(load_point_cloud(data.velodyne(id)));
    total_points += clouds.back().size();
  }

  std::vector<double> samples;
  std::size_t encoded = 0;
  double busy_ms = 0.0;
  for (std::size_t it = 0; it < args.iterations; ++it) {
    for (const PointCloud& cloud : clouds) {
      const auto start = Clock::now();
      if (pillars) {
        encode_pillars(cloud, cfg.pillar);
      } else {
        voxelize(cloud, cfg.voxel);
      }
      samples.push_back(elapsed_ms(start));
      busy_ms += samples.back();
      encoded += cloud.size();
    }
  }
  out << format("encoder=%s frames=%zu iterations=%zu samples=%zu points=%zu\n",
                args.encoder.c_str(), ids.size(), args.iterations, samples.size(),
                total_points);
  const double rate = busy_ms > 0.0 ? static_cast<double>(encoded) / (busy_ms / 1000.0) : 0.0;
  err << format("p50_ms=%.3f p95_ms=%.3f points_per_s=%.0f\n", percentile(samples, 0.5),
                percentile(samples, 0.95), rate);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"LiDAR detection preprocessing and evaluation toolkit", "lidarpipe"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  GlobalFlags flags;
  app.add_option("--config", flags.config_path, "Sectioned key = value settings file");
  app.add_option("--data", flags.data_root,
                 "Dataset root with velodyne/, label_2/, calib/ (default: $LIDARPIPE_DATA)");
  app.add_option("--out", flags.output_dir, "Output directory");
  app.add_option("--threads", flags.threads, "Frame-parallel workers")
      ->check(CLI::PositiveNumber);

  FrameArgs frames;
  auto add_frames = [&](CLI::App* sub) {
    sub->add_option("frames", frames.ids, "Frame ids (default: every frame)");
  };

  bool counts_only = false;
  CLI::App* inspect = app.add_subcommand("inspect", "Summarize frames");
  add_frames(inspect);
  inspect->add_flag("--counts", counts_only, "Per-class label histogram over the split");

  CLI::App* pillars = app.add_subcommand("pillars", "Encode pillars and write dumps");
  add_frames(pillars);

  VoxelizeArgs voxel_args;
  CLI::App* voxel = app.add_subcommand("voxelize", "Voxelize, run the VFE layer, write sparse dumps");
  add_frames(voxel);
  voxel->add_option("--image-features", voxel_args.image_features,
                    "Directory of per-frame 16-channel feature maps");
  voxel->add_option("--vfe-weights", voxel_args.vfe_weights, "VFE weights file");

  std::string palette;
  CLI::App* bev = app.add_subcommand("bev", "Render bird's-eye-view height images");
  add_frames(bev);
  bev->add_option("--palette", palette, "viridis, magma, turbo or gray");

  std::size_t width = 0;
  std::size_t height = 0;
  double max_depth = 0.0;
  CLI::App* project = app.add_subcommand("project", "Draw projected points on a blank image");
  add_frames(project);
  project->add_option("--width", width, "Image width in pixels");
  project->add_option("--height", height, "Image height in pixels");
  project->add_option("--max-depth", max_depth, "Depth mapped to the top palette color");
  project->add_option("--palette", palette, "viridis, magma, turbo or gray");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate detections against labels");
  eval->add_option("--gt", eval_args.gt_dir, "Label directory (default: <data>/label_2)");
  eval->add_option("--det", eval_args.det_dir, "Detection directory")->required();
  eval->add_option("--calib", eval_args.calib_dir, "Calibration directory (default: <data>/calib)");
  eval->add_option("--metric", eval_args.metric, "2d, bev, 3d or all");
  eval->add_option("--mode", eval_args.mode, "11 or 40 recall points");
  eval->add_option("--classes", eval_args.classes, "Comma-separated classes");

  BenchArgs bench_args;
  CLI::App* bench = app.add_subcommand("bench", "Time the encoders");
  add_frames(bench);
  bench->add_option("--encoder", bench_args.encoder, "pillars or voxels");
  bench->add_option("--iterations", bench_args.iterations, "Passes over the frames")
      ->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg = load_config(flags);
    if (!palette.empty()) {
      const auto p = parse_palette(palette);
      if (!p) throw Error(ErrorCode::kBadConfig, "unknown palette '" + palette + "'");
      cfg.bev.palette = *p;
      cfg.project.palette = *p;
    }
    if (width > 0) cfg.project.width = width;
    if (height > 0) cfg.project.height = height;
    if (max_depth > 0.0) cfg.project.max_depth = max_depth;

    if (*inspect) return cmd_inspect(cfg, frames, counts_only, out);
    if (*pillars) return cmd_pillars(cfg, frames, out, err);
    if (*voxel) return cmd_voxelize(cfg, frames, voxel_args, out, err);
    if (*bev) return cmd_bev(cfg, frames, out);
    if (*project) return cmd_project(cfg, frames, out);
    if (*eval) return cmd_eval(cfg, eval_args, out);
    if (*bench) return cmd_bench(cfg, frames, bench_args, out, err);
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace lidarpipe::cli
