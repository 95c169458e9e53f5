#include "lidarpipe/kitti_eval.h"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <numeric>

#include "lidarpipe/error.h"
#include "lidarpipe/geometry3d.h"

namespace lidarpipe {

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool passes(const Annotation& ann, const DifficultyRule& rule) {
  return ann.bbox.height() >= rule.min_bbox_height &&
         ann.occluded <= rule.max_occlusion && ann.truncated <= rule.max_truncation;
}

// LiDAR boxes of one frame, built once per evaluate() call.
struct FrameBoxes {
  std::vector<std::optional<Box3D>> gts;
  std::vector<std::optional<Box3D>> dets;
};

FrameBoxes lidar_boxes(const std::vector<Annotation>& gts,
                       const std::vector<Detection>& dets, const Calibration& calib) {
  FrameBoxes boxes;
  boxes.gts.reserve(gts.size());
  for (const auto& ann : gts) {
    if (ann.label == ObjectClass::kDontCare) {
      boxes.gts.emplace_back();
    } else {
      boxes.gts.emplace_back(camera_label_to_lidar_box(ann, calib));
    }
  }
  boxes.dets.reserve(dets.size());
  for (const auto& det : dets) {
    if (det.object.label == ObjectClass::kDontCare) {
      boxes.dets.emplace_back();
    } else {
      boxes.dets.emplace_back(camera_label_to_lidar_box(det.object, calib));
    }
  }
  return boxes;
}

}  // namespace

std::string_view difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::kEasy: return "Easy";
    case Difficulty::kModerate: return "Moderate";
    case Difficulty::kHard: return "Hard";
  }
  return "Easy";
}

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::kBbox2d: return "BBOX_2D";
    case Metric::kBboxBev: return "BBOX_BEV";
    case Metric::kBbox3d: return "BBOX_3D";
  }
  return "BBOX_3D";
}

std::optional<Metric> parse_metric(std::string_view name) {
  const std::string key = lowercase(name);
  if (key == "bbox_2d" || key == "2d") return Metric::kBbox2d;
  if (key == "bbox_bev" || key == "bev") return Metric::kBboxBev;
  if (key == "bbox_3d" || key == "3d") return Metric::kBbox3d;
  return std::nullopt;
}

std::optional<ApMode> parse_ap_mode(std::string_view name) {
  if (name == "11" || name == "interp11") return ApMode::kInterp11;
  if (name == "40" || name == "interp40") return ApMode::kInterp40;
  return std::nullopt;
}

DifficultyRules default_difficulty_rules() {
  return {{{40.0, 0, 0.15}, {25.0, 1, 0.30}, {25.0, 2, 0.50}}};
}

GroundTruthSplit filter_difficulty(std::span<const Annotation> annotations,
                                   ObjectClass target, const DifficultyRule& rule,
                                   bool van_ignored_for_car) {
  GroundTruthSplit split;
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const Annotation& ann = annotations[i];
    if (ann.label == ObjectClass::kDontCare) {
      split.dont_care.push_back(i);
    } else if (ann.label == target) {
      (passes(ann, rule) ? split.counted : split.ignored).push_back(i);
    } else if (van_ignored_for_car && target == ObjectClass::kCar &&
               ann.label == ObjectClass::kVan) {
      split.ignored.push_back(i);
    }
  }
  return split;
}

std::array<GroundTruthSplit, 3> filter_difficulty(
    std::span<const Annotation> annotations, ObjectClass target,
    const DifficultyRules& rules, bool van_ignored_for_car) {
  return {filter_difficulty(annotations, target, rules[0], van_ignored_for_car),
          filter_difficulty(annotations, target, rules[1], van_ignored_for_car),
          filter_difficulty(annotations, target, rules[2], van_ignored_for_car)};
}

MatchResult match_detections(std::span<const double> scores,
                             const Eigen::MatrixXd& counted_overlap,
                             const Eigen::MatrixXd& ignored_overlap, double threshold) {
  const std::size_t num_dets = scores.size();
  const auto num_counted = static_cast<std::size_t>(counted_overlap.cols());
  const auto num_ignored = static_cast<std::size_t>(ignored_overlap.cols());
  if ((num_counted > 0 && static_cast<std::size_t>(counted_overlap.rows()) != num_dets) ||
      (num_ignored > 0 && static_cast<std::size_t>(ignored_overlap.rows()) != num_dets)) {
    throw Error(ErrorCode::kBadConfig, "overlap matrices must have one row per detection");
  }

  std::vector<std::size_t> order(num_dets);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  MatchResult result;
  result.outcomes.assign(num_dets, MatchOutcome::kFalsePositive);
  result.matched_gt.assign(num_dets, std::nullopt);
  std::vector<bool> taken(num_counted, false);
  for (const std::size_t det : order) {
    std::optional<std::size_t> best;
    double best_overlap = threshold;
    for (std::size_t g = 0; g < num_counted; ++g) {
      if (taken[g]) continue;
      const double overlap = counted_overlap(static_cast<Eigen::Index>(det),
                                             static_cast<Eigen::Index>(g));
      if (overlap >= threshold && (!best || overlap > best_overlap)) {
        best = g;
        best_overlap = overlap;
      }
    }
    if (best) {
      taken[*best] = true;
      result.outcomes[det] = MatchOutcome::kTruePositive;
      result.matched_gt[det] = best;
      ++result.num_tp;
      continue;
    }
    bool on_ignored = false;
    for (std::size_t g = 0; g < num_ignored && !on_ignored; ++g) {
      on_ignored = ignored_overlap(static_cast<Eigen::Index>(det),
                                   static_cast<Eigen::Index>(g)) >= threshold;
    }
    if (on_ignored) {
      result.outcomes[det] = MatchOutcome::kDiscarded;
      ++result.num_discarded;
    } else {
      ++result.num_fp;
    }
  }
  return result;
}

PrCurve precision_recall(std::span<const ScoredOutcome> outcomes, std::size_t num_gt) {
  std::vector<ScoredOutcome> sorted(outcomes.begin(), outcomes.end());
  std::sort(sorted.begin(), sorted.end(), [](const ScoredOutcome& a, const ScoredOutcome& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.detection < b.detection;
  });
  PrCurve curve;
  curve.num_gt = num_gt;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (const auto& o : sorted) {
    if (o.outcome == MatchOutcome::kDiscarded) continue;
    (o.outcome == MatchOutcome::kTruePositive ? tp : fp) += 1;
    PrPoint point;
    point.tp = tp;
    point.fp = fp;
    point.recall = num_gt > 0 ? static_cast<double>(tp) / static_cast<double>(num_gt) : 0.0;
    point.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    curve.points.push_back(point);
  }
  return curve;
}

double average_precision(const PrCurve& curve, ApMode mode) {
  if (curve.num_gt == 0) return 0.0;
  const std::size_t steps = mode == ApMode::kInterp11 ? 10 : 40;
  const std::size_t first = mode == ApMode::kInterp11 ? 0 : 1;

  // Best precision at or beyond each point, scanning from the high-recall end.
  std::vector<double> envelope(curve.points.size());
  double running = 0.0;
  for (std::size_t i = curve.points.size(); i-- > 0;) {
    running = std::max(running, curve.points[i].precision);
    envelope[i] = running;
  }

  double sum = 0.0;
  std::size_t cursor = 0;
  for (std::size_t k = first; k <= steps; ++k) {
    // Recall tp / num_gt >= k / steps, compared in integers.
    while (cursor < curve.points.size() &&
           curve.points[cursor].tp * steps < k * curve.num_gt) {
      ++cursor;
    }
    if (cursor < curve.points.size()) sum += envelope[cursor];
  }
  return sum / static_cast<double>(steps - first + 1);
}

double bbox_iou(const BBox2D& a, const BBox2D& b) {
  const double iw = std::min(a.right, b.right) - std::max(a.left, b.left);
  const double ih = std::min(a.bottom, b.bottom) - std::max(a.top, b.top);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.width() * a.height() + b.width() * b.height() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double bbox_coverage(const BBox2D& det, const BBox2D& region) {
  const double iw = std::min(det.right, region.right) - std::max(det.left, region.left);
  const double ih = std::min(det.bottom, region.bottom) - std::max(det.top, region.top);
  const double area = det.width() * det.height();
  if (iw <= 0.0 || ih <= 0.0 || area <= 0.0) return 0.0;
  return iw * ih / area;
}

double default_min_overlap(ObjectClass cls) {
  switch (cls) {
    case ObjectClass::kCar:
    case ObjectClass::kVan:
    case ObjectClass::kTruck:
    case ObjectClass::kTram:
      return 0.7;
    default:
      return 0.5;
  }
}

double EvalOptions::overlap_threshold(ObjectClass cls) const {
  const auto it = min_overlap.find(cls);
  return it != min_overlap.end() ? it->second : default_min_overlap(cls);
}

const EvalCell& EvalReport::cell(ObjectClass cls, Difficulty d) const {
  for (const auto& c : cells) {
    if (c.cls == cls && c.difficulty == d) return c;
  }
  throw Error(ErrorCode::kBadConfig, "no cell for " + std::string(class_token(cls)) + " " +
                                         std::string(difficulty_name(d)));
}

double EvalReport::mean_ap() const {
  if (cells.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& c : cells) sum += c.ap;
  return sum / static_cast<double>(cells.size());
}

EvalReport evaluate(const FrameDetections& detections,
                    const FrameAnnotations& ground_truth,
                    const FrameCalibrations& calibrations, Metric metric,
                    std::span<const ObjectClass> classes, const EvalOptions& options) {
  for (const auto& [key, unused] : detections) {
    if (!ground_truth.contains(key)) {
      throw Error(ErrorCode::kFrameSetMismatch, "detections for unknown frame " + key);
    }
  }
  for (const auto& [key, unused] : ground_truth) {
    if (!detections.contains(key)) {
      throw Error(ErrorCode::kFrameSetMismatch, "no detection entry for frame " + key);
    }
    if (metric != Metric::kBbox2d && !calibrations.contains(key)) {
      throw Error(ErrorCode::kFrameSetMismatch, "no calibration for frame " + key);
    }
  }

  std::vector<const std::string*> keys;
  for (const auto& [key, unused] : ground_truth) keys.push_back(&key);

  std::vector<FrameBoxes> boxes(keys.size());
  if (metric != Metric::kBbox2d) {
    for (std::size_t f = 0; f < keys.size(); ++f) {
      boxes[f] = lidar_boxes(ground_truth.at(*keys[f]), detections.at(*keys[f]),
                             calibrations.at(*keys[f]));
    }
  }

  auto overlap = [&](std::size_t f, const Detection& det, std::size_t det_index,
                     const Annotation& gt, std::size_t gt_index) {
    switch (metric) {
      case Metric::kBbox2d: return bbox_iou(det.object.bbox, gt.bbox);
      case Metric::kBboxBev:
        return rotated_iou_bev(*boxes[f].dets[det_index], *boxes[f].gts[gt_index]);
      case Metric::kBbox3d:
        return iou_3d(*boxes[f].dets[det_index], *boxes[f].gts[gt_index]);
    }
    return 0.0;
  };

  EvalReport report;
  report.metric = metric;
  report.mode = options.mode;
  report.classes.assign(classes.begin(), classes.end());
  for (const ObjectClass cls : classes) {
    const double threshold = options.overlap_threshold(cls);
    for (const Difficulty difficulty : kDifficulties) {
      const DifficultyRule& rule = options.rules[static_cast<std::size_t>(difficulty)];
      EvalCell cell;
      cell.cls = cls;
      cell.difficulty = difficulty;
      std::vector<ScoredOutcome> pooled;

      for (std::size_t f = 0; f < keys.size(); ++f) {
        const auto& gts = ground_truth.at(*keys[f]);
        const auto& dets = detections.at(*keys[f]);
        const GroundTruthSplit split =
            filter_difficulty(gts, cls, rule, options.van_ignored_for_car);
        cell.num_gt += split.counted.size();

        std::vector<std::size_t> det_ids;
        for (std::size_t i = 0; i < dets.size(); ++i) {
          if (dets[i].object.label == cls) det_ids.push_back(i);
        }
        if (det_ids.empty()) continue;

        const std::size_t num_dc =
            metric == Metric::kBbox2d ? split.dont_care.size() : 0;
        const auto rows = static_cast<Eigen::Index>(det_ids.size());
        Eigen::MatrixXd counted(rows, static_cast<Eigen::Index>(split.counted.size()));
        Eigen::MatrixXd ignored(rows,
                                static_cast<Eigen::Index>(split.ignored.size() + num_dc));
        std::vector<double> scores(det_ids.size());
        for (std::size_t r = 0; r < det_ids.size(); ++r) {
          const auto row = static_cast<Eigen::Index>(r);
          const Detection& det = dets[det_ids[r]];
          scores[r] = det.score;
          for (std::size_t g = 0; g < split.counted.size(); ++g) {
            const std::size_t gi = split.counted[g];
            counted(row, static_cast<Eigen::Index>(g)) =
                overlap(f, det, det_ids[r], gts[gi], gi);
          }
          for (std::size_t g = 0; g < split.ignored.size(); ++g) {
            const std::size_t gi = split.ignored[g];
            ignored(row, static_cast<Eigen::Index>(g)) =
                overlap(f, det, det_ids[r], gts[gi], gi);
          }
          for (std::size_t g = 0; g < num_dc; ++g) {
            ignored(row, static_cast<Eigen::Index>(split.ignored.size() + g)) =
                bbox_coverage(det.object.bbox, gts[split.dont_care[g]].bbox);
          }
        }

        const MatchResult match = match_detections(scores, counted, ignored, threshold);
        cell.num_tp += match.num_tp;
        cell.num_fp += match.num_fp;
        cell.num_discarded += match.num_discarded;
        for (std::size_t r = 0; r < det_ids.size(); ++r) {
          pooled.push_back({scores[r], f, det_ids[r], match.outcomes[r]});
        }
      }

      cell.ap = average_precision(precision_recall(pooled, cell.num_gt), options.mode);
      report.cells.push_back(cell);
    }
  }
  return report;
}

std::string format_report_table(std::span<const EvalReport> reports) {
  if (reports.empty()) return {};
  const auto& classes = reports.front().classes;
  constexpr int kGroupWidth = 23;
  std::string out;
  char buffer[128];

  std::snprintf(buffer, sizeof(buffer), "%-10s| %-6s|", "Metric", "mAP");
  out += buffer;
  for (const ObjectClass cls : classes) {
    std::snprintf(buffer, sizeof(buffer), " %-*s|", kGroupWidth - 1,
                  std::string(class_display_name(cls)).c_str());
    out += buffer;
  }
  out += '\n';
  std::snprintf(buffer, sizeof(buffer), "%-10s| %-6s|", "", "");
  out += buffer;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    std::snprintf(buffer, sizeof(buffer), " %-7s%-7s%-8s|", "Easy", "Mod.", "Hard");
    out += buffer;
  }
  out += '\n';
  for (const EvalReport& report : reports) {
    std::snprintf(buffer, sizeof(buffer), "%-10s| %-6.2f|",
                  std::string(metric_name(report.metric)).c_str(), 100.0 * report.mean_ap());
    out += buffer;
    for (const ObjectClass cls : report.classes) {
      std::snprintf(buffer, sizeof(buffer), " %-7.2f%-7.2f%-8.2f|",
                    100.0 * report.cell(cls, Difficulty::kEasy).ap,
                    100.0 * report.cell(cls, Difficulty::kModerate).ap,
                    100.0 * report.cell(cls, Difficulty::kHard).ap);
      out += buffer;
    }
    out += '\n';
  }
  return out;
}

std::string format_report_kv(std::span<const EvalReport> reports) {
  std::string out;
  char buffer[160];
  for (const EvalReport& report : reports) {
    const std::string metric = lowercase(metric_name(report.metric));
    for (const EvalCell& cell : report.cells) {
      std::snprintf(buffer, sizeof(buffer), "%s.%s.%s = %.6f\n",
                    lowercase(class_token(cell.cls)).c_str(),
                    lowercase(difficulty_name(cell.difficulty)).c_str(), metric.c_str(),
                    cell.ap);
      out += buffer;
    }
    std::snprintf(buffer, sizeof(buffer), "map.%s = %.6f\n", metric.c_str(),
                  report.mean_ap());
    out += buffer;
  }
  return out;
}

}  // namespace lidarpipe
