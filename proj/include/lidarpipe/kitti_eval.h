#ifndef LIDARPIPE_KITTI_EVAL_H_
#define LIDARPIPE_KITTI_EVAL_H_

// KITTI-style detection evaluation: difficulty strata, greedy matching under
// 2D / BEV / 3D overlap, interpolated average precision and report output.

#include <Eigen/Core>
#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lidarpipe/kitti_io.h"

namespace lidarpipe {

enum class Difficulty { kEasy = 0, kModerate = 1, kHard = 2 };
inline constexpr std::array<Difficulty, 3> kDifficulties = {
    Difficulty::kEasy, Difficulty::kModerate, Difficulty::kHard};
std::string_view difficulty_name(Difficulty d);

enum class Metric { kBbox2d, kBboxBev, kBbox3d };
std::string_view metric_name(Metric m);  // "BBOX_2D", "BBOX_BEV", "BBOX_3D"
std::optional<Metric> parse_metric(std::string_view name);

enum class ApMode { kInterp11, kInterp40 };
std::optional<ApMode> parse_ap_mode(std::string_view name);  // "11" / "40"

struct DifficultyRule {
  double min_bbox_height = 0.0;  // pixels
  int max_occlusion = 0;
  double max_truncation = 0.0;
};
using DifficultyRules = std::array<DifficultyRule, 3>;

// Easy 40 px / 0 / 0.15, Moderate 25 px / 1 / 0.30, Hard 25 px / 2 / 0.50.
DifficultyRules default_difficulty_rules();

// Indices into the annotation list of one frame.
struct GroundTruthSplit {
  std::vector<std::size_t> counted;    // target class, passes the rule
  std::vector<std::size_t> ignored;    // target class failing it, or a
                                       // similar class (Van for Car)
  std::vector<std::size_t> dont_care;  // DontCare regions
};

GroundTruthSplit filter_difficulty(std::span<const Annotation> annotations,
                                   ObjectClass target, const DifficultyRule& rule,
                                   bool van_ignored_for_car = true);
std::array<GroundTruthSplit, 3> filter_difficulty(
    std::span<const Annotation> annotations, ObjectClass target,
    const DifficultyRules& rules, bool van_ignored_for_car = true);

enum class MatchOutcome { kTruePositive, kFalsePositive, kDiscarded };

struct MatchResult {
  std::vector<MatchOutcome> outcomes;  // per detection, input order
  // Counted gt index matched by each detection; only set for true positives.
  std::vector<std::optional<std::size_t>> matched_gt;
  std::size_t num_tp = 0;
  std::size_t num_fp = 0;
  std::size_t num_discarded = 0;
};

// Detections are visited in descending score order (lower index first on
// ties). Each takes the unmatched counted gt with the highest overlap at or
// above `threshold` (lower gt index on ties) and becomes a true positive.
// Otherwise it is discarded when any entry of its `ignored_overlap` row
// reaches the threshold, and a false positive if not. Overlap matrices are
// detections x gts; ignored entries are never consumed.
MatchResult match_detections(std::span<const double> scores,
                             const Eigen::MatrixXd& counted_overlap,
                             const Eigen::MatrixXd& ignored_overlap, double threshold);

struct ScoredOutcome {
  double score = 0.0;
  std::size_t frame = 0;
  std::size_t detection = 0;
  MatchOutcome outcome = MatchOutcome::kFalsePositive;
};

struct PrPoint {
  std::size_t tp = 0;
  std::size_t fp = 0;
  double recall = 0.0;
  double precision = 0.0;
};

struct PrCurve {
  std::size_t num_gt = 0;
  std::vector<PrPoint> points;  // one per non-discarded detection, score order
};

// Orders by descending score, then frame, then detection index.
PrCurve precision_recall(std::span<const ScoredOutcome> outcomes, std::size_t num_gt);

// Mean over the sampled recall levels of the best precision at or beyond
// that recall: {0, 0.1, ..., 1} for kInterp11, {1/40, ..., 1} for kInterp40.
// Zero when there is no ground truth.
double average_precision(const PrCurve& curve, ApMode mode);

// Axis-aligned 2D IoU; and intersection over the area of `det`, used for
// DontCare regions.
double bbox_iou(const BBox2D& a, const BBox2D& b);
double bbox_coverage(const BBox2D& det, const BBox2D& region);

// 0.7 for Car, Van, Truck and Tram; 0.5 otherwise.
double default_min_overlap(ObjectClass cls);

struct EvalOptions {
  DifficultyRules rules = default_difficulty_rules();
  // Per-class overrides of default_min_overlap.
  std::map<ObjectClass, double> min_overlap;
  ApMode mode = ApMode::kInterp40;
  bool van_ignored_for_car = true;

  double overlap_threshold(ObjectClass cls) const;
};

struct EvalCell {
  ObjectClass cls = ObjectClass::kCar;
  Difficulty difficulty = Difficulty::kEasy;
  double ap = 0.0;
  std::size_t num_gt = 0;
  std::size_t num_tp = 0;
  std::size_t num_fp = 0;
  std::size_t num_discarded = 0;
};

struct EvalReport {
  Metric metric = Metric::kBbox3d;
  ApMode mode = ApMode::kInterp40;
  std::vector<ObjectClass> classes;
  std::vector<EvalCell> cells;  // class-major, Easy / Moderate / Hard

  const EvalCell& cell(ObjectClass cls, Difficulty d) const;
  double mean_ap() const;
};

using FrameDetections = std::map<std::string, std::vector<Detection>>;
using FrameAnnotations = std::map<std::string, std::vector<Annotation>>;
using FrameCalibrations = std::map<std::string, Calibration>;

// Frames are keyed by id and visited in key order. The detection and ground
// truth key sets must be identical, and BEV / 3D metrics need a calibration
// for every frame; otherwise Error(kFrameSetMismatch). BEV and 3D overlaps
// use LiDAR-frame boxes from camera_label_to_lidar_box; DontCare regions only
// take part in the 2D metric.
EvalReport evaluate(const FrameDetections& detections,
                    const FrameAnnotations& ground_truth,
                    const FrameCalibrations& calibrations, Metric metric,
                    std::span<const ObjectClass> classes, const EvalOptions& options);

// Aligned text table, AP in percent with two decimals:
//   Metric    | mAP   | Car Easy Mod. Hard | Pedestrian ... |
std::string format_report_table(std::span<const EvalReport> reports);
// One "class.difficulty.metric = value" line per cell plus "map.metric".
std::string format_report_kv(std::span<const EvalReport> reports);

}  // namespace lidarpipe

#endif  // LIDARPIPE_KITTI_EVAL_H_
