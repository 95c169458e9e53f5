#include "lidarpipe/kitti_eval.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "oracles.h"
#include "test_support.h"

namespace lidarpipe {
namespace {

using testing_support::error_code_of;

constexpr std::array<ObjectClass, 3> kMainClasses = {ObjectClass::kCar,
                                                     ObjectClass::kPedestrian,
                                                     ObjectClass::kCyclist};

Annotation labelled(ObjectClass cls, double height_px, int occluded, double truncated) {
  Annotation a;
  a.label = cls;
  a.bbox = {100, 100, 150, 100 + height_px};
  a.occluded = occluded;
  a.truncated = truncated;
  a.dims = {1.5, 1.6, 3.9};
  a.location = {0, 1.5, 20};
  return a;
}

TEST(Names, MetricsAndModes) {
  EXPECT_EQ(metric_name(Metric::kBbox2d), "BBOX_2D");
  EXPECT_EQ(metric_name(Metric::kBboxBev), "BBOX_BEV");
  EXPECT_EQ(metric_name(Metric::kBbox3d), "BBOX_3D");
  EXPECT_EQ(parse_metric("bev"), Metric::kBboxBev);
  EXPECT_EQ(parse_metric("BBOX_3D"), Metric::kBbox3d);
  EXPECT_FALSE(parse_metric("iou").has_value());
  EXPECT_EQ(parse_ap_mode("11"), ApMode::kInterp11);
  EXPECT_EQ(parse_ap_mode("40"), ApMode::kInterp40);
  EXPECT_FALSE(parse_ap_mode("101").has_value());
  EXPECT_EQ(difficulty_name(Difficulty::kModerate), "Moderate");
}

TEST(Difficulty, Examples) {
  const DifficultyRules rules = default_difficulty_rules();
  auto counted_at = [&](const Annotation& a) {
    std::vector<bool> out;
    const std::vector<Annotation> one = {a};
    for (const auto& split : filter_difficulty(one, a.label, rules)) {
      out.push_back(!split.counted.empty());
    }
    return out;
  };
  EXPECT_EQ(counted_at(labelled(ObjectClass::kCar, 60, 0, 0.0)),
            (std::vector<bool>{true, true, true}));
  EXPECT_EQ(counted_at(labelled(ObjectClass::kCar, 60, 3, 0.0)),
            (std::vector<bool>{false, false, false}));
  EXPECT_EQ(counted_at(labelled(ObjectClass::kCar, 30, 1, 0.2)),
            (std::vector<bool>{false, true, true}));
  EXPECT_EQ(counted_at(labelled(ObjectClass::kCar, 20, 0, 0.0)),
            (std::vector<bool>{false, false, false}));
  EXPECT_EQ(counted_at(labelled(ObjectClass::kCar, 60, 0, 0.4)),
            (std::vector<bool>{false, false, true}));
  // Boundary values pass.
  EXPECT_EQ(counted_at(labelled(ObjectClass::kCar, 40, 0, 0.15)),
            (std::vector<bool>{true, true, true}));
}

TEST(Difficulty, SplitsClassesIntoRoles) {
  Annotation dc;
  dc.label = ObjectClass::kDontCare;
  const std::vector<Annotation> labels = {labelled(ObjectClass::kCar, 60, 0, 0),
                                          labelled(ObjectClass::kVan, 60, 0, 0),
                                          labelled(ObjectClass::kPedestrian, 60, 0, 0),
                                          labelled(ObjectClass::kCar, 60, 3, 0), dc};
  const auto split = filter_difficulty(labels, ObjectClass::kCar, default_difficulty_rules()[0]);
  EXPECT_EQ(split.counted, (std::vector<std::size_t>{0}));
  EXPECT_EQ(split.ignored, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(split.dont_care, (std::vector<std::size_t>{4}));
  const auto no_van =
      filter_difficulty(labels, ObjectClass::kCar, default_difficulty_rules()[0], false);
  EXPECT_EQ(no_van.ignored, (std::vector<std::size_t>{3}));
  const auto ped =
      filter_difficulty(labels, ObjectClass::kPedestrian, default_difficulty_rules()[0]);
  EXPECT_EQ(ped.counted, (std::vector<std::size_t>{2}));
  EXPECT_TRUE(ped.ignored.empty());
}

TEST(Overlap, BoxesAndThresholds) {
  EXPECT_DOUBLE_EQ(bbox_iou({0, 0, 2, 2}, {1, 0, 3, 2}), 1.0 / 3.0);
  EXPECT_EQ(bbox_iou({0, 0, 1, 1}, {2, 2, 3, 3}), 0.0);
  EXPECT_DOUBLE_EQ(bbox_coverage({0, 0, 2, 2}, {1, 0, 10, 10}), 0.5);
  EXPECT_EQ(default_min_overlap(ObjectClass::kCar), 0.7);
  EXPECT_EQ(default_min_overlap(ObjectClass::kTram), 0.7);
  EXPECT_EQ(default_min_overlap(ObjectClass::kCyclist), 0.5);
  EvalOptions opts;
  opts.min_overlap[ObjectClass::kCar] = 0.5;
  EXPECT_EQ(opts.overlap_threshold(ObjectClass::kCar), 0.5);
  EXPECT_EQ(opts.overlap_threshold(ObjectClass::kPedestrian), 0.5);
}

Eigen::MatrixXd matrix(std::initializer_list<std::initializer_list<double>> rows,
                       std::size_t cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (const double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

TEST(Match, SingleExactDetection) {
  const std::vector<double> scores = {0.9};
  const auto r = match_detections(scores, matrix({{1.0}}, 1), Eigen::MatrixXd(1, 0), 0.7);
  EXPECT_EQ(r.num_tp, 1u);
  EXPECT_EQ(r.num_fp, 0u);
  EXPECT_EQ(r.matched_gt[0], 0u);
}

TEST(Match, DuplicateBecomesFalsePositive) {
  const std::vector<double> scores = {0.8, 0.9};
  const auto r =
      match_detections(scores, matrix({{0.95}, {0.9}}, 1), Eigen::MatrixXd(2, 0), 0.7);
  EXPECT_EQ(r.outcomes[1], MatchOutcome::kTruePositive);
  EXPECT_EQ(r.outcomes[0], MatchOutcome::kFalsePositive);
}

TEST(Match, IgnoredRegionsDiscardAndAreNeverConsumed) {
  const std::vector<double> scores = {0.9, 0.8, 0.7};
  const auto r = match_detections(scores, matrix({{0.1}, {0.0}, {0.75}}, 1),
                                  matrix({{0.8}, {0.9}, {0.9}}, 1), 0.7);
  EXPECT_EQ(r.outcomes[0], MatchOutcome::kDiscarded);
  EXPECT_EQ(r.outcomes[1], MatchOutcome::kDiscarded);
  EXPECT_EQ(r.outcomes[2], MatchOutcome::kTruePositive);
  EXPECT_EQ(r.num_discarded, 2u);
}

TEST(Match, RowCountMismatchIsRejected) {
  const std::vector<double> scores = {0.9};
  EXPECT_EQ(error_code_of([&] {
              match_detections(scores, Eigen::MatrixXd(2, 1), Eigen::MatrixXd(1, 0), 0.5);
            }),
            "BadConfig");
}

TEST(Match, AgreesWithBruteForceOnSmallInstances) {
  std::mt19937_64 rng(51);
  const std::array<double, 6> levels = {0.0, 0.3, 0.5, 0.6, 0.7, 0.9};
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t d = rng() % 7;
    const std::size_t g = rng() % 7;
    const std::size_t ig = rng() % 3;
    std::vector<double> scores(d);
    for (auto& s : scores) s = static_cast<double>(rng() % 4) / 4.0;
    Eigen::MatrixXd counted(d, g), ignored(d, ig);
    std::vector<std::vector<double>> c_rows(d, std::vector<double>(g));
    std::vector<std::vector<double>> i_rows(d, std::vector<double>(ig));
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < g; ++j) counted(i, j) = c_rows[i][j] = levels[rng() % 6];
      for (std::size_t j = 0; j < ig; ++j) ignored(i, j) = i_rows[i][j] = levels[rng() % 6];
    }
    const auto got = match_detections(scores, counted, ignored, 0.6);
    const auto want = oracle::brute_force_match(scores, c_rows, i_rows, 0.6);
    for (std::size_t i = 0; i < d; ++i) {
      const int outcome = got.outcomes[i] == MatchOutcome::kTruePositive    ? 1
                          : got.outcomes[i] == MatchOutcome::kFalsePositive ? 0
                                                                            : -1;
      ASSERT_EQ(outcome, want.outcome[i]) << "trial " << trial << " det " << i;
      ASSERT_EQ(got.matched_gt[i] ? static_cast<int>(*got.matched_gt[i]) : -1, want.matched[i]);
    }
    EXPECT_LE(got.num_tp, g);
    EXPECT_EQ(got.num_tp + got.num_fp + got.num_discarded, d);
  }
}

std::vector<ScoredOutcome> outcomes_of(const std::vector<MatchOutcome>& seq) {
  std::vector<ScoredOutcome> out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    out.push_back({1.0 - 0.01 * static_cast<double>(i), 0, i, seq[i]});
  }
  return out;
}

TEST(AveragePrecision, Examples) {
  using enum MatchOutcome;
  const auto one_tp_one_fp = precision_recall(outcomes_of({kTruePositive, kFalsePositive}), 2);
  ASSERT_EQ(one_tp_one_fp.points.size(), 2u);
  EXPECT_EQ(one_tp_one_fp.points[0].precision, 1.0);
  EXPECT_EQ(one_tp_one_fp.points[0].recall, 0.5);
  EXPECT_NEAR(average_precision(one_tp_one_fp, ApMode::kInterp11), 6.0 / 11.0, 1e-12);
  EXPECT_NEAR(average_precision(one_tp_one_fp, ApMode::kInterp40), 0.5, 1e-12);

  const auto perfect = precision_recall(outcomes_of({kTruePositive, kTruePositive}), 2);
  EXPECT_EQ(average_precision(perfect, ApMode::kInterp11), 1.0);
  EXPECT_EQ(average_precision(perfect, ApMode::kInterp40), 1.0);
  EXPECT_EQ(average_precision(precision_recall({}, 3), ApMode::kInterp40), 0.0);
  EXPECT_EQ(average_precision(precision_recall({}, 0), ApMode::kInterp11), 0.0);

  // Discarded detections do not appear on the curve.
  const auto with_discard =
      precision_recall(outcomes_of({kDiscarded, kTruePositive, kFalsePositive}), 2);
  EXPECT_EQ(with_discard.points.size(), 2u);
  EXPECT_NEAR(average_precision(with_discard, ApMode::kInterp11), 6.0 / 11.0, 1e-12);
}

TEST(AveragePrecision, OrdersByScoreThenFrameThenIndex) {
  using enum MatchOutcome;
  const std::vector<ScoredOutcome> outcomes = {{0.5, 1, 0, kFalsePositive},
                                               {0.5, 0, 1, kTruePositive},
                                               {0.5, 0, 0, kFalsePositive},
                                               {0.9, 2, 0, kTruePositive}};
  const auto curve = precision_recall(outcomes, 2);
  ASSERT_EQ(curve.points.size(), 4u);
  EXPECT_EQ(curve.points[0].tp, 1u);
  EXPECT_EQ(curve.points[1].fp, 1u);
  EXPECT_EQ(curve.points[2].tp, 2u);
  EXPECT_EQ(curve.points[3].fp, 2u);
}

TEST(AveragePrecision, MatchesDefinitionOnRandomCurves) {
  std::mt19937_64 rng(52);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t num_gt = 1 + rng() % 12;
    std::vector<MatchOutcome> seq;
    std::vector<std::pair<int, int>> ranks;
    int tp = 0, fp = 0;
    const std::size_t n = rng() % 20;
    for (std::size_t i = 0; i < n; ++i) {
      const bool hit = static_cast<std::size_t>(tp) < num_gt && rng() % 2 == 0;
      seq.push_back(hit ? MatchOutcome::kTruePositive : MatchOutcome::kFalsePositive);
      (hit ? tp : fp)++;
      ranks.emplace_back(tp, fp);
    }
    const auto curve = precision_recall(outcomes_of(seq), num_gt);
    for (const ApMode mode : {ApMode::kInterp11, ApMode::kInterp40}) {
      EXPECT_NEAR(average_precision(curve, mode), oracle::reference_ap(ranks, num_gt, mode),
                  1e-12);
    }
  }
}

TEST(AveragePrecision, MonotoneUnderAddedDetections) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t num_gt = 2 + rng() % 10;
    std::vector<MatchOutcome> seq;
    std::size_t tps = 0;
    for (std::size_t i = 0, n = rng() % 15; i < n; ++i) {
      const bool hit = tps + 1 < num_gt && rng() % 2 == 0;
      tps += hit;
      seq.push_back(hit ? MatchOutcome::kTruePositive : MatchOutcome::kFalsePositive);
    }
    for (const ApMode mode : {ApMode::kInterp11, ApMode::kInterp40}) {
      const double base = average_precision(precision_recall(outcomes_of(seq), num_gt), mode);
      auto with_tp = seq;
      with_tp.insert(with_tp.begin() + static_cast<std::ptrdiff_t>(rng() % (seq.size() + 1)),
                     MatchOutcome::kTruePositive);
      EXPECT_GE(average_precision(precision_recall(outcomes_of(with_tp), num_gt), mode), base);
      auto with_fp = seq;
      with_fp.push_back(MatchOutcome::kFalsePositive);
      EXPECT_LE(average_precision(precision_recall(outcomes_of(with_fp), num_gt), mode), base);
    }
  }
}

class MiniBenchmarkEval : public ::testing::Test {
 protected:
  testing_support::MiniBenchmark mb_ = testing_support::load_mini_benchmark();
};

TEST_F(MiniBenchmarkEval, EqualsBruteForceEvaluator) {
  for (const Metric metric : {Metric::kBbox2d, Metric::kBboxBev, Metric::kBbox3d}) {
    for (const ApMode mode : {ApMode::kInterp11, ApMode::kInterp40}) {
      EvalOptions opts;
      opts.mode = mode;
      const auto report =
          evaluate(mb_.detections, mb_.ground_truth, mb_.calibrations, metric, kMainClasses, opts);
      const auto oracle_aps = oracle::brute_force_evaluate(
          mb_.detections, mb_.ground_truth, mb_.calibrations, metric, kMainClasses, mode);
      ASSERT_EQ(report.cells.size(), oracle_aps.size());
      for (std::size_t i = 0; i < oracle_aps.size(); ++i) {
        EXPECT_EQ(report.cells[i].ap, oracle_aps[i])
            << metric_name(metric) << " cell " << i;
      }
    }
  }
}

TEST_F(MiniBenchmarkEval, OracleComparisonIsNotDegenerate) {
  int partial = 0;
  for (const Metric metric : {Metric::kBbox2d, Metric::kBboxBev, Metric::kBbox3d}) {
    const auto report = evaluate(mb_.detections, mb_.ground_truth, mb_.calibrations, metric,
                                 kMainClasses, EvalOptions{});
    for (const auto& cell : report.cells) partial += cell.ap > 0.0 && cell.ap < 1.0;
  }
  EXPECT_GE(partial, 10);
}

TEST_F(MiniBenchmarkEval, GroundTruthAsDetectionsScoresOne) {
  const auto dets = testing_support::detections_from_labels(mb_.ground_truth);
  for (const Metric metric : {Metric::kBbox2d, Metric::kBboxBev, Metric::kBbox3d}) {
    const auto report =
        evaluate(dets, mb_.ground_truth, mb_.calibrations, metric, kMainClasses, EvalOptions{});
    for (const auto& cell : report.cells) {
      EXPECT_GT(cell.num_gt, 0u);
      EXPECT_EQ(cell.ap, 1.0);
      EXPECT_EQ(cell.num_fp, 0u);
    }
    EXPECT_EQ(report.mean_ap(), 1.0);
  }
}

TEST_F(MiniBenchmarkEval, NoDetectionsScoresZero) {
  FrameDetections empty;
  for (const auto& id : testing_support::mini_frame_ids()) empty[id] = {};
  const auto report = evaluate(empty, mb_.ground_truth, mb_.calibrations, Metric::kBbox2d,
                               kMainClasses, EvalOptions{});
  for (const auto& cell : report.cells) EXPECT_EQ(cell.ap, 0.0);
  EXPECT_EQ(report.mean_ap(), 0.0);
}

TEST_F(MiniBenchmarkEval, CountsAndMeanIdentity) {
  for (const Metric metric : {Metric::kBbox2d, Metric::kBboxBev, Metric::kBbox3d}) {
    const auto report = evaluate(mb_.detections, mb_.ground_truth, mb_.calibrations, metric,
                                 kMainClasses, EvalOptions{});
    double sum = 0.0;
    for (const auto& cell : report.cells) {
      sum += cell.ap;
      EXPECT_LE(cell.num_tp, cell.num_gt);
      std::size_t dets = 0;
      for (const auto& [id, list] : mb_.detections) {
        dets += std::count_if(list.begin(), list.end(),
                              [&](const Detection& d) { return d.object.label == cell.cls; });
      }
      EXPECT_EQ(cell.num_tp + cell.num_fp + cell.num_discarded, dets);
    }
    EXPECT_NEAR(report.mean_ap(), sum / static_cast<double>(report.cells.size()), 1e-12);
  }
}

TEST_F(MiniBenchmarkEval, DetectionOrderWithinFramesDoesNotMatter) {
  std::set<double> scores;
  std::size_t total = 0;
  for (const auto& [id, list] : mb_.detections) {
    for (const auto& d : list) scores.insert(d.score);
    total += list.size();
  }
  ASSERT_EQ(scores.size(), total);
  std::mt19937_64 rng(54);
  FrameDetections shuffled = mb_.detections;
  for (auto& [id, list] : shuffled) std::shuffle(list.begin(), list.end(), rng);
  for (const Metric metric : {Metric::kBbox2d, Metric::kBbox3d}) {
    const auto a = evaluate(mb_.detections, mb_.ground_truth, mb_.calibrations, metric,
                            kMainClasses, EvalOptions{});
    const auto b =
        evaluate(shuffled, mb_.ground_truth, mb_.calibrations, metric, kMainClasses, EvalOptions{});
    for (std::size_t i = 0; i < a.cells.size(); ++i) EXPECT_EQ(a.cells[i].ap, b.cells[i].ap);
  }
}

TEST_F(MiniBenchmarkEval, EqualScoresFollowFrameOrder) {
  // Two identical detections on one gt in different frames: only pooled order
  // decides which curve point comes first, and the result is stable.
  FrameAnnotations gts;
  FrameDetections dets;
  FrameCalibrations calibs;
  const Annotation car = labelled(ObjectClass::kCar, 60, 0, 0);
  gts["a"] = {car};
  gts["b"] = {};
  dets["a"] = {{car, 0.5}};
  Annotation off = car;
  off.bbox = {500, 100, 550, 160};
  dets["b"] = {{off, 0.5}};
  const auto r = evaluate(dets, gts, calibs, Metric::kBbox2d, kMainClasses, EvalOptions{});
  EXPECT_NEAR(r.cell(ObjectClass::kCar, Difficulty::kEasy).ap, 1.0, 1e-12);
}

TEST_F(MiniBenchmarkEval, FrameSetMismatch) {
  auto dets = mb_.detections;
  dets.erase("000003");
  EXPECT_EQ(error_code_of([&] {
              evaluate(dets, mb_.ground_truth, mb_.calibrations, Metric::kBbox2d, kMainClasses,
                       EvalOptions{});
            }),
            "FrameSetMismatch");
  auto calibs = mb_.calibrations;
  calibs.erase("000001");
  EXPECT_EQ(error_code_of([&] {
              evaluate(mb_.detections, mb_.ground_truth, calibs, Metric::kBboxBev, kMainClasses,
                       EvalOptions{});
            }),
            "FrameSetMismatch");
  EXPECT_EQ(error_code_of([&] {
              evaluate(mb_.detections, mb_.ground_truth, calibs, Metric::kBbox2d, kMainClasses,
                       EvalOptions{});
            }),
            "no error");
}

TEST_F(MiniBenchmarkEval, ReportFormats) {
  std::vector<EvalReport> reports;
  for (const Metric metric : {Metric::kBbox2d, Metric::kBbox3d}) {
    reports.push_back(evaluate(mb_.detections, mb_.ground_truth, mb_.calibrations, metric,
                               kMainClasses, EvalOptions{}));
  }
  const std::string table = format_report_table(reports);
  EXPECT_NE(table.find("Metric"), std::string::npos);
  EXPECT_NE(table.find("Pedestrian"), std::string::npos);
  EXPECT_NE(table.find("BBOX_3D"), std::string::npos);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 4);

  const std::string kv = format_report_kv(reports);
  EXPECT_EQ(std::count(kv.begin(), kv.end(), '\n'), 20);
  char expected[64];
  std::snprintf(expected, sizeof(expected), "car.moderate.bbox_3d = %.6f\n",
                reports[1].cell(ObjectClass::kCar, Difficulty::kModerate).ap);
  EXPECT_NE(kv.find(expected), std::string::npos);
  std::snprintf(expected, sizeof(expected), "map.bbox_2d = %.6f\n", reports[0].mean_ap());
  EXPECT_NE(kv.find(expected), std::string::npos);
  EXPECT_EQ(error_code_of([&] { reports[0].cell(ObjectClass::kTram, Difficulty::kEasy); }),
            "BadConfig");
}

}  // namespace
}  // namespace lidarpipe
