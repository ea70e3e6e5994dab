#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "synmix/annotation.hpp"

namespace synmix {

struct Detection {
  std::string image_id;
  int class_id = 0;
  double confidence = 0.0;
  BoundingBox box;
};

struct GroundTruth {
  std::string image_id;
  int class_id = 0;
  BoundingBox box;
};

struct EvalConfig {
  std::vector<double> iou_thresholds = coco_thresholds();
  double nms_iou = 0.7;
  /// Detector adapters usually suppress duplicates themselves.
  bool apply_nms = false;
  bool per_class = true;

  /// 0.50, 0.55, ..., 0.95.
  static std::vector<double> coco_thresholds();
  void validate() const;
};

struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;
};

struct Match {
  std::size_t detection;                 // index into the detection span
  std::optional<std::size_t> truth;      // index into the truth span, nullopt for FP
  double iou = 0.0;
};

struct MatchResult {
  ConfusionCounts counts;
  std::vector<Match> matches;  // in visiting order
};

/// Intersection over union; 0 for disjoint or zero-area boxes.
template <typename Scalar>
Scalar iou(const Box<Scalar>& a, const Box<Scalar>& b) {
  const Scalar iw = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const Scalar ih = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  if (iw <= Scalar(0) || ih <= Scalar(0)) return Scalar(0);
  const Scalar inter = iw * ih;
  const Scalar uni = a.area() + b.area() - inter;
  return uni > Scalar(0) ? inter / uni : Scalar(0);
}

/// Visiting order used everywhere: confidence desc, box area desc, input order.
std::vector<std::size_t> confidence_order(std::span<const Detection> dets);

/// Greedy per-class suppression of detections from one image. Survivors are
/// returned in confidence order.
std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold);

/// Greedy matching per (image, class): detections in confidence order each
/// take the unmatched truth with the highest IoU >= threshold.
MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruth> truths,
                             double iou_threshold);

/// nullopt marks an undefined ratio (zero denominator).
struct Prf {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

Prf prf(const ConfusionCounts& counts);

struct PrPoint {
  double recall;
  double precision;
  friend bool operator==(const PrPoint&, const PrPoint&) = default;
};

/// One point per distinct confidence cut-off, in descending-confidence order.
/// Empty when the class has no ground truth or no detections.
std::vector<PrPoint> pr_curve(std::span<const Detection> dets, std::span<const GroundTruth> truths,
                              int class_id, double iou_threshold);

/// 101-point interpolated AP over the monotone precision envelope.
double average_precision(std::span<const PrPoint> curve);

struct ClassScores {
  int class_id;
  long truth_count;
  std::vector<double> ap;  // per configured threshold
  double ap50;
};

struct MapScores {
  double map50 = 0.0;
  double map50_95 = 0.0;
  std::vector<double> thresholds;
  std::vector<double> map_per_threshold;
  std::vector<ClassScores> per_class;  // classes with >= 1 truth
};

/// Unweighted mean of per-class AP over classes that have ground truth.
MapScores map_scores(std::span<const Detection> dets, std::span<const GroundTruth> truths,
                     const EvalConfig& config = {});

// --- file formats ----------------------------------------------------------

/// Lines of "image_id class_id confidence cx cy w h".
std::vector<Detection> parse_detections(std::string_view text);
std::vector<Detection> read_detections(const std::filesystem::path& path);
std::string emit_detections(std::span<const Detection> dets);

/// CSV with header metric,class,threshold,value.
std::string map_scores_csv(const MapScores& scores);

std::vector<GroundTruth> truths_from(std::span<const LabeledImage> images);

}  // namespace synmix
