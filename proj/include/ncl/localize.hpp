#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ncl/core.hpp"

namespace ncl {

/// A scored temporal segment. `start`/`end` are inclusive snippet indices;
/// `label` is 0-based and never background. Ground truth uses score 1.
struct Detection {
  std::string video_id;
  std::size_t start = 0;
  std::size_t end = 0;
  ClassIndex label = 0;
  double score = 0.0;

  bool operator==(const Detection&) const = default;
};

/// Score descending, then (video, start, end, label) ascending.
bool detection_rank_before(const Detection& a, const Detection& b);

/// Intersection over union of inclusive snippet spans.
double temporal_iou(const Detection& a, const Detection& b);

/// Seeds are snippets whose best action-class probability reaches the class
/// threshold and whose mask score reaches the mask threshold. Each seed grows
/// to the maximal run of mask >= threshold around it, is labeled with the
/// seed's best action class and scored p(seed class) * mean run mask. Only the
/// best score per (start, end, label) survives. Output is sorted by
/// (start, end, label).
std::vector<Detection> generate_candidates(const std::string& video_id, std::span<const ClassDistribution> dists,
                                           std::span<const double> mask_scores,
                                           std::span<const double> classification_thresholds,
                                           std::span<const double> mask_thresholds);

/// Gaussian Soft-NMS: repeatedly keep the best remaining detection and decay
/// every other one by exp(-iou^2 / sigma); anything that falls below
/// `score_floor` is dropped. Returned in selection order.
std::vector<Detection> soft_nms(std::vector<Detection> detections, double sigma, double score_floor);

/// Runs soft_nms separately for each (video, label) group.
std::vector<Detection> soft_nms_per_class(const std::vector<Detection>& detections, double sigma, double score_floor);

struct MapResult {
  std::vector<double> thresholds;
  std::vector<double> map_per_threshold;
  double average_map = 0.0;
  /// ap[class][threshold index] for classes with ground truth.
  std::map<ClassIndex, std::vector<double>> per_class_ap;
  /// Classes that had detections but no ground truth (skipped).
  std::vector<ClassIndex> skipped_classes;
};

/// All-points interpolated AP per class and tIoU threshold with greedy
/// highest-score-first matching; each ground-truth instance is matched at
/// most once. mAP averages classes that have ground truth.
MapResult mean_average_precision(const std::vector<Detection>& detections,
                                 const std::vector<Detection>& ground_truth, std::span<const double> tiou_grid);

/// One detection per line: video start end class(1-based) score.
std::string format_detections(const std::vector<Detection>& detections);
std::vector<Detection> parse_detections(const std::string& text);

}  // namespace ncl
