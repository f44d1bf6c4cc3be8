#include "ncl/localize.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "ncl/config.hpp"

namespace ncl {

bool detection_rank_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  return std::tie(a.video_id, a.start, a.end, a.label) < std::tie(b.video_id, b.start, b.end, b.label);
}

double temporal_iou(const Detection& a, const Detection& b) {
  const std::size_t lo = std::max(a.start, b.start);
  const std::size_t hi = std::min(a.end, b.end);
  const double inter = hi >= lo ? static_cast<double>(hi - lo + 1) : 0.0;
  const double len_a = static_cast<double>(a.end - a.start + 1);
  const double len_b = static_cast<double>(b.end - b.start + 1);
  return inter / (len_a + len_b - inter);
}

std::vector<Detection> generate_candidates(const std::string& video_id, std::span<const ClassDistribution> dists,
                                           std::span<const double> mask_scores,
                                           std::span<const double> classification_thresholds,
                                           std::span<const double> mask_thresholds) {
  if (dists.size() != mask_scores.size()) {
    throw Error(ErrorCode::LengthMismatch, "distributions and mask scores differ in length for " + video_id);
  }
  const std::size_t n = dists.size();
  if (n == 0 || classification_thresholds.empty() || mask_thresholds.empty()) return {};

  // Every class threshold at or below a seed's probability admits the same
  // candidate, so only the loosest one matters.
  const double loosest_class = *std::min_element(classification_thresholds.begin(), classification_thresholds.end());

  std::vector<ClassIndex> seed_class(n);
  std::vector<double> seed_prob(n);
  for (std::size_t t = 0; t < n; ++t) {
    const auto p = dists[t].probs();
    const auto actions = p.first(p.size() - 1);
    seed_class[t] = argmax(actions);
    seed_prob[t] = actions[seed_class[t]];
  }
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t t = 0; t < n; ++t) prefix[t + 1] = prefix[t] + mask_scores[t];

  std::map<std::tuple<std::size_t, std::size_t, ClassIndex>, double> best;
  for (double mask_threshold : std::set<double>(mask_thresholds.begin(), mask_thresholds.end())) {
    std::size_t t = 0;
    while (t < n) {
      if (!(mask_scores[t] >= mask_threshold)) {
        ++t;
        continue;
      }
      const std::size_t run_start = t;
      while (t < n && mask_scores[t] >= mask_threshold) ++t;
      const std::size_t run_end = t - 1;
      const double mean_mask =
          (prefix[run_end + 1] - prefix[run_start]) / static_cast<double>(run_end - run_start + 1);
      for (std::size_t s = run_start; s <= run_end; ++s) {
        if (!(seed_prob[s] >= loosest_class)) continue;
        const double score = seed_prob[s] * mean_mask;
        auto [it, inserted] = best.try_emplace({run_start, run_end, seed_class[s]}, score);
        if (!inserted) it->second = std::max(it->second, score);
      }
    }
  }

  std::vector<Detection> out;
  out.reserve(best.size());
  for (const auto& [key, score] : best) {
    out.push_back(Detection{video_id, std::get<0>(key), std::get<1>(key), std::get<2>(key), score});
  }
  return out;
}

std::vector<Detection> soft_nms(std::vector<Detection> detections, double sigma, double score_floor) {
  std::erase_if(detections, [score_floor](const Detection& d) { return d.score < score_floor; });
  std::vector<Detection> kept;
  kept.reserve(detections.size());
  while (!detections.empty()) {
    const auto best_it = std::min_element(detections.begin(), detections.end(), detection_rank_before);
    Detection best = std::move(*best_it);
    detections.erase(best_it);
    for (auto& d : detections) {
      const double iou = temporal_iou(best, d);
      d.score *= std::exp(-(iou * iou) / sigma);
    }
    std::erase_if(detections, [score_floor](const Detection& d) { return d.score < score_floor; });
    kept.push_back(std::move(best));
  }
  return kept;
}

std::vector<Detection> soft_nms_per_class(const std::vector<Detection>& detections, double sigma,
                                          double score_floor) {
  std::map<std::pair<std::string, ClassIndex>, std::vector<Detection>> groups;
  for (const auto& d : detections) groups[{d.video_id, d.label}].push_back(d);
  std::vector<Detection> out;
  for (auto& [key, group] : groups) {
    auto kept = soft_nms(std::move(group), sigma, score_floor);
    out.insert(out.end(), std::make_move_iterator(kept.begin()), std::make_move_iterator(kept.end()));
  }
  return out;
}

namespace {

double average_precision(const std::vector<const Detection*>& ranked, const std::vector<const Detection*>& truth,
                         double threshold) {
  if (truth.empty()) return 0.0;
  std::vector<bool> matched(truth.size(), false);
  std::vector<double> precision;
  std::vector<double> recall;
  precision.reserve(ranked.size());
  recall.reserve(ranked.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    const Detection& det = *ranked[k];
    double best_iou = -1.0;
    std::size_t best_gt = truth.size();
    for (std::size_t g = 0; g < truth.size(); ++g) {
      if (matched[g] || truth[g]->video_id != det.video_id) continue;
      const double iou = temporal_iou(det, *truth[g]);
      if (iou > best_iou) {
        best_iou = iou;
        best_gt = g;
      }
    }
    if (best_gt < truth.size() && best_iou >= threshold) {
      matched[best_gt] = true;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(truth.size()));
  }
  // Precision envelope from the right, then area under the step curve.
  for (std::size_t k = precision.size(); k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < precision.size(); ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return ap;
}

}  // namespace

MapResult mean_average_precision(const std::vector<Detection>& detections,
                                 const std::vector<Detection>& ground_truth, std::span<const double> tiou_grid) {
  MapResult result;
  result.thresholds.assign(tiou_grid.begin(), tiou_grid.end());
  result.map_per_threshold.assign(tiou_grid.size(), 0.0);

  std::map<ClassIndex, std::vector<const Detection*>> truth_by_class;
  for (const auto& g : ground_truth) truth_by_class[g.label].push_back(&g);
  for (auto& [c, truth] : truth_by_class) {
    std::sort(truth.begin(), truth.end(), [](const Detection* a, const Detection* b) {
      return std::tie(a->video_id, a->start, a->end) < std::tie(b->video_id, b->start, b->end);
    });
  }
  std::map<ClassIndex, std::vector<const Detection*>> dets_by_class;
  for (const auto& d : detections) dets_by_class[d.label].push_back(&d);
  for (auto& [c, ranked] : dets_by_class) {
    std::sort(ranked.begin(), ranked.end(),
              [](const Detection* a, const Detection* b) { return detection_rank_before(*a, *b); });
    if (!truth_by_class.count(c)) result.skipped_classes.push_back(c);
  }

  if (truth_by_class.empty()) return result;
  for (const auto& [c, truth] : truth_by_class) {
    static const std::vector<const Detection*> kNone;
    const auto it = dets_by_class.find(c);
    const auto& ranked = it == dets_by_class.end() ? kNone : it->second;
    auto& aps = result.per_class_ap[c];
    for (double threshold : tiou_grid) aps.push_back(average_precision(ranked, truth, threshold));
  }
  for (std::size_t t = 0; t < tiou_grid.size(); ++t) {
    double sum = 0.0;
    for (const auto& [c, aps] : result.per_class_ap) sum += aps[t];
    result.map_per_threshold[t] = sum / static_cast<double>(result.per_class_ap.size());
  }
  double total = 0.0;
  for (double m : result.map_per_threshold) total += m;
  result.average_map = tiou_grid.empty() ? 0.0 : total / static_cast<double>(tiou_grid.size());
  return result;
}

std::string format_detections(const std::vector<Detection>& detections) {
  std::string out;
  for (const auto& d : detections) {
    out += d.video_id + ' ' + std::to_string(d.start) + ' ' + std::to_string(d.end) + ' ' +
           std::to_string(d.label + 1) + ' ' + format_double(d.score) + '\n';
  }
  return out;
}

std::vector<Detection> parse_detections(const std::string& text) {
  std::vector<Detection> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    Detection d;
    std::size_t label = 0;
    if (!(fields >> d.video_id >> d.start >> d.end >> label >> d.score) || label == 0 || d.start > d.end) {
      throw Error(ErrorCode::CorruptRecord, "detection line " + std::to_string(line_no) + " is malformed");
    }
    d.label = label - 1;
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace ncl
