#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ncl/config.hpp"
#include "ncl/core.hpp"

namespace ncl {

inline constexpr double kLogClamp = 1e-12;

/// A scalar loss and its gradient. For the classification losses the
/// gradient is taken with respect to the logits that produced the
/// distribution (softmax folded in).
struct LossValue {
  double loss = 0.0;
  std::vector<double> grad;
};

/// -log p_target.
LossValue target_loss(const ClassDistribution& dist, ClassIndex target);

/// -sum_{c in negatives} log(1 - p_c).
LossValue negative_loss(const ClassDistribution& dist, std::span<const ClassIndex> negatives);

/// -sum_{c in positives} log p_c.
LossValue positive_loss(const ClassDistribution& dist, std::span<const ClassIndex> positives);

/// -sum_c q_c log p_c against a soft target q.
LossValue soft_target_loss(const ClassDistribution& dist, std::span<const double> soft_target);

/// Mean binary cross-entropy; the gradient is with respect to the scores.
LossValue mask_loss(std::span<const double> scores, std::span<const double> targets);

/// Weighted components of one batch objective. `total` is what the
/// optimizer sees:
///   supervised_target + supervised_negative
///   + alpha * (unsupervised_target + unsupervised_positive + unsupervised_negative)
///   + mask
struct LossBreakdown {
  double supervised_target = 0.0;
  double supervised_negative = 0.0;
  double unsupervised_target = 0.0;
  double unsupervised_positive = 0.0;
  double unsupervised_negative = 0.0;
  double mask = 0.0;
  double alpha = 1.0;
  double total = 0.0;

  double target() const { return supervised_target + unsupervised_target; }
  double positive() const { return unsupervised_positive; }
  double negative() const { return supervised_negative + unsupervised_negative; }
  double recomputed_total() const {
    return supervised_target + supervised_negative +
           alpha * (unsupervised_target + unsupervised_positive + unsupervised_negative) + mask;
  }

  bool operator==(const LossBreakdown&) const = default;
};

struct LossOptions {
  Objective objective = Objective::Hybrid;
  bool use_negative = true;
  bool use_positive = true;
  bool normalize_by_set_size = false;
  double alpha = 1.0;

  static LossOptions from_config(const ExperimentConfig& config);
};

/// One snippet as seen by the loss: its supervision and, for labeled
/// snippets, the foreground target for the mask head.
struct BatchEntry {
  const Supervision* supervision = nullptr;
  std::optional<double> mask_target;
};

struct BatchPrediction {
  ClassDistribution dist;
  double mask_score = 0.5;
};

struct CombinedLoss {
  LossBreakdown breakdown;
  std::vector<std::vector<double>> grad_logits;  // per entry
  std::vector<double> grad_mask_logit;            // per entry; zero without a mask target
};

/// Labeled snippets: CE on the ground truth plus (unless disabled) the
/// negative loss over every non-target class. Pseudo-labeled snippets: the
/// objective-specific unlabeled loss, weighted by alpha. Each group is
/// averaged over its own snippet count; the mask term over snippets with a
/// mask target. Throws UnresolvedSupervision for Unlabeled entries.
CombinedLoss combined_loss(std::span<const BatchEntry> entries, std::span<const BatchPrediction> predictions,
                           const LossOptions& options);

}  // namespace ncl
