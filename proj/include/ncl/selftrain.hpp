#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ncl/config.hpp"
#include "ncl/core.hpp"
#include "ncl/datagen.hpp"
#include "ncl/losses.hpp"
#include "ncl/model.hpp"

namespace ncl {

/// Where the hidden ground truth of pseudo-labeled snippets fell.
struct SubspaceStatistics {
  std::size_t snippets = 0;
  std::size_t mislabeled = 0;  // ground truth != pseudo target
  double target = 0.0;
  double positive = 0.0;
  double ambiguous = 0.0;
  double negative = 0.0;
  /// Conditioned on ground truth != target; zero when nothing is mislabeled.
  double positive_given_wrong = 0.0;
  double ambiguous_given_wrong = 0.0;
  double negative_given_wrong = 0.0;
  double mean_positive_count = 0.0;
  double mean_negative_count = 0.0;
};

struct EpochMetrics {
  std::string phase;  // "pretrain" or "selftrain"
  int epoch = 0;
  LossBreakdown loss;  // mean over the epoch's steps
  std::optional<double> pseudo_accuracy;
  std::optional<SubspaceStatistics> subspaces;
  std::optional<double> average_map;

  /// Single-line JSON record.
  std::string to_json() const;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochMetrics> log;
};

/// p_c^(1/T), renormalized.
ClassDistribution sharpen(const ClassDistribution& dist, double temperature);

/// Per-snippet model inputs; with window w each row concatenates snippets
/// t-w..t+w (clamped at the video edges).
std::vector<std::vector<double>> model_inputs(const VideoRecord& video, int context_window);

/// Initial parameters for a config (seeded from config.seed).
ModelParams initial_params(const ExperimentConfig& config);

/// Supervised training on labeled videos only. Throws EmptyLabeledSet.
TrainResult pretrain(const std::vector<VideoRecord>& labeled, const ExperimentConfig& config);
TrainResult pretrain(ModelParams params, const std::vector<VideoRecord>& labeled, const ExperimentConfig& config);

/// Pseudo label for one prediction: sharpen, partition, and draw the
/// complementary class from `rng_draw` (any non-target class, uniformly).
PseudoLabel make_pseudo_label(const ClassDistribution& prediction, const ExperimentConfig& config,
                              std::uint64_t rng_draw);

/// Copies of the unlabeled videos with every snippet annotated by the
/// current model. `round` feeds the complementary-label draw.
std::vector<VideoRecord> assign_pseudo_labels(const ModelParams& params, const std::vector<VideoRecord>& unlabeled,
                                              const ExperimentConfig& config, std::uint64_t round = 0);

/// Pseudo-labeled videos against sealed ground truth.
/// Throws MissingGroundTruth if a video has no sealed entry.
SubspaceStatistics subspace_statistics(const std::vector<VideoRecord>& annotated, const SealedGroundTruth& sealed,
                                       std::size_t class_count);

/// Fraction of pseudo targets equal to the sealed ground truth.
double pseudo_label_accuracy(const std::vector<VideoRecord>& annotated, const SealedGroundTruth& sealed,
                             std::size_t class_count);

/// Alternates pseudo labeling and optimization of the combined objective.
/// Each step pairs a labeled mini-batch with an unlabeled one; the number of
/// steps per epoch is set by the labeled stream alone. When `sealed` is given
/// the log carries pseudo-label accuracy and subspace statistics.
TrainResult self_train(ModelParams params, const std::vector<VideoRecord>& labeled,
                       const std::vector<VideoRecord>& unlabeled, const ExperimentConfig& config,
                       const SealedGroundTruth* sealed = nullptr);

/// Snippet accuracy of argmax predictions against labeled videos.
double snippet_accuracy(const ModelParams& params, const std::vector<VideoRecord>& videos, int context_window);

}  // namespace ncl
