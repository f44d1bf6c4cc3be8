#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ncl {

/// Which loss is applied to pseudo-labeled snippets.
enum class Objective {
  Hybrid,         // target CE plus the enabled positive / negative terms
  TargetOnly,     // plain CE on labeled data and on hard pseudo labels
  SoftPseudo,     // CE against the sharpened distribution
  Complementary,  // target CE plus one random non-target class as a negative
};

std::string_view to_string(Objective objective);
Objective parse_objective(std::string_view text);

/// Every tunable of an experiment. Field names double as config-file keys.
struct ExperimentConfig {
  // loss
  double lambda = 0.85;
  double alpha = 1.0;
  Objective objective = Objective::Hybrid;
  bool use_negative = true;
  bool use_positive = true;
  bool normalize_by_set_size = false;
  // Refinement and reconstruction terms are not modeled; kept in the manifest.
  bool omit_refinement_losses = true;

  // data
  int class_count = 10;
  int feature_dim = 16;
  double labeled_ratio = 0.1;
  int snippets_per_video = 100;
  int video_count = 200;
  int test_video_count = 50;
  // Tuned so a supervised-only model labels roughly 60-70% of action
  // snippets correctly; background snippets are nearly always right.
  double noise_sigma = 0.15;
  double prototype_separation = 0.3;
  int class_group_size = 5;
  int min_instances = 1;
  int max_instances = 5;
  std::uint64_t seed = 0;

  // model / optimization
  int hidden_width = 64;
  int context_window = 0;
  int epochs_pretrain = 12;
  int epochs_self_train = 15;
  int batch_size = 32;
  double learning_rate = 5e-3;
  double self_train_learning_rate = 1e-3;
  double sharpen_temperature = 0.5;
  bool per_step_refresh = false;

  // inference / evaluation
  double soft_nms_threshold = 0.4;
  double soft_nms_sigma = 0.5;
  std::vector<double> tiou_grid = {0.3, 0.4, 0.5, 0.6, 0.7};
  std::vector<double> classification_thresholds = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<double> mask_thresholds = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

  /// Throws Error(BadConfig) naming the first offending field.
  void validate() const;

  std::size_t label_count() const { return static_cast<std::size_t>(class_count) + 1; }
  std::size_t model_input_dim() const {
    return static_cast<std::size_t>(feature_dim) * static_cast<std::size_t>(2 * context_window + 1);
  }
};

/// Applies one `key = value` assignment. Unknown keys and unparsable values
/// raise BadConfig naming the key.
void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value);

/// Flat `key = value` text; `#` starts a comment. Validates the result.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

/// Inverse of parse_config; every key is written, in a fixed order.
std::string format_config(const ExperimentConfig& config);

/// Shortest decimal text that round-trips the double exactly.
std::string format_double(double value);

}  // namespace ncl
