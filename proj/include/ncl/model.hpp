#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ncl/core.hpp"

namespace ncl {

/// One-hidden-layer ReLU trunk shared by a softmax classification head and a
/// sigmoid mask head. All matrices are row-major with the input dimension
/// first, so trunk_weights[i * hidden + j] maps input i to hidden unit j.
struct ModelParams {
  std::size_t input_dim = 0;
  std::size_t hidden_width = 0;
  std::size_t label_count = 0;

  std::vector<double> trunk_weights;  // input_dim x hidden_width
  std::vector<double> trunk_bias;     // hidden_width
  std::vector<double> class_weights;  // hidden_width x label_count
  std::vector<double> class_bias;     // label_count
  std::vector<double> mask_weights;   // hidden_width
  std::vector<double> mask_bias;      // 1

  /// Bumped by every optimizer step; caches from older generations are stale.
  std::uint64_t generation = 0;

  static ModelParams zeros(std::size_t input_dim, std::size_t hidden_width, std::size_t label_count);

  std::array<std::span<double>, 6> tensors();
  std::array<std::span<const double>, 6> tensors() const;
  std::size_t parameter_count() const;

  /// Parameter values only; the generation counter is bookkeeping.
  bool same_values(const ModelParams& other) const;
};

/// Glorot-uniform weights, zero biases.
ModelParams init_params(std::size_t input_dim, std::size_t hidden_width, std::size_t label_count, std::uint64_t seed);

struct ForwardCache {
  std::vector<double> input;
  std::vector<double> hidden_pre;
  std::vector<double> hidden;
  std::uint64_t generation = 0;
};

struct ForwardResult {
  ClassDistribution dist;
  double mask_score;
  std::vector<double> logits;
  double mask_logit;
  ForwardCache cache;
};

/// Throws ShapeMismatch when the feature width differs from input_dim.
ForwardResult forward(const ModelParams& params, std::span<const double> feature);

/// Accumulates into `grads` (same shapes as params). Upstream gradients are
/// with respect to the class logits and the pre-sigmoid mask logit.
/// Throws StaleCache if params changed since the forward pass.
void backward(const ModelParams& params, const ForwardCache& cache, std::span<const double> grad_logits,
              double grad_mask_logit, ModelParams& grads);

struct AdamState {
  std::array<std::vector<double>, 6> first_moment;
  std::array<std::vector<double>, 6> second_moment;
  std::uint64_t step = 0;

  static AdamState for_params(const ModelParams& params);
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected adaptive-moment update. Throws NonFiniteGradient before
/// touching params or state if any gradient entry is NaN/inf.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double learning_rate,
               const AdamHyper& hyper = {});

/// Half-cosine decay from base_rate at step 0 towards 0 at total_steps.
double cosine_learning_rate(double base_rate, std::uint64_t step, std::uint64_t total_steps);

/// Text checkpoint: header line, shape line, then one line per tensor.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path, std::size_t input_dim, std::size_t hidden_width,
                            std::size_t label_count);

}  // namespace ncl
