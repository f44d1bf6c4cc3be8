#include "ncl/model.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "ncl/config.hpp"

namespace ncl {

namespace {

constexpr std::array<const char*, 6> kTensorNames = {"trunk_weights", "trunk_bias", "class_weights",
                                                    "class_bias",    "mask_weights", "mask_bias"};

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

ModelParams ModelParams::zeros(std::size_t input_dim, std::size_t hidden_width, std::size_t label_count) {
  ModelParams p;
  p.input_dim = input_dim;
  p.hidden_width = hidden_width;
  p.label_count = label_count;
  p.trunk_weights.assign(input_dim * hidden_width, 0.0);
  p.trunk_bias.assign(hidden_width, 0.0);
  p.class_weights.assign(hidden_width * label_count, 0.0);
  p.class_bias.assign(label_count, 0.0);
  p.mask_weights.assign(hidden_width, 0.0);
  p.mask_bias.assign(1, 0.0);
  return p;
}

std::array<std::span<double>, 6> ModelParams::tensors() {
  return {trunk_weights, trunk_bias, class_weights, class_bias, mask_weights, mask_bias};
}

std::array<std::span<const double>, 6> ModelParams::tensors() const {
  return {trunk_weights, trunk_bias, class_weights, class_bias, mask_weights, mask_bias};
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (auto t : tensors()) n += t.size();
  return n;
}

bool ModelParams::same_values(const ModelParams& other) const {
  return input_dim == other.input_dim && hidden_width == other.hidden_width && label_count == other.label_count &&
         trunk_weights == other.trunk_weights && trunk_bias == other.trunk_bias &&
         class_weights == other.class_weights && class_bias == other.class_bias &&
         mask_weights == other.mask_weights && mask_bias == other.mask_bias;
}

ModelParams init_params(std::size_t input_dim, std::size_t hidden_width, std::size_t label_count,
                        std::uint64_t seed) {
  ModelParams p = ModelParams::zeros(input_dim, hidden_width, label_count);
  std::mt19937_64 rng(seed);
  auto fill = [&rng](std::vector<double>& w, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (double& x : w) x = u(rng);
  };
  fill(p.trunk_weights, input_dim, hidden_width);
  fill(p.class_weights, hidden_width, label_count);
  fill(p.mask_weights, hidden_width, 1);
  return p;
}

ForwardResult forward(const ModelParams& params, std::span<const double> feature) {
  if (feature.size() != params.input_dim) {
    throw Error(ErrorCode::ShapeMismatch, "feature width " + std::to_string(feature.size()) + " != model input " +
                                              std::to_string(params.input_dim));
  }
  const std::size_t h = params.hidden_width;
  const std::size_t k = params.label_count;

  ForwardCache cache;
  cache.input.assign(feature.begin(), feature.end());
  cache.hidden_pre.assign(params.trunk_bias.begin(), params.trunk_bias.end());
  for (std::size_t i = 0; i < feature.size(); ++i) {
    const double x = feature[i];
    const double* row = &params.trunk_weights[i * h];
    for (std::size_t j = 0; j < h; ++j) cache.hidden_pre[j] += x * row[j];
  }
  cache.hidden.resize(h);
  for (std::size_t j = 0; j < h; ++j) cache.hidden[j] = std::max(cache.hidden_pre[j], 0.0);
  cache.generation = params.generation;

  std::vector<double> logits(params.class_bias.begin(), params.class_bias.end());
  double mask_logit = params.mask_bias[0];
  for (std::size_t j = 0; j < h; ++j) {
    const double a = cache.hidden[j];
    if (a == 0.0) continue;
    const double* row = &params.class_weights[j * k];
    for (std::size_t c = 0; c < k; ++c) logits[c] += a * row[c];
    mask_logit += a * params.mask_weights[j];
  }

  ClassDistribution dist = softmax(logits);
  return ForwardResult{std::move(dist), sigmoid(mask_logit), std::move(logits), mask_logit, std::move(cache)};
}

void backward(const ModelParams& params, const ForwardCache& cache, std::span<const double> grad_logits,
              double grad_mask_logit, ModelParams& grads) {
  if (cache.generation != params.generation) {
    throw Error(ErrorCode::StaleCache, "forward cache predates the latest parameter update");
  }
  if (grad_logits.size() != params.label_count || cache.input.size() != params.input_dim) {
    throw Error(ErrorCode::ShapeMismatch, "backward shapes do not match the model");
  }
  const std::size_t h = params.hidden_width;
  const std::size_t k = params.label_count;

  for (std::size_t c = 0; c < k; ++c) grads.class_bias[c] += grad_logits[c];
  grads.mask_bias[0] += grad_mask_logit;

  std::vector<double> grad_hidden(h, 0.0);
  for (std::size_t j = 0; j < h; ++j) {
    const double a = cache.hidden[j];
    const double* w_row = &params.class_weights[j * k];
    double* g_row = &grads.class_weights[j * k];
    double acc = grad_mask_logit * params.mask_weights[j];
    for (std::size_t c = 0; c < k; ++c) {
      g_row[c] += a * grad_logits[c];
      acc += w_row[c] * grad_logits[c];
    }
    grads.mask_weights[j] += a * grad_mask_logit;
    grad_hidden[j] = cache.hidden_pre[j] > 0.0 ? acc : 0.0;
  }

  for (std::size_t j = 0; j < h; ++j) grads.trunk_bias[j] += grad_hidden[j];
  for (std::size_t i = 0; i < cache.input.size(); ++i) {
    const double x = cache.input[i];
    double* g_row = &grads.trunk_weights[i * h];
    for (std::size_t j = 0; j < h; ++j) g_row[j] += x * grad_hidden[j];
  }
}

AdamState AdamState::for_params(const ModelParams& params) {
  AdamState s;
  const auto t = params.tensors();
  for (std::size_t i = 0; i < t.size(); ++i) {
    s.first_moment[i].assign(t[i].size(), 0.0);
    s.second_moment[i].assign(t[i].size(), 0.0);
  }
  return s;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double learning_rate,
               const AdamHyper& hyper) {
  const auto g = grads.tensors();
  const auto p = params.tensors();
  for (std::size_t t = 0; t < g.size(); ++t) {
    if (g[t].size() != p[t].size() || state.first_moment[t].size() != p[t].size()) {
      throw Error(ErrorCode::ShapeMismatch, std::string("gradient shape differs for ") + kTensorNames[t]);
    }
    for (double v : g[t]) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::NonFiniteGradient, std::string("non-finite gradient in ") + kTensorNames[t] +
                                                      " at step " + std::to_string(state.step + 1));
      }
    }
  }

  state.step += 1;
  const double step = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(hyper.beta1, step);
  const double correction2 = 1.0 - std::pow(hyper.beta2, step);
  for (std::size_t t = 0; t < g.size(); ++t) {
    auto& m = state.first_moment[t];
    auto& v = state.second_moment[t];
    for (std::size_t i = 0; i < p[t].size(); ++i) {
      m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[t][i];
      v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[t][i] * g[t][i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[t][i] -= learning_rate * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
    }
  }
  params.generation += 1;
}

double cosine_learning_rate(double base_rate, std::uint64_t step, std::uint64_t total_steps) {
  if (total_steps == 0) return base_rate;
  const double progress = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps));
  return base_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write checkpoint " + path.string());
  out << "ncl-checkpoint 1\n";
  out << params.input_dim << ' ' << params.hidden_width << ' ' << params.label_count << '\n';
  const auto t = params.tensors();
  for (std::size_t i = 0; i < t.size(); ++i) {
    out << kTensorNames[i] << ' ' << t[i].size();
    for (double v : t[i]) out << ' ' << format_double(v);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing checkpoint " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path, std::size_t input_dim, std::size_t hidden_width,
                            std::size_t label_count) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingArtifact, "checkpoint not found: " + path.string());
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "ncl-checkpoint") throw Error(ErrorCode::BadMagic, path.string() + " is not a checkpoint");
  if (version != 1) throw Error(ErrorCode::VersionMismatch, "checkpoint version " + std::to_string(version));
  std::size_t d = 0, h = 0, k = 0;
  in >> d >> h >> k;
  if (!in) throw Error(ErrorCode::CorruptRecord, "checkpoint shape line unreadable");
  if (d != input_dim || h != hidden_width || k != label_count) {
    std::ostringstream msg;
    msg << "checkpoint shape " << d << 'x' << h << 'x' << k << " != expected " << input_dim << 'x' << hidden_width
        << 'x' << label_count;
    throw Error(ErrorCode::ShapeMismatch, msg.str());
  }
  ModelParams params = ModelParams::zeros(d, h, k);
  auto t = params.tensors();
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::string name;
    std::size_t count = 0;
    in >> name >> count;
    if (!in || name != kTensorNames[i]) throw Error(ErrorCode::CorruptRecord, std::string("expected ") + kTensorNames[i]);
    if (count != t[i].size()) throw Error(ErrorCode::ShapeMismatch, name + " has " + std::to_string(count) + " values");
    for (double& v : t[i]) {
      std::string token;
      in >> token;
      char* end = nullptr;
      v = std::strtod(token.c_str(), &end);
      if (!in || token.empty() || *end != '\0' || !std::isfinite(v)) {
        throw Error(ErrorCode::CorruptRecord, name + " contains an unreadable value");
      }
    }
  }
  return params;
}

}  // namespace ncl
