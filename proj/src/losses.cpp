#include "ncl/losses.hpp"

#include <algorithm>
#include <cmath>

namespace ncl {

namespace {

double clamp_log(double p) { return std::log(std::max(p, kLogClamp)); }

void add_scaled(std::vector<double>& acc, const std::vector<double>& g, double scale) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += scale * g[i];
}

}  // namespace

LossValue target_loss(const ClassDistribution& dist, ClassIndex target) {
  LossValue out;
  out.loss = -clamp_log(dist[target]);
  out.grad.assign(dist.probs().begin(), dist.probs().end());
  out.grad[target] -= 1.0;
  return out;
}

LossValue negative_loss(const ClassDistribution& dist, std::span<const ClassIndex> negatives) {
  LossValue out;
  out.grad.assign(dist.size(), 0.0);
  const auto p = dist.probs();
  for (ClassIndex c : negatives) {
    // 1 - p_c summed from the other entries keeps precision when p_c -> 1.
    double complement = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (j != c) complement += p[j];
    }
    complement = std::max(complement, kLogClamp);
    out.loss -= std::log(complement);
    // d/dz_j [-log(1 - p_c)] = p_c (delta_jc - p_j) / (1 - p_c)
    const double w = p[c] / complement;
    for (std::size_t j = 0; j < p.size(); ++j) out.grad[j] -= w * p[j];
    out.grad[c] += w;
  }
  return out;
}

LossValue positive_loss(const ClassDistribution& dist, std::span<const ClassIndex> positives) {
  LossValue out;
  out.grad.assign(dist.size(), 0.0);
  if (positives.empty()) return out;
  const auto p = dist.probs();
  const double count = static_cast<double>(positives.size());
  for (std::size_t j = 0; j < p.size(); ++j) out.grad[j] = count * p[j];
  for (ClassIndex c : positives) {
    out.loss -= clamp_log(p[c]);
    out.grad[c] -= 1.0;
  }
  return out;
}

LossValue soft_target_loss(const ClassDistribution& dist, std::span<const double> soft_target) {
  if (soft_target.size() != dist.size()) throw Error(ErrorCode::LengthMismatch, "soft target length differs");
  LossValue out;
  out.grad.assign(dist.size(), 0.0);
  double mass = 0.0;
  for (double q : soft_target) mass += q;
  for (std::size_t j = 0; j < dist.size(); ++j) {
    out.loss -= soft_target[j] * clamp_log(dist[j]);
    out.grad[j] = mass * dist[j] - soft_target[j];
  }
  return out;
}

LossValue mask_loss(std::span<const double> scores, std::span<const double> targets) {
  if (scores.size() != targets.size()) throw Error(ErrorCode::LengthMismatch, "mask scores and targets differ in length");
  LossValue out;
  out.grad.assign(scores.size(), 0.0);
  if (scores.empty()) return out;
  const double n = static_cast<double>(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = scores[i];
    const double t = targets[i];
    out.loss -= t * clamp_log(s) + (1.0 - t) * clamp_log(1.0 - s);
    double g = 0.0;
    if (s > kLogClamp) g -= t / s;
    if (1.0 - s > kLogClamp) g += (1.0 - t) / (1.0 - s);
    out.grad[i] = g / n;
  }
  out.loss /= n;
  return out;
}

LossOptions LossOptions::from_config(const ExperimentConfig& config) {
  LossOptions o;
  o.objective = config.objective;
  o.use_negative = config.use_negative;
  o.use_positive = config.use_positive;
  o.normalize_by_set_size = config.normalize_by_set_size;
  o.alpha = config.alpha;
  return o;
}

CombinedLoss combined_loss(std::span<const BatchEntry> entries, std::span<const BatchPrediction> predictions,
                           const LossOptions& options) {
  if (entries.size() != predictions.size()) {
    throw Error(ErrorCode::LengthMismatch, "batch entries and predictions differ in length");
  }
  const bool target_only = options.objective == Objective::TargetOnly;
  const bool supervised_negative = options.use_negative && !target_only;

  std::size_t n_sup = 0, n_unsup = 0, n_mask = 0;
  for (const auto& e : entries) {
    if (e.supervision == nullptr || std::holds_alternative<Unlabeled>(*e.supervision)) {
      throw Error(ErrorCode::UnresolvedSupervision, "unlabeled snippet reached the loss without a pseudo label");
    }
    if (std::holds_alternative<GroundTruthLabel>(*e.supervision)) {
      ++n_sup;
    } else {
      ++n_unsup;
    }
    if (e.mask_target) ++n_mask;
  }

  CombinedLoss out;
  auto& b = out.breakdown;
  b.alpha = options.alpha;
  out.grad_logits.resize(entries.size());
  out.grad_mask_logit.assign(entries.size(), 0.0);

  const double w_sup = n_sup ? 1.0 / static_cast<double>(n_sup) : 0.0;
  const double w_unsup = n_unsup ? options.alpha / static_cast<double>(n_unsup) : 0.0;
  const double w_mask = n_mask ? 1.0 / static_cast<double>(n_mask) : 0.0;
  auto set_scale = [&](std::size_t size) {
    return options.normalize_by_set_size && size > 0 ? 1.0 / static_cast<double>(size) : 1.0;
  };

  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& dist = predictions[i].dist;
    auto& grad = out.grad_logits[i];
    grad.assign(dist.size(), 0.0);

    if (const auto* gt = std::get_if<GroundTruthLabel>(entries[i].supervision)) {
      const auto tgt = target_loss(dist, gt->label);
      b.supervised_target += tgt.loss;
      add_scaled(grad, tgt.grad, w_sup);
      if (supervised_negative) {
        std::vector<ClassIndex> rest;
        rest.reserve(dist.size() - 1);
        for (ClassIndex c = 0; c < dist.size(); ++c) {
          if (c != gt->label) rest.push_back(c);
        }
        const auto neg = negative_loss(dist, rest);
        const double s = set_scale(rest.size());
        b.supervised_negative += s * neg.loss;
        add_scaled(grad, neg.grad, w_sup * s);
      }
    } else {
      const auto& pseudo = std::get<PseudoLabel>(*entries[i].supervision);
      const auto& part = pseudo.partition;
      if (options.objective == Objective::SoftPseudo) {
        const auto soft = soft_target_loss(dist, pseudo.soft_target);
        b.unsupervised_target += soft.loss;
        add_scaled(grad, soft.grad, w_unsup);
      } else {
        const auto tgt = target_loss(dist, part.target());
        b.unsupervised_target += tgt.loss;
        add_scaled(grad, tgt.grad, w_unsup);
      }
      if (options.objective == Objective::Hybrid) {
        if (options.use_negative && !part.negatives().empty()) {
          const auto neg = negative_loss(dist, part.negatives());
          const double s = set_scale(part.negatives().size());
          b.unsupervised_negative += s * neg.loss;
          add_scaled(grad, neg.grad, w_unsup * s);
        }
        if (options.use_positive && !part.positives().empty()) {
          const auto pos = positive_loss(dist, part.positives());
          const double s = set_scale(part.positives().size());
          b.unsupervised_positive += s * pos.loss;
          add_scaled(grad, pos.grad, w_unsup * s);
        }
      } else if (options.objective == Objective::Complementary && pseudo.complementary) {
        const ClassIndex c = *pseudo.complementary;
        const auto neg = negative_loss(dist, std::span<const ClassIndex>(&c, 1));
        b.unsupervised_negative += neg.loss;
        add_scaled(grad, neg.grad, w_unsup);
      }
    }

    if (const auto& t = entries[i].mask_target) {
      const double s = predictions[i].mask_score;
      b.mask -= *t * std::log(std::max(s, kLogClamp)) + (1.0 - *t) * std::log(std::max(1.0 - s, kLogClamp));
      // BCE through the sigmoid collapses to (s - t) on the mask logit.
      out.grad_mask_logit[i] = (s - *t) * w_mask;
    }
  }

  b.supervised_target *= w_sup;
  b.supervised_negative *= w_sup;
  const double unsup_mean = n_unsup ? 1.0 / static_cast<double>(n_unsup) : 0.0;
  b.unsupervised_target *= unsup_mean;
  b.unsupervised_positive *= unsup_mean;
  b.unsupervised_negative *= unsup_mean;
  b.mask *= w_mask;
  b.total = b.recomputed_total();
  return out;
}

}  // namespace ncl
