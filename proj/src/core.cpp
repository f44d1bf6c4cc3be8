#include "ncl/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ncl {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyVector: return "EmptyVector";
    case ErrorCode::NegativeEntry: return "NegativeEntry";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::ZeroMass: return "ZeroMass";
    case ErrorCode::InvalidPartition: return "InvalidPartition";
    case ErrorCode::InvalidInstance: return "InvalidInstance";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::UnresolvedSupervision: return "UnresolvedSupervision";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::StaleCache: return "StaleCache";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::EmptyLabeledSet: return "EmptyLabeledSet";
    case ErrorCode::MissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::InfeasiblePlacement: return "InfeasiblePlacement";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptRecord: return "CorruptRecord";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

std::size_t argmax(std::span<const double> values) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

ClassDistribution ClassDistribution::from_probabilities(std::vector<double> probs) {
  if (probs.size() < 2) throw Error(ErrorCode::EmptyVector, "distribution needs at least one class plus background");
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p)) throw Error(ErrorCode::NonFinite, "probability is not finite");
    if (p < 0.0 || p > 1.0) throw Error(ErrorCode::NegativeEntry, "probability outside [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbabilitySumTolerance) {
    throw Error(ErrorCode::ZeroMass, "probabilities sum to " + std::to_string(sum));
  }
  return ClassDistribution(std::move(probs));
}

ClassIndex ClassDistribution::argmax() const noexcept { return ncl::argmax(probs_); }

ClassDistribution make_distribution(std::span<const double> raw) {
  if (raw.empty()) throw Error(ErrorCode::EmptyVector, "empty mass vector");
  double sum = 0.0;
  for (double v : raw) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "mass entry is not finite");
    if (v < 0.0) throw Error(ErrorCode::NegativeEntry, "mass entry is negative");
    sum += v;
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) throw Error(ErrorCode::ZeroMass, "mass vector sums to zero");
  if (raw.size() < 2) throw Error(ErrorCode::EmptyVector, "distribution needs at least one class plus background");
  std::vector<double> probs(raw.size());
  std::transform(raw.begin(), raw.end(), probs.begin(), [sum](double v) { return v / sum; });
  return ClassDistribution::from_probabilities(std::move(probs));
}

ClassDistribution softmax(std::span<const double> logits) {
  if (logits.empty()) throw Error(ErrorCode::EmptyVector, "empty logit vector");
  for (double z : logits) {
    if (!std::isfinite(z)) throw Error(ErrorCode::NonFinite, "logit is not finite");
  }
  const double shift = *std::max_element(logits.begin(), logits.end());
  std::vector<double> probs(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - shift);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
  return ClassDistribution::from_probabilities(std::move(probs));
}

LabelPartition::LabelPartition(std::size_t label_count, ClassIndex target, std::vector<ClassIndex> positives,
                               std::vector<ClassIndex> negatives, std::vector<ClassIndex> ambiguous)
    : label_count_(label_count),
      target_(target),
      positives_(std::move(positives)),
      negatives_(std::move(negatives)),
      ambiguous_(std::move(ambiguous)) {
  std::sort(positives_.begin(), positives_.end());
  std::sort(negatives_.begin(), negatives_.end());
  std::sort(ambiguous_.begin(), ambiguous_.end());

  if (target_ >= label_count_) throw Error(ErrorCode::InvalidPartition, "target out of range");
  std::vector<int> seen(label_count_, 0);
  seen[target_] += 1;
  for (const auto* set : {&positives_, &negatives_, &ambiguous_}) {
    for (ClassIndex c : *set) {
      if (c >= label_count_) throw Error(ErrorCode::InvalidPartition, "class index out of range");
      seen[c] += 1;
    }
  }
  for (std::size_t c = 0; c < label_count_; ++c) {
    if (seen[c] != 1) {
      throw Error(ErrorCode::InvalidPartition,
                  "class " + std::to_string(c + 1) + " appears " + std::to_string(seen[c]) + " times");
    }
  }
}

void validate_video(const VideoRecord& video, std::size_t class_count, std::size_t feature_dim) {
  for (std::size_t i = 0; i < video.snippets.size(); ++i) {
    const auto& feature = video.snippets[i].feature;
    if (feature.size() != feature_dim) {
      throw Error(ErrorCode::ShapeMismatch, "video " + video.id + " snippet " + std::to_string(i) + " has width " +
                                                std::to_string(feature.size()) + ", expected " +
                                                std::to_string(feature_dim));
    }
    for (double v : feature) {
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "video " + video.id + " has a non-finite feature");
    }
  }
  std::vector<ActionInstance> sorted = video.instances;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& inst = sorted[i];
    if (inst.start > inst.end || inst.end >= video.length()) {
      throw Error(ErrorCode::InvalidInstance, "video " + video.id + " has an instance outside its span");
    }
    if (inst.label >= class_count) {
      throw Error(ErrorCode::InvalidInstance, "video " + video.id + " has an instance labeled background");
    }
    if (i > 0 && sorted[i - 1].end >= inst.start) {
      throw Error(ErrorCode::InvalidInstance, "video " + video.id + " has overlapping instances");
    }
  }
}

std::vector<ClassIndex> snippet_labels(std::span<const ActionInstance> instances, std::size_t length,
                                       std::size_t class_count) {
  std::vector<ClassIndex> labels(length, class_count);
  for (const auto& inst : instances) {
    for (std::size_t t = inst.start; t <= inst.end && t < length; ++t) labels[t] = inst.label;
  }
  return labels;
}

std::vector<double> foreground_mask(std::span<const ActionInstance> instances, std::size_t length) {
  std::vector<double> mask(length, 0.0);
  for (const auto& inst : instances) {
    for (std::size_t t = inst.start; t <= inst.end && t < length; ++t) mask[t] = 1.0;
  }
  return mask;
}

}  // namespace ncl
