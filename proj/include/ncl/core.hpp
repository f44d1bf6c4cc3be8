#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ncl/error.hpp"

namespace ncl {

/// Class indices are 0-based in memory. Index `class_count` (the last one)
/// is always background. Anything written to disk is shifted to 1-based.
using ClassIndex = std::size_t;

inline constexpr double kProbabilitySumTolerance = 1e-9;

/// A validated probability vector over C action classes plus background.
class ClassDistribution {
 public:
  /// Wraps an already-normalized vector; throws if the invariants fail.
  static ClassDistribution from_probabilities(std::vector<double> probs);

  std::span<const double> probs() const noexcept { return probs_; }
  double operator[](ClassIndex c) const { return probs_[c]; }
  std::size_t size() const noexcept { return probs_.size(); }
  std::size_t class_count() const noexcept { return probs_.size() - 1; }
  ClassIndex background() const noexcept { return probs_.size() - 1; }

  /// Lowest index wins ties.
  ClassIndex argmax() const noexcept;
  double max() const noexcept { return probs_[argmax()]; }

 private:
  explicit ClassDistribution(std::vector<double> probs) : probs_(std::move(probs)) {}
  std::vector<double> probs_;
};

/// Normalizes a non-negative mass vector.
ClassDistribution make_distribution(std::span<const double> raw);

/// Max-shifted softmax; stable for arbitrarily large finite logits.
ClassDistribution softmax(std::span<const double> logits);

/// Lowest index wins ties.
std::size_t argmax(std::span<const double> values) noexcept;

/// Target / positive / negative / ambiguous split of the label space.
/// The three sets are kept sorted by class index.
class LabelPartition {
 public:
  LabelPartition(std::size_t label_count, ClassIndex target, std::vector<ClassIndex> positives,
                 std::vector<ClassIndex> negatives, std::vector<ClassIndex> ambiguous);

  std::size_t label_count() const noexcept { return label_count_; }
  ClassIndex target() const noexcept { return target_; }
  const std::vector<ClassIndex>& positives() const noexcept { return positives_; }
  const std::vector<ClassIndex>& negatives() const noexcept { return negatives_; }
  const std::vector<ClassIndex>& ambiguous() const noexcept { return ambiguous_; }

  bool operator==(const LabelPartition&) const = default;

 private:
  std::size_t label_count_;
  ClassIndex target_;
  std::vector<ClassIndex> positives_;
  std::vector<ClassIndex> negatives_;
  std::vector<ClassIndex> ambiguous_;
};

struct GroundTruthLabel {
  ClassIndex label;
  bool operator==(const GroundTruthLabel&) const = default;
};

/// Pseudo supervision. The pseudo class is the partition target, so the two
/// can never disagree. `soft_target` and `complementary` are only consulted
/// by the baseline objectives.
struct PseudoLabel {
  LabelPartition partition;
  std::vector<double> soft_target;
  std::optional<ClassIndex> complementary;

  ClassIndex label() const noexcept { return partition.target(); }
  bool operator==(const PseudoLabel&) const = default;
};

struct Unlabeled {
  bool operator==(const Unlabeled&) const = default;
};

using Supervision = std::variant<GroundTruthLabel, PseudoLabel, Unlabeled>;

struct Snippet {
  std::vector<double> feature;
  Supervision supervision = Unlabeled{};
};

/// `end` is inclusive. Ground truth carries score 1.
struct ActionInstance {
  std::size_t start = 0;
  std::size_t end = 0;
  ClassIndex label = 0;
  double score = 1.0;

  bool operator==(const ActionInstance&) const = default;
};

struct VideoRecord {
  std::string id;
  std::vector<Snippet> snippets;
  std::vector<ActionInstance> instances;
  bool labeled = false;

  std::size_t length() const noexcept { return snippets.size(); }
};

/// Checks finite features of equal width, in-range non-overlapping
/// instances that never use the background index.
void validate_video(const VideoRecord& video, std::size_t class_count, std::size_t feature_dim);

/// Per-snippet class (background where no instance covers it).
std::vector<ClassIndex> snippet_labels(std::span<const ActionInstance> instances, std::size_t length,
                                       std::size_t class_count);

/// 1 where the snippet lies inside some instance.
std::vector<double> foreground_mask(std::span<const ActionInstance> instances, std::size_t length);

}  // namespace ncl
