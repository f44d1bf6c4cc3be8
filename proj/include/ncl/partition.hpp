#pragma once

#include <vector>

#include "ncl/core.hpp"

namespace ncl {

struct SortedDistribution {
  std::vector<double> values;      // non-decreasing
  std::vector<ClassIndex> order;   // sorted position -> original class
};

/// Stable ascending sort; equal probabilities keep index order.
SortedDistribution sort_ascending(const ClassDistribution& dist);

/// Bottom-k non-target classes whose cumulative probability stays <= max(p).
/// The target (argmax, lowest index on ties) is never a candidate.
/// Returned sorted by class index.
std::vector<ClassIndex> select_negatives(const ClassDistribution& dist);

/// Non-target, non-negative classes with p_c >= lambda * max(p).
std::vector<ClassIndex> select_positives(const ClassDistribution& dist, const std::vector<ClassIndex>& negatives,
                                         double lambda);

/// Target, then negatives, then positives; everything left is ambiguous.
LabelPartition partition_label_space(const ClassDistribution& dist, double lambda);

}  // namespace ncl
