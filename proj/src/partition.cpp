#include "ncl/partition.hpp"

#include <algorithm>
#include <numeric>

namespace ncl {

SortedDistribution sort_ascending(const ClassDistribution& dist) {
  SortedDistribution out;
  out.order.resize(dist.size());
  std::iota(out.order.begin(), out.order.end(), ClassIndex{0});
  std::stable_sort(out.order.begin(), out.order.end(), [&](ClassIndex a, ClassIndex b) { return dist[a] < dist[b]; });
  out.values.reserve(dist.size());
  for (ClassIndex c : out.order) out.values.push_back(dist[c]);
  return out;
}

std::vector<ClassIndex> select_negatives(const ClassDistribution& dist) {
  const ClassIndex target = dist.argmax();
  const double ceiling = dist[target];
  const SortedDistribution sorted = sort_ascending(dist);

  // Probabilities are non-negative, so the admissible k form a prefix of the
  // non-target ranking and the first failure ends the scan.
  std::vector<ClassIndex> negatives;
  double cumulative = 0.0;
  for (ClassIndex c : sorted.order) {
    if (c == target) continue;
    cumulative += dist[c];
    if (cumulative > ceiling) break;
    negatives.push_back(c);
  }
  std::sort(negatives.begin(), negatives.end());
  return negatives;
}

std::vector<ClassIndex> select_positives(const ClassDistribution& dist, const std::vector<ClassIndex>& negatives,
                                         double lambda) {
  const ClassIndex target = dist.argmax();
  const double threshold = lambda * dist[target];
  std::vector<bool> excluded(dist.size(), false);
  excluded[target] = true;
  for (ClassIndex c : negatives) excluded[c] = true;

  std::vector<ClassIndex> positives;
  for (ClassIndex c = 0; c < dist.size(); ++c) {
    if (!excluded[c] && dist[c] >= threshold) positives.push_back(c);
  }
  return positives;
}

LabelPartition partition_label_space(const ClassDistribution& dist, double lambda) {
  const ClassIndex target = dist.argmax();
  std::vector<ClassIndex> negatives = select_negatives(dist);
  std::vector<ClassIndex> positives = select_positives(dist, negatives, lambda);

  std::vector<bool> assigned(dist.size(), false);
  assigned[target] = true;
  for (ClassIndex c : negatives) assigned[c] = true;
  for (ClassIndex c : positives) assigned[c] = true;
  std::vector<ClassIndex> ambiguous;
  for (ClassIndex c = 0; c < dist.size(); ++c) {
    if (!assigned[c]) ambiguous.push_back(c);
  }
  return LabelPartition(dist.size(), target, std::move(positives), std::move(negatives), std::move(ambiguous));
}

}  // namespace ncl
