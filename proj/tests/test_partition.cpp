#include <random>
#include <vector>

#include "doctest.h"
#include "ncl/partition.hpp"
#include "oracles.hpp"

using namespace ncl;

namespace {

ClassDistribution dist(std::vector<double> p) { return ClassDistribution::from_probabilities(std::move(p)); }

}  // namespace

TEST_SUITE("partition") {
  TEST_CASE("stable ascending sort") {
    auto s = sort_ascending(dist({0.5, 0.3, 0.2}));
    CHECK(s.values == std::vector<double>{0.2, 0.3, 0.5});
    CHECK(s.order == std::vector<ClassIndex>{2, 1, 0});

    s = sort_ascending(dist({0.25, 0.25, 0.5}));
    CHECK(s.order == std::vector<ClassIndex>{0, 1, 2});

    s = sort_ascending(dist({0.25, 0.25, 0.25, 0.25}));
    CHECK(s.order == std::vector<ClassIndex>{0, 1, 2, 3});
  }

  TEST_CASE("negative selection by hand") {
    CHECK(select_negatives(dist({0.4, 0.35, 0.2, 0.05})) == std::vector<ClassIndex>{2, 3});
    CHECK(select_negatives(dist({1, 0, 0, 0})) == std::vector<ClassIndex>{1, 2, 3});
    // Uniform: only the first non-target in sorted order fits under the max.
    CHECK(select_negatives(dist({0.25, 0.25, 0.25, 0.25})) == std::vector<ClassIndex>{1});
  }

  TEST_CASE("positive selection by hand") {
    CHECK(select_positives(dist({0.4, 0.35, 0.2, 0.05}), {2, 3}, 0.85) == std::vector<ClassIndex>{1});
    CHECK(select_positives(dist({1, 0, 0, 0}), {1, 2, 3}, 0.85).empty());
    CHECK(select_positives(dist({0.30, 0.27, 0.18, 0.15, 0.10}), {3, 4}, 0.85) == std::vector<ClassIndex>{1});
  }

  TEST_CASE("full partitions by hand") {
    auto p = partition_label_space(dist({0.30, 0.27, 0.18, 0.15, 0.10}), 0.85);
    CHECK(p.target() == 0);
    CHECK(p.negatives() == std::vector<ClassIndex>{3, 4});
    CHECK(p.positives() == std::vector<ClassIndex>{1});
    CHECK(p.ambiguous() == std::vector<ClassIndex>{2});

    p = partition_label_space(dist({0.5, 0.3, 0.15, 0.05}), 0.85);
    CHECK(p.negatives() == std::vector<ClassIndex>{1, 2, 3});
    CHECK(p.positives().empty());
    CHECK(p.ambiguous().empty());

    p = partition_label_space(dist({1, 0, 0}), 0.85);
    CHECK(p.target() == 0);
    CHECK(p.negatives() == std::vector<ClassIndex>{1, 2});
  }

  TEST_CASE("lambda = 1 keeps only exact ties as positives") {
    const auto p = partition_label_space(dist({0.3, 0.3, 0.2, 0.2}), 1.0);
    CHECK(p.target() == 0);
    CHECK(p.positives() == std::vector<ClassIndex>{1});
    CHECK(p.negatives() == std::vector<ClassIndex>{2});
    CHECK(p.ambiguous() == std::vector<ClassIndex>{3});
  }

  TEST_CASE("agrees with the membership oracle on random distributions") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::size_t> size(2, 50);
    std::uniform_real_distribution<double> lam(0.05, 1.0);
    for (int trial = 0; trial < 2000; ++trial) {
      const auto probs = oracle::random_distribution(rng, size(rng));
      const double lambda = lam(rng);
      const auto got = partition_label_space(dist(probs), lambda);
      const auto want = oracle::partition(probs, lambda);
      REQUIRE(got.target() == want.target);
      REQUIRE(got.negatives() == want.negatives);
      REQUIRE(got.positives() == want.positives);
      REQUIRE(got.ambiguous() == want.ambiguous);
    }
  }

  TEST_CASE("properties: cover, target never negative, monotone in lambda") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> size(2, 30);
    for (int trial = 0; trial < 500; ++trial) {
      const auto probs = oracle::random_distribution(rng, size(rng));
      const auto d = dist(probs);
      const auto negatives = select_negatives(d);
      double mass = 0.0;
      for (ClassIndex c : negatives) {
        CHECK(c != d.argmax());
        mass += probs[c];
      }
      CHECK(mass <= d.max() + 1e-12);
      std::size_t previous = probs.size();
      for (double lambda : {0.1, 0.3, 0.5, 0.7, 0.85, 0.95, 1.0}) {
        const auto p = partition_label_space(d, lambda);
        CHECK(1 + p.positives().size() + p.negatives().size() + p.ambiguous().size() == probs.size());
        CHECK(p.negatives() == negatives);
        CHECK(p.positives().size() <= previous);
        previous = p.positives().size();
      }
    }
  }
}
