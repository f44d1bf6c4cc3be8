#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "ncl/core.hpp"

using namespace ncl;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an ncl::Error");
  return ErrorCode::Io;
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("make_distribution normalizes mass") {
    const std::vector<double> raw{2, 1, 1};
    const auto d = make_distribution(raw);
    CHECK(d[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(d[1] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(d[2] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(d.class_count() == 2);
    CHECK(d.background() == 2);

    const std::vector<double> one_hot{1, 0, 0};
    const auto e = make_distribution(one_hot);
    CHECK(e[0] == 1.0);
    CHECK(e[1] == 0.0);
  }

  TEST_CASE("make_distribution rejects bad input") {
    CHECK(code_of([] { make_distribution(std::vector<double>{0.3, -0.1}); }) == ErrorCode::NegativeEntry);
    CHECK(code_of([] { make_distribution(std::vector<double>{}); }) == ErrorCode::EmptyVector);
    CHECK(code_of([] { make_distribution(std::vector<double>{0, 0}); }) == ErrorCode::ZeroMass);
    CHECK(code_of([] {
            make_distribution(std::vector<double>{1, std::numeric_limits<double>::quiet_NaN()});
          }) == ErrorCode::NonFinite);
    CHECK(code_of([] { ClassDistribution::from_probabilities({0.5, 0.6}); }) == ErrorCode::ZeroMass);
  }

  TEST_CASE("softmax values and stability") {
    const auto u = softmax(std::vector<double>{0, 0, 0});
    for (double p : u.probs()) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    const auto big = softmax(std::vector<double>{1000, 0});
    CHECK(std::isfinite(big[0]));
    CHECK(big[0] == doctest::Approx(1.0));
    CHECK(big[1] < 1e-300);

    const auto h = softmax(std::vector<double>{std::log(2.0), 0});
    CHECK(std::abs(h[0] - 2.0 / 3.0) < 1e-12);
    CHECK(std::abs(h[1] - 1.0 / 3.0) < 1e-12);
  }

  TEST_CASE("argmax prefers the lowest index on ties") {
    CHECK(argmax(std::vector<double>{0.25, 0.25, 0.5}) == 2);
    CHECK(argmax(std::vector<double>{0.4, 0.4, 0.2}) == 0);
    const auto d = make_distribution(std::vector<double>{1, 3, 3, 1});
    CHECK(d.argmax() == 1);
    CHECK(d.max() == doctest::Approx(0.375));
  }

  TEST_CASE("label partition must cover every class exactly once") {
    const LabelPartition ok(4, 0, {1}, {3, 2}, {});
    CHECK(ok.negatives() == std::vector<ClassIndex>{2, 3});
    CHECK(code_of([] { LabelPartition(4, 0, {1}, {2}, {}); }) == ErrorCode::InvalidPartition);
    CHECK(code_of([] { LabelPartition(3, 0, {0}, {1, 2}, {}); }) == ErrorCode::InvalidPartition);
    CHECK(code_of([] { LabelPartition(3, 5, {}, {1, 2}, {}); }) == ErrorCode::InvalidPartition);
    CHECK(code_of([] { LabelPartition(3, 0, {1}, {1, 2}, {}); }) == ErrorCode::InvalidPartition);
  }

  TEST_CASE("pseudo label target is the partition target") {
    const PseudoLabel p{LabelPartition(3, 1, {}, {0, 2}, {}), {0.1, 0.8, 0.1}, std::nullopt};
    CHECK(p.label() == 1);
  }

  TEST_CASE("snippet labels and foreground mask") {
    const std::vector<ActionInstance> inst{{1, 2, 0, 1.0}, {5, 5, 1, 1.0}};
    const auto labels = snippet_labels(inst, 7, 3);
    CHECK(labels == std::vector<ClassIndex>{3, 0, 0, 3, 3, 1, 3});
    CHECK(foreground_mask(inst, 7) == std::vector<double>{0, 1, 1, 0, 0, 1, 0});
  }

  TEST_CASE("validate_video catches broken records") {
    VideoRecord v;
    v.id = "clip";
    v.snippets.assign(5, Snippet{{0.0, 0.0}, Unlabeled{}});
    v.instances = {{0, 1, 0, 1.0}, {3, 4, 1, 1.0}};
    CHECK_NOTHROW(validate_video(v, 2, 2));
    CHECK(code_of([&] { validate_video(v, 2, 3); }) == ErrorCode::ShapeMismatch);

    auto overlap = v;
    overlap.instances = {{0, 2, 0, 1.0}, {2, 4, 1, 1.0}};
    CHECK(code_of([&] { validate_video(overlap, 2, 2); }) == ErrorCode::InvalidInstance);

    auto background = v;
    background.instances = {{0, 1, 2, 1.0}};
    CHECK(code_of([&] { validate_video(background, 2, 2); }) == ErrorCode::InvalidInstance);

    auto out_of_range = v;
    out_of_range.instances = {{3, 5, 0, 1.0}};
    CHECK(code_of([&] { validate_video(out_of_range, 2, 2); }) == ErrorCode::InvalidInstance);

    auto nan = v;
    nan.snippets[2].feature[1] = std::numeric_limits<double>::infinity();
    CHECK(code_of([&] { validate_video(nan, 2, 2); }) == ErrorCode::NonFinite);
  }
}
