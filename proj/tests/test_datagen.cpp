#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "ncl/datagen.hpp"

using namespace ncl;

namespace {

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "ncl_datagen_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.video_count = 20;
  c.test_video_count = 5;
  c.snippets_per_video = 60;
  c.labeled_ratio = 0.25;
  c.seed = 4;
  return c;
}

ErrorCode load_error(const std::filesystem::path& p, std::string* message = nullptr) {
  try {
    load_feature_file(p, 10);
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  FAIL("expected a load error");
  return ErrorCode::Io;
}

}  // namespace

TEST_SUITE("datagen") {
  TEST_CASE("split sizes and sealed ground truth") {
    const auto c = small_config();
    const auto b = generate_benchmark(c);
    CHECK(b.labeled.size() == 5);
    CHECK(b.unlabeled.size() == 15);
    CHECK(b.test.size() == 5);
    for (const auto& v : b.unlabeled) {
      CHECK_FALSE(v.labeled);
      CHECK(v.instances.empty());
      for (const auto& s : v.snippets) CHECK(std::holds_alternative<Unlabeled>(s.supervision));
      CHECK(b.sealed.contains(v.id));
      CHECK_FALSE(b.sealed.instances(v.id).empty());
    }
    for (const auto& v : b.labeled) CHECK_FALSE(b.sealed.contains(v.id));
    try {
      b.sealed.instances("nope");
      FAIL("expected MissingGroundTruth");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MissingGroundTruth);
    }

    auto all = c;
    all.labeled_ratio = 1.0;
    CHECK(generate_benchmark(all).unlabeled.empty());
  }

  TEST_CASE("instances are valid, separated, and never background") {
    auto c = small_config();
    c.video_count = 200;
    const auto b = generate_benchmark(c);
    auto check = [&](const VideoRecord& v, const std::vector<ActionInstance>& inst) {
      CHECK_NOTHROW(validate_video(VideoRecord{v.id, v.snippets, inst, true}, 10, 16));
      CHECK(inst.size() >= 1);
      CHECK(inst.size() <= 5);
      for (std::size_t i = 1; i < inst.size(); ++i) CHECK(inst[i].start > inst[i - 1].end + 1);
      for (const auto& x : inst) CHECK(x.label < 10);
    };
    for (const auto& v : b.labeled) check(v, v.instances);
    for (const auto& v : b.test) check(v, v.instances);
    for (const auto& v : b.unlabeled) check(v, b.sealed.instances(v.id));
  }

  TEST_CASE("noise-free features are separable by the nearest prototype") {
    auto c = small_config();
    c.noise_sigma = 0.0;
    const auto b = generate_benchmark(c);
    std::size_t correct = 0, total = 0;
    for (const auto& v : b.labeled) {
      const auto labels = snippet_labels(v.instances, v.length(), 10);
      for (std::size_t t = 0; t < v.length(); ++t) {
        const auto& x = v.snippets[t].feature;
        // Background sits at the origin.
        double best = std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
        ClassIndex arg = 10;
        for (std::size_t k = 0; k < b.prototypes.size(); ++k) {
          double d = 0.0;
          for (std::size_t i = 0; i < x.size(); ++i) d += (x[i] - b.prototypes[k][i]) * (x[i] - b.prototypes[k][i]);
          if (d < best) {
            best = d;
            arg = k;
          }
        }
        correct += arg == labels[t];
        ++total;
      }
    }
    CHECK(correct == total);
  }

  TEST_CASE("prototypes are unit vectors grouped by separation") {
    auto c = small_config();
    c.class_group_size = 2;
    c.prototype_separation = 0.0;
    auto protos = make_prototypes(c);
    for (const auto& p : protos) {
      CHECK(std::inner_product(p.begin(), p.end(), p.begin(), 0.0) == doctest::Approx(1.0));
    }
    CHECK(protos[0] == protos[1]);
    c.prototype_separation = 0.5;
    protos = make_prototypes(c);
    const double cosine = std::inner_product(protos[0].begin(), protos[0].end(), protos[1].begin(), 0.0);
    CHECK(cosine < 0.999);
    CHECK(cosine > 0.5);
  }

  TEST_CASE("class balance over 1000 videos is within three standard deviations") {
    auto c = small_config();
    c.video_count = 1000;
    c.test_video_count = 0;
    c.labeled_ratio = 1.0;
    c.snippets_per_video = 100;
    c.feature_dim = 2;
    const auto b = generate_benchmark(c);
    std::vector<double> counts(10, 0.0);
    double n = 0.0;
    for (const auto& v : b.labeled) {
      for (const auto& inst : v.instances) {
        counts[inst.label] += 1.0;
        n += 1.0;
      }
    }
    const double expected = n / 10.0;
    const double sd = std::sqrt(n * 0.1 * 0.9);
    for (double k : counts) CHECK(std::abs(k - expected) <= 3.0 * sd);
  }

  TEST_CASE("same seed gives byte-identical files; another seed does not") {
    const auto dir = temp_dir();
    const auto c = small_config();
    write_feature_file(dir / "a.nclf", generate_benchmark(c).labeled, 16);
    write_feature_file(dir / "b.nclf", generate_benchmark(c).labeled, 16);
    CHECK(slurp(dir / "a.nclf") == slurp(dir / "b.nclf"));
    auto other = c;
    other.seed = 5;
    write_feature_file(dir / "c.nclf", generate_benchmark(other).labeled, 16);
    CHECK(slurp(dir / "a.nclf") != slurp(dir / "c.nclf"));
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) != derive_seed(2, 2));
  }

  TEST_CASE("feature file round trip") {
    const auto dir = temp_dir();
    const auto b = generate_benchmark(small_config());
    std::vector<VideoRecord> videos = b.labeled;
    videos.insert(videos.end(), b.unlabeled.begin(), b.unlabeled.end());
    write_feature_file(dir / "rt.nclf", videos, 16);
    const auto back = load_feature_file(dir / "rt.nclf", 10);
    REQUIRE(back.size() == videos.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back[i].id == videos[i].id);
      CHECK(back[i].labeled == videos[i].labeled);
      CHECK(back[i].instances == videos[i].instances);
      REQUIRE(back[i].length() == videos[i].length());
      for (std::size_t t = 0; t < back[i].length(); ++t) {
        CHECK(back[i].snippets[t].feature == videos[i].snippets[t].feature);
        CHECK(back[i].snippets[t].supervision == videos[i].snippets[t].supervision);
      }
    }
  }

  TEST_CASE("truncated, foreign, and mis-shaped files are rejected") {
    const auto dir = temp_dir();
    const auto b = generate_benchmark(small_config());
    write_feature_file(dir / "ok.nclf", b.labeled, 16);
    const std::string bytes = slurp(dir / "ok.nclf");

    spit(dir / "trunc.nclf", bytes.substr(0, bytes.size() - 100));
    std::string message;
    CHECK(load_error(dir / "trunc.nclf", &message) == ErrorCode::CorruptRecord);
    CHECK(message.find("byte offset") != std::string::npos);

    std::string foreign = bytes;
    foreign[0] = 'X';
    spit(dir / "foreign.nclf", foreign);
    CHECK(load_error(dir / "foreign.nclf") == ErrorCode::BadMagic);

    std::string future = bytes;
    future[4] = 2;
    spit(dir / "future.nclf", future);
    CHECK(load_error(dir / "future.nclf") == ErrorCode::VersionMismatch);

    // Rows of width 15 under a header that promises 16.
    std::vector<VideoRecord> narrow = {b.labeled.front()};
    for (auto& s : narrow[0].snippets) s.feature.pop_back();
    write_feature_file(dir / "narrow.nclf", narrow, 16);
    CHECK(load_error(dir / "narrow.nclf", &message) == ErrorCode::ShapeMismatch);
    CHECK(message.find(narrow[0].id) != std::string::npos);

    CHECK(load_error(dir / "absent.nclf") == ErrorCode::MissingArtifact);
  }

  TEST_CASE("sealed ground truth and manifest") {
    const auto dir = temp_dir();
    const auto b = generate_benchmark(small_config());
    write_sealed_ground_truth(dir / "sealed.jsonl", b.sealed);
    const auto back = load_sealed_ground_truth(dir / "sealed.jsonl", 10);
    CHECK(back.all() == b.sealed.all());

    const auto manifest = format_manifest(b);
    CHECK(std::count(manifest.begin(), manifest.end(), '\n') == 25);
    CHECK(manifest.find("\"split\":\"test\"") != std::string::npos);
  }
}
