#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "ncl/cli.hpp"
#include "ncl/config.hpp"
#include "ncl/error.hpp"

using namespace ncl;
namespace fs = std::filesystem;

namespace {

std::string bad_config_message(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadConfig);
    return e.what();
  }
  FAIL("expected BadConfig");
  return {};
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "ncl_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ncl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

const char* kTinyConfig =
    "class_count = 3\n"
    "feature_dim = 5\n"
    "video_count = 8\n"
    "test_video_count = 3\n"
    "snippets_per_video = 30\n"
    "labeled_ratio = 0.5\n"
    "hidden_width = 8\n"
    "epochs_pretrain = 2\n"
    "epochs_self_train = 2\n"
    "batch_size = 16\n";

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("parse_config reads key = value lines and ignores comments") {
    const auto c = parse_config(
        "# experiment\n"
        "lambda = 0.9   # stricter positives\n"
        "\n"
        "  objective=soft-pseudo\n"
        "use_negative = 0\n"
        "tiou_grid = 0.5, 0.7\n"
        "seed = 42\n");
    CHECK(c.lambda == 0.9);
    CHECK(c.objective == Objective::SoftPseudo);
    CHECK_FALSE(c.use_negative);
    CHECK(c.tiou_grid == std::vector<double>{0.5, 0.7});
    CHECK(c.seed == 42);
    CHECK(c.alpha == ExperimentConfig{}.alpha);
  }

  TEST_CASE("unknown keys and malformed lines are rejected") {
    CHECK(bad_config_message("lamda = 0.8\n").find("lamda") != std::string::npos);
    CHECK(bad_config_message("lambda 0.8\n").find("line 1") != std::string::npos);
    CHECK(bad_config_message("seed = 1\nalpha = lots\n").find("alpha") != std::string::npos);
    CHECK(bad_config_message("use_positive = maybe\n").find("use_positive") != std::string::npos);
  }

  TEST_CASE("validation names the offending field") {
    CHECK(bad_config_message("lambda = 0\n").find("lambda") != std::string::npos);
    CHECK(bad_config_message("lambda = 1.5\n").find("lambda") != std::string::npos);
    CHECK(bad_config_message("alpha = -1\n").find("alpha") != std::string::npos);
    CHECK(bad_config_message("labeled_ratio = 0\n").find("labeled_ratio") != std::string::npos);
    CHECK(bad_config_message("batch_size = 0\n").find("batch_size") != std::string::npos);
    CHECK(bad_config_message("sharpen_temperature = 0\n").find("sharpen_temperature") != std::string::npos);
    CHECK(bad_config_message("tiou_grid = 0.5, 1.5\n").find("tiou_grid") != std::string::npos);
    CHECK(bad_config_message("min_instances = 4\nmax_instances = 2\n").find("max_instances") != std::string::npos);
    CHECK_NOTHROW(parse_config("lambda = 1\n"));
  }

  TEST_CASE("format_config round trips every field") {
    ExperimentConfig c;
    c.lambda = 0.1 + 0.2;
    c.alpha = 1.0 / 3.0;
    c.objective = Objective::Complementary;
    c.normalize_by_set_size = true;
    c.seed = 18446744073709551615ull;
    c.mask_thresholds = {0.25, 0.75};
    const std::string text = format_config(c);
    const auto back = parse_config(text);
    CHECK(format_config(back) == text);
    CHECK(back.lambda == c.lambda);
    CHECK(back.alpha == c.alpha);
    CHECK(back.seed == c.seed);
    CHECK(back.objective == Objective::Complementary);
  }

  TEST_CASE("objective names") {
    for (auto o : {Objective::Hybrid, Objective::TargetOnly, Objective::SoftPseudo, Objective::Complementary}) {
      CHECK(parse_objective(to_string(o)) == o);
    }
    CHECK_THROWS_AS(parse_objective("fancy"), Error);
  }

  TEST_CASE("format_double is shortest round-trip text") {
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(0.1 + 0.2) == "0.30000000000000004");
    CHECK(std::stod(format_double(1.0 / 7.0)) == 1.0 / 7.0);
  }
}

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit with 1") {
    CHECK(cli({}).code == kExitConfigError);
    CHECK(cli({"train-everything"}).code == kExitConfigError);
    CHECK(cli({"generate", "--lambda", "2", "--out", fresh_dir("bad_lambda").string()}).code == kExitConfigError);
    const auto r = cli({"generate", "--objective", "fancy", "--out", fresh_dir("bad_obj").string()});
    CHECK(r.code == kExitConfigError);
    CHECK(r.err.find("objective") != std::string::npos);
    CHECK(cli({"--help"}).code == kExitOk);
  }

  TEST_CASE("generate writes the dataset, the config and a manifest") {
    const auto dir = fresh_dir("generate");
    spit(dir / "tiny.cfg", kTinyConfig);
    const auto out = dir / "run";
    const auto r = cli({"generate", "--config", (dir / "tiny.cfg").string(), "--seed", "9", "--out", out.string()});
    REQUIRE(r.code == kExitOk);
    for (const char* f : {"train_labeled.nclf", "train_unlabeled.nclf", "test.nclf", "sealed_ground_truth.jsonl",
                          "dataset_manifest.jsonl", "config.txt", "manifest.json"}) {
      CHECK_MESSAGE(fs::exists(out / f), f);
    }
    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    CHECK(manifest["command"] == "generate");
    CHECK(manifest["seed"] == 9);
    CHECK(manifest.contains("build_id"));
    CHECK(manifest.contains("wall_time_seconds"));
    const auto config = parse_config(slurp(out / "config.txt"));
    CHECK(config.seed == 9);
    CHECK(config.class_count == 3);
  }

  TEST_CASE("missing artifacts exit with 2") {
    const auto dir = fresh_dir("missing");
    spit(dir / "tiny.cfg", kTinyConfig);
    const auto r = cli({"pretrain", "--config", (dir / "tiny.cfg").string(), "--data", (dir / "nowhere").string(),
                        "--out", (dir / "run").string()});
    CHECK(r.code == kExitRuntimeError);
    CHECK(r.err.find("MissingArtifact") != std::string::npos);
    CHECK(cli({"pretrain", "--config", (dir / "absent.cfg").string(), "--out", (dir / "run").string()}).code ==
          kExitRuntimeError);
  }

  TEST_CASE("evaluate scores a detection dump") {
    const auto dir = fresh_dir("evaluate");
    const std::string truth = "v0 2 9 1 1\nv0 20 30 2 1\nv1 0 4 1 1\n";
    spit(dir / "truth.txt", truth);
    spit(dir / "dets.txt", "v0 2 9 1 0.9\nv0 20 30 2 0.8\nv1 0 4 1 0.7\n");
    const auto out = dir / "run";
    const auto r = cli({"evaluate", "--detections", (dir / "dets.txt").string(), "--ground-truth",
                        (dir / "truth.txt").string(), "--out", out.string()});
    REQUIRE(r.code == kExitOk);
    CHECK(r.out == "average mAP 1\n");
    CHECK(slurp(out / "map.csv").find("average,1\n") != std::string::npos);

    const auto half = cli({"evaluate", "--detections", (dir / "dets.txt").string(), "--out", out.string()});
    CHECK(half.code == kExitConfigError);
    const auto gone = cli({"evaluate", "--detections", (dir / "dets.txt").string(), "--ground-truth",
                           (dir / "absent.txt").string(), "--out", out.string()});
    CHECK(gone.code == kExitRuntimeError);
  }

  TEST_CASE("selftrain is byte-identical across runs with the same seed") {
    const auto dir = fresh_dir("selftrain");
    spit(dir / "tiny.cfg", kTinyConfig);
    const auto data = dir / "data";
    REQUIRE(cli({"generate", "--config", (dir / "tiny.cfg").string(), "--seed", "3", "--out", data.string()}).code ==
            kExitOk);
    std::vector<std::string> metrics;
    for (const char* name : {"a", "b"}) {
      const auto out = dir / name;
      const auto r = cli({"selftrain", "--config", (dir / "tiny.cfg").string(), "--seed", "3", "--data",
                          data.string(), "--out", out.string()});
      REQUIRE(r.code == kExitOk);
      metrics.push_back(slurp(out / "metrics.jsonl"));
      CHECK(fs::exists(out / "model.ckpt"));
      CHECK(fs::exists(out / "map.csv"));
    }
    CHECK_FALSE(metrics[0].empty());
    CHECK(metrics[0] == metrics[1]);
    CHECK(slurp(dir / "a" / "model.ckpt") == slurp(dir / "b" / "model.ckpt"));

    // Resuming from the saved checkpoint also works.
    const auto resumed = cli({"selftrain", "--config", (dir / "tiny.cfg").string(), "--data", data.string(),
                              "--checkpoint", (dir / "a" / "model.ckpt").string(), "--out", (dir / "c").string()});
    CHECK(resumed.code == kExitOk);
  }

  TEST_CASE("a checkpoint of the wrong shape is rejected") {
    const auto dir = fresh_dir("shape");
    spit(dir / "tiny.cfg", kTinyConfig);
    spit(dir / "wide.cfg", std::string(kTinyConfig) + "hidden_width = 9\n");
    REQUIRE(cli({"pretrain", "--config", (dir / "tiny.cfg").string(), "--out", (dir / "pre").string()}).code ==
            kExitOk);
    const auto r = cli({"evaluate", "--config", (dir / "wide.cfg").string(), "--checkpoint",
                        (dir / "pre" / "model.ckpt").string(), "--out", (dir / "eval").string()});
    CHECK(r.code == kExitRuntimeError);
    CHECK(r.err.find("ShapeMismatch") != std::string::npos);
  }
}
