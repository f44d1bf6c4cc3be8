#include "ncl/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ncl/config.hpp"
#include "ncl/datagen.hpp"
#include "ncl/experiment.hpp"
#include "ncl/localize.hpp"
#include "ncl/model.hpp"
#include "ncl/selftrain.hpp"

#ifndef NCL_BUILD_ID
#define NCL_BUILD_ID "unknown"
#endif

namespace ncl {

const char* build_id() { return NCL_BUILD_ID; }

namespace {

namespace fs = std::filesystem;

constexpr const char* kOutputRootEnv = "NCL_OUTPUT_ROOT";

constexpr const char* kLabeledFile = "train_labeled.nclf";
constexpr const char* kUnlabeledFile = "train_unlabeled.nclf";
constexpr const char* kTestFile = "test.nclf";
constexpr const char* kSealedFile = "sealed_ground_truth.jsonl";

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<double> labeled_ratio;
  std::optional<double> lambda;
  std::optional<double> alpha;
  std::optional<std::string> objective;
  std::string data_dir;
  std::string checkpoint;
  std::string detections;
  std::string ground_truth;
  std::size_t seeds = 5;
  std::vector<double> lambdas = {0.75, 0.80, 0.85, 0.90};
};

void add_common(CLI::App* app, Options& o) {
  app->add_option("--config", o.config_path, "flat key = value config file");
  app->add_option("--seed", o.seed, "base random seed");
  app->add_option("--out", o.out_dir, "output directory");
  app->add_option("--labeled-ratio", o.labeled_ratio, "fraction of training videos that keep labels");
  app->add_option("--lambda", o.lambda, "positive-class threshold scale");
  app->add_option("--alpha", o.alpha, "unlabeled loss weight");
  app->add_option("--objective", o.objective, "hybrid|target-only|soft-pseudo|complementary");
}

ExperimentConfig resolve_config(const Options& o) {
  ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.labeled_ratio) c.labeled_ratio = *o.labeled_ratio;
  if (o.lambda) c.lambda = *o.lambda;
  if (o.alpha) c.alpha = *o.alpha;
  if (o.objective) set_config_value(c, "objective", *o.objective);
  c.validate();
  return c;
}

fs::path resolve_out(const Options& o, const std::string& command) {
  if (!o.out_dir.empty()) return o.out_dir;
  const char* root = std::getenv(kOutputRootEnv);
  return fs::path(root && *root ? root : "runs") / command;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

fs::path require(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::MissingArtifact, "expected file " + path.string());
  return path;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(require(path), std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// The dataset either comes from a `generate` directory or is rebuilt from
/// the config, which is deterministic.
Benchmark load_or_generate(const Options& o, const ExperimentConfig& config) {
  if (o.data_dir.empty()) return generate_benchmark(config);
  const fs::path dir = o.data_dir;
  const std::size_t classes = static_cast<std::size_t>(config.class_count);
  Benchmark b;
  b.labeled = load_feature_file(require(dir / kLabeledFile), classes);
  b.unlabeled = load_feature_file(require(dir / kUnlabeledFile), classes);
  b.test = load_feature_file(require(dir / kTestFile), classes);
  b.sealed = load_sealed_ground_truth(require(dir / kSealedFile), classes);
  for (const auto* set : {&b.labeled, &b.unlabeled, &b.test}) {
    for (const auto& v : *set) {
      if (!v.snippets.empty() && v.snippets.front().feature.size() != static_cast<std::size_t>(config.feature_dim)) {
        throw Error(ErrorCode::BadConfig, "feature_dim: dataset rows have width " +
                                              std::to_string(v.snippets.front().feature.size()));
      }
    }
  }
  return b;
}

class Run {
 public:
  Run(std::string command, fs::path out, ExperimentConfig config)
      : command_(std::move(command)), out_(std::move(out)), config_(std::move(config)),
        start_(std::chrono::steady_clock::now()) {
    fs::create_directories(out_);
  }

  const fs::path& dir() const { return out_; }
  const ExperimentConfig& config() const { return config_; }

  void artifact(const std::string& name, const std::string& text) {
    write_text(out_ / name, text);
    artifacts_.push_back(name);
  }

  void finish() {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_text(out_ / "config.txt", format_config(config_));
    nlohmann::json m;
    m["command"] = command_;
    m["seed"] = config_.seed;
    m["build_id"] = build_id();
    m["config_file"] = "config.txt";
    m["omit_refinement_losses"] = config_.omit_refinement_losses;
    m["wall_time_seconds"] = wall;
    m["artifacts"] = artifacts_;
    write_text(out_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  std::string command_;
  fs::path out_;
  ExperimentConfig config_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> artifacts_;
};

std::string metrics_lines(const std::vector<EpochMetrics>& log) {
  std::string out;
  for (const auto& m : log) out += m.to_json() + "\n";
  return out;
}

std::string map_csv(const MapResult& map) {
  std::string out = "tiou,map\n";
  for (std::size_t i = 0; i < map.thresholds.size(); ++i) {
    out += format_double(map.thresholds[i]) + "," + format_double(map.map_per_threshold[i]) + "\n";
  }
  out += "average," + format_double(map.average_map) + "\n";
  return out;
}

std::string summary_csv(const std::vector<SweepRow>& rows, const std::vector<Variant>& variants) {
  std::string out = "variant,mean_average_map\n";
  for (const auto& v : variants) out += v.name + "," + format_double(mean_map(rows, v.name)) + "\n";
  return out;
}

std::string audit_csv(const PipelineResult& r) {
  std::string out =
      "model,target,positive,ambiguous,negative,positive_given_wrong,ambiguous_given_wrong,negative_given_wrong,"
      "mean_positive_count,mean_negative_count\n";
  auto row = [&out](const char* name, const SubspaceStatistics& s) {
    out += std::string(name) + "," + format_double(s.target) + "," + format_double(s.positive) + "," +
           format_double(s.ambiguous) + "," + format_double(s.negative) + "," + format_double(s.positive_given_wrong) +
           "," + format_double(s.ambiguous_given_wrong) + "," + format_double(s.negative_given_wrong) + "," +
           format_double(s.mean_positive_count) + "," + format_double(s.mean_negative_count) + "\n";
  };
  row("pretrained", r.pretrain_audit);
  row("self_trained", r.final_audit);
  return out;
}

int cmd_generate(const Options& o, std::ostream& out) {
  Run run("generate", resolve_out(o, "generate"), resolve_config(o));
  const Benchmark b = generate_benchmark(run.config());
  const std::size_t dim = static_cast<std::size_t>(run.config().feature_dim);
  write_feature_file(run.dir() / kLabeledFile, b.labeled, dim);
  write_feature_file(run.dir() / kUnlabeledFile, b.unlabeled, dim);
  write_feature_file(run.dir() / kTestFile, b.test, dim);
  write_sealed_ground_truth(run.dir() / kSealedFile, b.sealed);
  run.artifact("dataset_manifest.jsonl", format_manifest(b));
  run.finish();
  out << "generated " << b.labeled.size() << " labeled, " << b.unlabeled.size() << " unlabeled, " << b.test.size()
      << " test videos in " << run.dir().string() << "\n";
  return kExitOk;
}

int cmd_pretrain(const Options& o, std::ostream& out) {
  Run run("pretrain", resolve_out(o, "pretrain"), resolve_config(o));
  const Benchmark b = load_or_generate(o, run.config());
  const TrainResult r = pretrain(b.labeled, run.config());
  save_checkpoint(run.dir() / "model.ckpt", r.params);
  run.artifact("metrics.jsonl", metrics_lines(r.log));
  run.finish();
  out << "pretrained model written to " << (run.dir() / "model.ckpt").string() << "\n";
  return kExitOk;
}

ModelParams load_or_pretrain(const Options& o, const ExperimentConfig& config, const Benchmark& b,
                             std::vector<EpochMetrics>& log) {
  if (!o.checkpoint.empty()) {
    return load_checkpoint(require(o.checkpoint), config.model_input_dim(),
                           static_cast<std::size_t>(config.hidden_width), config.label_count());
  }
  TrainResult r = pretrain(b.labeled, config);
  log = r.log;
  return std::move(r.params);
}

int cmd_selftrain(const Options& o, std::ostream& out) {
  Run run("selftrain", resolve_out(o, "selftrain"), resolve_config(o));
  const Benchmark b = load_or_generate(o, run.config());
  std::vector<EpochMetrics> log;
  ModelParams init = load_or_pretrain(o, run.config(), b, log);
  TrainResult r = self_train(std::move(init), b.labeled, b.unlabeled, run.config(), &b.sealed);
  log.insert(log.end(), r.log.begin(), r.log.end());
  const Evaluation eval = evaluate_model(r.params, b.test, run.config());
  if (!log.empty()) log.back().average_map = eval.map.average_map;
  save_checkpoint(run.dir() / "model.ckpt", r.params);
  run.artifact("metrics.jsonl", metrics_lines(log));
  run.artifact("map.csv", map_csv(eval.map));
  run.finish();
  out << "self-trained average mAP " << format_double(eval.map.average_map) << "\n";
  return kExitOk;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  Run run("evaluate", resolve_out(o, "evaluate"), resolve_config(o));
  MapResult map;
  if (!o.detections.empty() || !o.ground_truth.empty()) {
    if (o.detections.empty() || o.ground_truth.empty()) {
      throw Error(ErrorCode::BadConfig, "--detections and --ground-truth must be given together");
    }
    const auto dets = parse_detections(read_text(o.detections));
    const auto truth = parse_detections(read_text(o.ground_truth));
    map = mean_average_precision(dets, truth, run.config().tiou_grid);
    run.artifact("detections.txt", format_detections(dets));
  } else {
    if (o.checkpoint.empty()) throw Error(ErrorCode::BadConfig, "--checkpoint is required to evaluate a model");
    const Benchmark b = load_or_generate(o, run.config());
    const auto params = load_checkpoint(require(o.checkpoint), run.config().model_input_dim(),
                                        static_cast<std::size_t>(run.config().hidden_width),
                                        run.config().label_count());
    const Evaluation eval = evaluate_model(params, b.test, run.config());
    map = eval.map;
    run.artifact("detections.txt", format_detections(eval.detections));
  }
  run.artifact("map.csv", map_csv(map));
  run.finish();
  out << "average mAP " << format_double(map.average_map) << "\n";
  return kExitOk;
}

int cmd_sweep(const Options& o, std::ostream& out, const std::string& command, const std::vector<Variant>& variants) {
  Run run(command, resolve_out(o, command), resolve_config(o));
  if (o.seeds == 0) throw Error(ErrorCode::BadConfig, "seeds: must be >= 1");
  const auto rows = run_sweep(run.config(), variants, seed_range(run.config().seed, o.seeds));
  run.artifact("results.csv", format_sweep_csv(rows, run.config().tiou_grid));
  const std::string summary = summary_csv(rows, variants);
  run.artifact("summary.csv", summary);
  run.finish();
  out << summary;
  return kExitOk;
}

int cmd_audit(const Options& o, std::ostream& out) {
  Run run("subspace-audit", resolve_out(o, "subspace-audit"), resolve_config(o));
  const Benchmark b = load_or_generate(o, run.config());
  const PipelineResult r = run_pipeline(run.config(), b);
  const std::string csv = audit_csv(r);
  run.artifact("subspaces.csv", csv);
  run.artifact("metrics.jsonl", metrics_lines(r.self_trained.log));
  run.finish();
  out << csv;
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hybrid positive-negative self-training for temporal action localization"};
  app.require_subcommand(1);
  Options o;

  auto* generate = app.add_subcommand("generate", "build the synthetic benchmark");
  auto* pre = app.add_subcommand("pretrain", "supervised pretraining on labeled videos");
  auto* self = app.add_subcommand("selftrain", "self-training with pseudo labels");
  auto* evaluate = app.add_subcommand("evaluate", "mAP tables for a model or a detection dump");
  auto* ablate_losses = app.add_subcommand("ablate-losses", "target / +negative / +positive loss ablation");
  auto* ablate_lambda = app.add_subcommand("ablate-lambda", "sweep the positive threshold scale");
  auto* compare = app.add_subcommand("compare-baselines", "soft pseudo label vs complementary label vs hybrid");
  auto* audit = app.add_subcommand("subspace-audit", "where the hidden ground truth falls in the partition");

  for (auto* sub : {generate, pre, self, evaluate, ablate_losses, ablate_lambda, compare, audit}) add_common(sub, o);
  for (auto* sub : {pre, self, evaluate, audit}) sub->add_option("--data", o.data_dir, "dataset directory from `generate`");
  for (auto* sub : {self, evaluate}) sub->add_option("--checkpoint", o.checkpoint, "model checkpoint");
  evaluate->add_option("--detections", o.detections, "detection dump to score");
  evaluate->add_option("--ground-truth", o.ground_truth, "ground-truth dump (same format, score 1)");
  for (auto* sub : {ablate_losses, ablate_lambda, compare}) sub->add_option("--seeds", o.seeds, "number of seeds");
  ablate_lambda->add_option("--lambdas", o.lambdas, "lambda grid")->delimiter(',');

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }

  try {
    if (generate->parsed()) return cmd_generate(o, out);
    if (pre->parsed()) return cmd_pretrain(o, out);
    if (self->parsed()) return cmd_selftrain(o, out);
    if (evaluate->parsed()) return cmd_evaluate(o, out);
    if (ablate_losses->parsed()) return cmd_sweep(o, out, "ablate-losses", loss_ablation_variants());
    if (ablate_lambda->parsed()) return cmd_sweep(o, out, "ablate-lambda", lambda_variants(o.lambdas));
    if (compare->parsed()) return cmd_sweep(o, out, "compare-baselines", baseline_variants());
    if (audit->parsed()) return cmd_audit(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::BadConfig ? kExitConfigError : kExitRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
  return kExitConfigError;
}

}  // namespace ncl
