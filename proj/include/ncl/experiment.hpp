#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ncl/config.hpp"
#include "ncl/datagen.hpp"
#include "ncl/localize.hpp"
#include "ncl/model.hpp"
#include "ncl/selftrain.hpp"

namespace ncl {

struct Evaluation {
  std::vector<Detection> detections;
  MapResult map;
};

/// Candidate generation and per-class Soft-NMS on every video, then mAP
/// against the videos' own instances.
Evaluation evaluate_model(const ModelParams& params, const std::vector<VideoRecord>& videos,
                          const ExperimentConfig& config);

/// Ground-truth instances of a video set as score-1 detections.
std::vector<Detection> ground_truth_detections(const std::vector<VideoRecord>& videos);

struct PipelineResult {
  TrainResult pretrained;
  TrainResult self_trained;
  Evaluation evaluation;
  SubspaceStatistics pretrain_audit;  // pseudo labels of the pretrained model
  SubspaceStatistics final_audit;     // pseudo labels of the self-trained model
  double test_snippet_accuracy = 0.0;
};

/// Pretrain (unless `pretrained` is supplied), self-train, evaluate, audit.
PipelineResult run_pipeline(const ExperimentConfig& config, const Benchmark& benchmark,
                            const TrainResult* pretrained = nullptr);

/// One labeled row of a sweep: a variant name, seed, and outcome.
struct SweepRow {
  std::string variant;
  std::uint64_t seed = 0;
  double average_map = 0.0;
  std::vector<double> map_per_threshold;
  double pseudo_accuracy = 0.0;
  double test_snippet_accuracy = 0.0;
};

struct Variant {
  std::string name;
  std::function<void(ExperimentConfig&)> apply;
};

/// Runs every variant on every seed. Variants whose supervised objective
/// matches reuse one pretraining per seed.
std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const std::vector<Variant>& variants,
                                const std::vector<std::uint64_t>& seeds);

/// Loss-term ablation: target, target+negative, target+negative+positive.
std::vector<Variant> loss_ablation_variants();
/// One hybrid variant per lambda value.
std::vector<Variant> lambda_variants(const std::vector<double>& lambdas);
/// soft pseudo label, complementary label, hybrid.
std::vector<Variant> baseline_variants();

/// Mean average mAP of one variant across the rows.
double mean_map(const std::vector<SweepRow>& rows, const std::string& variant);

/// variant,seed,average_map,map@t...,pseudo_accuracy,test_snippet_accuracy
std::string format_sweep_csv(const std::vector<SweepRow>& rows, const std::vector<double>& tiou_grid);

/// Seeds base, base+1, ...
std::vector<std::uint64_t> seed_range(std::uint64_t base, std::size_t count);

}  // namespace ncl
