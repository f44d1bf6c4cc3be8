#include "ncl/experiment.hpp"

#include <map>

namespace ncl {

Evaluation evaluate_model(const ModelParams& params, const std::vector<VideoRecord>& videos,
                          const ExperimentConfig& config) {
  Evaluation out;
  std::vector<Detection> candidates;
  for (const auto& video : videos) {
    const auto rows = model_inputs(video, config.context_window);
    std::vector<ClassDistribution> dists;
    std::vector<double> masks;
    dists.reserve(rows.size());
    masks.reserve(rows.size());
    for (const auto& row : rows) {
      auto fwd = forward(params, row);
      dists.push_back(std::move(fwd.dist));
      masks.push_back(fwd.mask_score);
    }
    auto video_candidates = generate_candidates(video.id, dists, masks, config.classification_thresholds,
                                                config.mask_thresholds);
    auto kept = soft_nms_per_class(video_candidates, config.soft_nms_sigma, config.soft_nms_threshold);
    out.detections.insert(out.detections.end(), std::make_move_iterator(kept.begin()),
                          std::make_move_iterator(kept.end()));
  }
  out.map = mean_average_precision(out.detections, ground_truth_detections(videos), config.tiou_grid);
  return out;
}

std::vector<Detection> ground_truth_detections(const std::vector<VideoRecord>& videos) {
  std::vector<Detection> out;
  for (const auto& v : videos) {
    for (const auto& inst : v.instances) out.push_back(Detection{v.id, inst.start, inst.end, inst.label, 1.0});
  }
  return out;
}

PipelineResult run_pipeline(const ExperimentConfig& config, const Benchmark& benchmark,
                            const TrainResult* pretrained) {
  PipelineResult result;
  result.pretrained = pretrained ? *pretrained : pretrain(benchmark.labeled, config);
  const std::size_t classes = static_cast<std::size_t>(config.class_count);
  if (!benchmark.unlabeled.empty()) {
    result.pretrain_audit = subspace_statistics(
        assign_pseudo_labels(result.pretrained.params, benchmark.unlabeled, config), benchmark.sealed, classes);
  }
  result.self_trained =
      self_train(result.pretrained.params, benchmark.labeled, benchmark.unlabeled, config, &benchmark.sealed);
  if (!benchmark.unlabeled.empty()) {
    result.final_audit = subspace_statistics(
        assign_pseudo_labels(result.self_trained.params, benchmark.unlabeled, config), benchmark.sealed, classes);
  }
  result.evaluation = evaluate_model(result.self_trained.params, benchmark.test, config);
  result.test_snippet_accuracy = snippet_accuracy(result.self_trained.params, benchmark.test, config.context_window);
  return result;
}

namespace {

/// Settings that change the pretraining objective; variants agreeing on this
/// key can share one pretrained model.
bool supervised_negative(const ExperimentConfig& c) {
  return c.use_negative && c.objective != Objective::TargetOnly;
}

}  // namespace

std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const std::vector<Variant>& variants,
                                const std::vector<std::uint64_t>& seeds) {
  std::vector<SweepRow> rows;
  for (std::uint64_t seed : seeds) {
    ExperimentConfig seeded = base;
    seeded.seed = seed;
    const Benchmark bench = generate_benchmark(seeded);
    std::map<bool, TrainResult> pretrained;
    for (const auto& variant : variants) {
      ExperimentConfig config = seeded;
      variant.apply(config);
      config.validate();
      const bool key = supervised_negative(config);
      if (!pretrained.count(key)) pretrained.emplace(key, pretrain(bench.labeled, config));
      const PipelineResult r = run_pipeline(config, bench, &pretrained.at(key));
      SweepRow row;
      row.variant = variant.name;
      row.seed = seed;
      row.average_map = r.evaluation.map.average_map;
      row.map_per_threshold = r.evaluation.map.map_per_threshold;
      row.pseudo_accuracy = r.self_trained.log.empty() || !r.self_trained.log.back().pseudo_accuracy
                                ? 0.0
                                : *r.self_trained.log.back().pseudo_accuracy;
      row.test_snippet_accuracy = r.test_snippet_accuracy;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<Variant> loss_ablation_variants() {
  return {
      {"tgt",
       [](ExperimentConfig& c) {
         c.objective = Objective::Hybrid;
         c.use_negative = false;
         c.use_positive = false;
       }},
      {"tgt+neg",
       [](ExperimentConfig& c) {
         c.objective = Objective::Hybrid;
         c.use_negative = true;
         c.use_positive = false;
       }},
      {"tgt+neg+pos",
       [](ExperimentConfig& c) {
         c.objective = Objective::Hybrid;
         c.use_negative = true;
         c.use_positive = true;
       }},
  };
}

std::vector<Variant> lambda_variants(const std::vector<double>& lambdas) {
  std::vector<Variant> out;
  for (double lambda : lambdas) {
    out.push_back({"lambda=" + format_double(lambda), [lambda](ExperimentConfig& c) {
                     c.objective = Objective::Hybrid;
                     c.use_negative = true;
                     c.use_positive = true;
                     c.lambda = lambda;
                   }});
  }
  return out;
}

std::vector<Variant> baseline_variants() {
  return {
      {"soft-pseudo", [](ExperimentConfig& c) { c.objective = Objective::SoftPseudo; }},
      {"complementary", [](ExperimentConfig& c) { c.objective = Objective::Complementary; }},
      {"hybrid",
       [](ExperimentConfig& c) {
         c.objective = Objective::Hybrid;
         c.use_negative = true;
         c.use_positive = true;
       }},
  };
}

double mean_map(const std::vector<SweepRow>& rows, const std::string& variant) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.variant == variant) {
      sum += r.average_map;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

std::string format_sweep_csv(const std::vector<SweepRow>& rows, const std::vector<double>& tiou_grid) {
  std::string out = "variant,seed,average_map";
  for (double t : tiou_grid) out += ",map@" + format_double(t);
  out += ",pseudo_accuracy,test_snippet_accuracy\n";
  for (const auto& r : rows) {
    out += r.variant + "," + std::to_string(r.seed) + "," + format_double(r.average_map);
    for (double m : r.map_per_threshold) out += "," + format_double(m);
    out += "," + format_double(r.pseudo_accuracy) + "," + format_double(r.test_snippet_accuracy) + "\n";
  }
  return out;
}

std::vector<std::uint64_t> seed_range(std::uint64_t base, std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t i = 0; i < count; ++i) seeds[i] = base + i;
  return seeds;
}

}  // namespace ncl
