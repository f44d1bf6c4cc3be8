#include "ncl/selftrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "ncl/partition.hpp"

namespace ncl {

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974ull;
// Both phases shuffle labeled data from the same stream, so self-training
// without unlabeled videos is exactly a continuation of pretraining.
constexpr std::uint64_t kLabeledStream = 0x70726574ull;
constexpr std::uint64_t kUnlabeledStream = 0x756e6c62ull;
constexpr std::uint64_t kComplementaryStream = 0x636f6d70ull;

struct Sample {
  const std::vector<double>* input = nullptr;
  const Supervision* supervision = nullptr;
  std::optional<double> mask_target;
};

struct InputTable {
  std::vector<std::vector<double>> rows;
  std::vector<const Snippet*> snippets;
  std::vector<ClassIndex> hidden_labels;  // only filled when sealed truth is known
};

InputTable flatten_inputs(const std::vector<VideoRecord>& videos, int window) {
  InputTable table;
  for (const auto& v : videos) {
    auto rows = model_inputs(v, window);
    for (std::size_t t = 0; t < rows.size(); ++t) {
      table.rows.push_back(std::move(rows[t]));
      table.snippets.push_back(&v.snippets[t]);
    }
  }
  return table;
}

std::vector<ClassIndex> hidden_labels(const std::vector<VideoRecord>& videos, const SealedGroundTruth& sealed,
                                      std::size_t class_count) {
  std::vector<ClassIndex> out;
  for (const auto& v : videos) {
    const auto labels = snippet_labels(sealed.instances(v.id), v.length(), class_count);
    out.insert(out.end(), labels.begin(), labels.end());
  }
  return out;
}

SubspaceStatistics tally_subspaces(const std::vector<const PseudoLabel*>& pseudo,
                                   const std::vector<ClassIndex>& truth) {
  SubspaceStatistics s;
  std::size_t n_tgt = 0, n_pos = 0, n_amb = 0, n_neg = 0;
  std::size_t w_pos = 0, w_amb = 0, w_neg = 0;
  double pos_count = 0.0, neg_count = 0.0;
  auto contains = [](const std::vector<ClassIndex>& set, ClassIndex c) {
    return std::binary_search(set.begin(), set.end(), c);
  };
  for (std::size_t i = 0; i < pseudo.size(); ++i) {
    const auto& part = pseudo[i]->partition;
    const ClassIndex gt = truth[i];
    pos_count += static_cast<double>(part.positives().size());
    neg_count += static_cast<double>(part.negatives().size());
    if (gt == part.target()) {
      ++n_tgt;
      continue;
    }
    if (contains(part.positives(), gt)) {
      ++n_pos;
      ++w_pos;
    } else if (contains(part.negatives(), gt)) {
      ++n_neg;
      ++w_neg;
    } else {
      ++n_amb;
      ++w_amb;
    }
  }
  s.snippets = pseudo.size();
  s.mislabeled = pseudo.size() - n_tgt;
  if (s.snippets) {
    const double n = static_cast<double>(s.snippets);
    s.target = static_cast<double>(n_tgt) / n;
    s.positive = static_cast<double>(n_pos) / n;
    s.ambiguous = static_cast<double>(n_amb) / n;
    s.negative = static_cast<double>(n_neg) / n;
    s.mean_positive_count = pos_count / n;
    s.mean_negative_count = neg_count / n;
  }
  if (s.mislabeled) {
    const double w = static_cast<double>(s.mislabeled);
    s.positive_given_wrong = static_cast<double>(w_pos) / w;
    s.ambiguous_given_wrong = static_cast<double>(w_amb) / w;
    s.negative_given_wrong = static_cast<double>(w_neg) / w;
  }
  return s;
}

PseudoLabel pseudo_label_for(const ModelParams& params, const std::vector<double>& input,
                             const ExperimentConfig& config, std::uint64_t round, std::size_t index) {
  const auto fwd = forward(params, input);
  return make_pseudo_label(fwd.dist, config,
                           derive_seed(derive_seed(config.seed, kComplementaryStream + round), index));
}

std::vector<PseudoLabel> pseudo_label_rows(const ModelParams& params, const std::vector<std::vector<double>>& rows,
                                           const ExperimentConfig& config, std::uint64_t round) {
  std::vector<PseudoLabel> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out.push_back(pseudo_label_for(params, rows[i], config, round, i));
  return out;
}

LossBreakdown& accumulate(LossBreakdown& acc, const LossBreakdown& b) {
  acc.supervised_target += b.supervised_target;
  acc.supervised_negative += b.supervised_negative;
  acc.unsupervised_target += b.unsupervised_target;
  acc.unsupervised_positive += b.unsupervised_positive;
  acc.unsupervised_negative += b.unsupervised_negative;
  acc.mask += b.mask;
  acc.total += b.total;
  return acc;
}

LossBreakdown scaled(LossBreakdown b, double s) {
  b.supervised_target *= s;
  b.supervised_negative *= s;
  b.unsupervised_target *= s;
  b.unsupervised_positive *= s;
  b.unsupervised_negative *= s;
  b.mask *= s;
  b.total *= s;
  return b;
}

/// One optimizer step over a mixed batch.
LossBreakdown optimize_step(ModelParams& params, AdamState& adam, ModelParams& grads,
                            const std::vector<Sample>& batch, const LossOptions& options, double learning_rate) {
  std::vector<BatchPrediction> predictions;
  std::vector<ForwardCache> caches;
  std::vector<BatchEntry> entries;
  predictions.reserve(batch.size());
  caches.reserve(batch.size());
  entries.reserve(batch.size());
  for (const auto& s : batch) {
    auto fwd = forward(params, *s.input);
    predictions.push_back(BatchPrediction{std::move(fwd.dist), fwd.mask_score});
    caches.push_back(std::move(fwd.cache));
    entries.push_back(BatchEntry{s.supervision, s.mask_target});
  }
  const CombinedLoss loss = combined_loss(entries, predictions, options);

  for (auto t : grads.tensors()) std::fill(t.begin(), t.end(), 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    backward(params, caches[i], loss.grad_logits[i], loss.grad_mask_logit[i], grads);
  }
  adam_step(params, grads, adam, learning_rate);
  return loss.breakdown;
}

std::vector<Sample> labeled_samples(const InputTable& table) {
  std::vector<Sample> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto* gt = std::get_if<GroundTruthLabel>(&table.snippets[i]->supervision);
    if (gt == nullptr) throw Error(ErrorCode::UnresolvedSupervision, "labeled video has a snippet without ground truth");
    out.push_back(Sample{&table.rows[i], &table.snippets[i]->supervision, 0.0});
  }
  return out;
}

void set_mask_targets(std::vector<Sample>& samples, const std::vector<VideoRecord>& videos, std::size_t class_count) {
  std::size_t i = 0;
  for (const auto& v : videos) {
    const auto labels = snippet_labels(v.instances, v.length(), class_count);
    for (std::size_t t = 0; t < v.length(); ++t, ++i) samples[i].mask_target = labels[t] < class_count ? 1.0 : 0.0;
  }
}

}  // namespace

std::string EpochMetrics::to_json() const {
  nlohmann::json j;
  j["phase"] = phase;
  j["epoch"] = epoch;
  j["loss"] = {{"supervised_target", loss.supervised_target},
               {"supervised_negative", loss.supervised_negative},
               {"unsupervised_target", loss.unsupervised_target},
               {"unsupervised_positive", loss.unsupervised_positive},
               {"unsupervised_negative", loss.unsupervised_negative},
               {"mask", loss.mask},
               {"total", loss.total}};
  if (pseudo_accuracy) j["pseudo_accuracy"] = *pseudo_accuracy;
  if (subspaces) {
    j["subspaces"] = {{"target", subspaces->target},
                      {"positive", subspaces->positive},
                      {"ambiguous", subspaces->ambiguous},
                      {"negative", subspaces->negative},
                      {"positive_given_wrong", subspaces->positive_given_wrong},
                      {"ambiguous_given_wrong", subspaces->ambiguous_given_wrong},
                      {"mean_positive_count", subspaces->mean_positive_count},
                      {"mean_negative_count", subspaces->mean_negative_count}};
  }
  if (average_map) j["average_map"] = *average_map;
  return j.dump();
}

ClassDistribution sharpen(const ClassDistribution& dist, double temperature) {
  if (!(temperature > 0.0)) throw Error(ErrorCode::BadConfig, "sharpen temperature must be > 0");
  if (temperature == 1.0) return dist;
  // Work in log space relative to the max so tiny probabilities and small
  // temperatures cannot underflow the whole vector.
  const double exponent = 1.0 / temperature;
  const double top = dist.max();
  std::vector<double> powered(dist.size());
  for (std::size_t c = 0; c < dist.size(); ++c) {
    powered[c] = dist[c] > 0.0 ? std::exp(exponent * (std::log(dist[c]) - std::log(top))) : 0.0;
  }
  return make_distribution(powered);
}

std::vector<std::vector<double>> model_inputs(const VideoRecord& video, int context_window) {
  const std::size_t n = video.length();
  std::vector<std::vector<double>> rows(n);
  if (context_window <= 0) {
    for (std::size_t t = 0; t < n; ++t) rows[t] = video.snippets[t].feature;
    return rows;
  }
  const auto w = static_cast<std::ptrdiff_t>(context_window);
  for (std::size_t t = 0; t < n; ++t) {
    auto& row = rows[t];
    for (std::ptrdiff_t o = -w; o <= w; ++o) {
      const auto idx = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(t) + o, 0,
                                                  static_cast<std::ptrdiff_t>(n) - 1);
      const auto& f = video.snippets[static_cast<std::size_t>(idx)].feature;
      row.insert(row.end(), f.begin(), f.end());
    }
  }
  return rows;
}

ModelParams initial_params(const ExperimentConfig& config) {
  return init_params(config.model_input_dim(), static_cast<std::size_t>(config.hidden_width), config.label_count(),
                     derive_seed(config.seed, kInitStream));
}

namespace {

/// Shared mini-batch loop. `unlabeled_rows` may be empty. Pseudo labels are
/// refreshed at the start of each epoch (or each step when configured).
TrainResult run_phase(ModelParams params, const std::vector<VideoRecord>& labeled,
                      const std::vector<VideoRecord>& unlabeled, const ExperimentConfig& config,
                      const SealedGroundTruth* sealed, const std::string& phase, int epochs, double base_rate) {
  TrainResult result;
  const std::size_t class_count = static_cast<std::size_t>(config.class_count);
  const InputTable labeled_table = flatten_inputs(labeled, config.context_window);
  std::vector<Sample> sup = labeled_samples(labeled_table);
  set_mask_targets(sup, labeled, class_count);
  if (sup.empty()) throw Error(ErrorCode::EmptyLabeledSet, "no labeled snippets to train on");

  const InputTable unlabeled_table = flatten_inputs(unlabeled, config.context_window);
  std::vector<ClassIndex> truth;
  if (sealed != nullptr && !unlabeled.empty()) truth = hidden_labels(unlabeled, *sealed, class_count);

  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  const std::size_t steps_per_epoch = (sup.size() + batch - 1) / batch;
  const std::size_t n_unsup = unlabeled_table.rows.size();
  const std::size_t unsup_batch = (n_unsup + steps_per_epoch - 1) / steps_per_epoch;
  const std::uint64_t total_steps = static_cast<std::uint64_t>(epochs) * steps_per_epoch;

  std::mt19937_64 labeled_rng(derive_seed(config.seed, kLabeledStream));
  std::mt19937_64 unlabeled_rng(derive_seed(config.seed, kUnlabeledStream));
  std::vector<std::size_t> sup_order(sup.size());
  std::vector<std::size_t> unsup_order(n_unsup);
  std::iota(unsup_order.begin(), unsup_order.end(), std::size_t{0});

  AdamState adam = AdamState::for_params(params);
  ModelParams grads = ModelParams::zeros(params.input_dim, params.hidden_width, params.label_count);
  const LossOptions options = LossOptions::from_config(config);

  std::vector<Supervision> pseudo(n_unsup, Supervision{Unlabeled{}});
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto round = static_cast<std::uint64_t>(epoch);
    if (n_unsup > 0 && !config.per_step_refresh) {
      auto labels = pseudo_label_rows(params, unlabeled_table.rows, config, round);
      for (std::size_t i = 0; i < n_unsup; ++i) pseudo[i] = std::move(labels[i]);
    }
    EpochMetrics metrics;
    metrics.phase = phase;
    metrics.epoch = epoch + 1;
    if (!truth.empty() && !config.per_step_refresh) {
      std::vector<const PseudoLabel*> view;
      std::size_t correct = 0;
      for (std::size_t i = 0; i < n_unsup; ++i) {
        view.push_back(&std::get<PseudoLabel>(pseudo[i]));
        if (view.back()->label() == truth[i]) ++correct;
      }
      metrics.pseudo_accuracy = static_cast<double>(correct) / static_cast<double>(n_unsup);
      metrics.subspaces = tally_subspaces(view, truth);
    }

    std::iota(sup_order.begin(), sup_order.end(), std::size_t{0});
    std::shuffle(sup_order.begin(), sup_order.end(), labeled_rng);
    if (n_unsup > 0) std::shuffle(unsup_order.begin(), unsup_order.end(), unlabeled_rng);

    LossBreakdown epoch_loss;
    epoch_loss.alpha = config.alpha;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      std::vector<Sample> mixed;
      const std::size_t lo = step * batch;
      const std::size_t hi = std::min(sup.size(), lo + batch);
      for (std::size_t i = lo; i < hi; ++i) mixed.push_back(sup[sup_order[i]]);
      const std::size_t ulo = std::min(n_unsup, step * unsup_batch);
      const std::size_t uhi = std::min(n_unsup, ulo + unsup_batch);
      for (std::size_t i = ulo; i < uhi; ++i) {
        const std::size_t u = unsup_order[i];
        if (config.per_step_refresh) {
          pseudo[u] = pseudo_label_for(params, unlabeled_table.rows[u], config,
                                       round * steps_per_epoch + step, u);
        }
        mixed.push_back(Sample{&unlabeled_table.rows[u], &pseudo[u], std::nullopt});
      }
      const std::uint64_t global_step = static_cast<std::uint64_t>(epoch) * steps_per_epoch + step;
      const double rate = cosine_learning_rate(base_rate, global_step, total_steps);
      accumulate(epoch_loss, optimize_step(params, adam, grads, mixed, options, rate));
    }
    metrics.loss = scaled(epoch_loss, 1.0 / static_cast<double>(steps_per_epoch));
    metrics.loss.alpha = config.alpha;
    result.log.push_back(std::move(metrics));
  }
  result.params = std::move(params);
  return result;
}

}  // namespace

TrainResult pretrain(const std::vector<VideoRecord>& labeled, const ExperimentConfig& config) {
  return pretrain(initial_params(config), labeled, config);
}

TrainResult pretrain(ModelParams params, const std::vector<VideoRecord>& labeled, const ExperimentConfig& config) {
  if (labeled.empty()) throw Error(ErrorCode::EmptyLabeledSet, "pretraining needs at least one labeled video");
  return run_phase(std::move(params), labeled, {}, config, nullptr, "pretrain", config.epochs_pretrain,
                   config.learning_rate);
}

PseudoLabel make_pseudo_label(const ClassDistribution& prediction, const ExperimentConfig& config,
                              std::uint64_t rng_draw) {
  ClassDistribution sharp = sharpen(prediction, config.sharpen_temperature);
  LabelPartition partition = partition_label_space(sharp, config.lambda);
  std::optional<ClassIndex> complementary;
  if (sharp.size() > 1) {
    ClassIndex c = static_cast<ClassIndex>(rng_draw % (sharp.size() - 1));
    if (c >= partition.target()) ++c;
    complementary = c;
  }
  std::vector<double> soft(sharp.probs().begin(), sharp.probs().end());
  return PseudoLabel{std::move(partition), std::move(soft), complementary};
}

std::vector<VideoRecord> assign_pseudo_labels(const ModelParams& params, const std::vector<VideoRecord>& unlabeled,
                                              const ExperimentConfig& config, std::uint64_t round) {
  std::vector<VideoRecord> annotated = unlabeled;
  std::size_t index = 0;
  for (auto& video : annotated) {
    const auto rows = model_inputs(video, config.context_window);
    for (std::size_t t = 0; t < rows.size(); ++t, ++index) {
      video.snippets[t].supervision = pseudo_label_for(params, rows[t], config, round, index);
    }
  }
  return annotated;
}

SubspaceStatistics subspace_statistics(const std::vector<VideoRecord>& annotated, const SealedGroundTruth& sealed,
                                       std::size_t class_count) {
  std::vector<const PseudoLabel*> view;
  for (const auto& v : annotated) {
    for (const auto& s : v.snippets) {
      const auto* p = std::get_if<PseudoLabel>(&s.supervision);
      if (p == nullptr) throw Error(ErrorCode::UnresolvedSupervision, "video " + v.id + " is not pseudo-labeled");
      view.push_back(p);
    }
  }
  return tally_subspaces(view, hidden_labels(annotated, sealed, class_count));
}

double pseudo_label_accuracy(const std::vector<VideoRecord>& annotated, const SealedGroundTruth& sealed,
                             std::size_t class_count) {
  const auto truth = hidden_labels(annotated, sealed, class_count);
  std::size_t i = 0, correct = 0;
  for (const auto& v : annotated) {
    for (const auto& s : v.snippets) {
      const auto* p = std::get_if<PseudoLabel>(&s.supervision);
      if (p == nullptr) throw Error(ErrorCode::UnresolvedSupervision, "video " + v.id + " is not pseudo-labeled");
      if (p->label() == truth[i++]) ++correct;
    }
  }
  return truth.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truth.size());
}

TrainResult self_train(ModelParams params, const std::vector<VideoRecord>& labeled,
                       const std::vector<VideoRecord>& unlabeled, const ExperimentConfig& config,
                       const SealedGroundTruth* sealed) {
  if (labeled.empty()) throw Error(ErrorCode::EmptyLabeledSet, "self-training needs at least one labeled video");
  return run_phase(std::move(params), labeled, unlabeled, config, sealed, "selftrain", config.epochs_self_train,
                   config.self_train_learning_rate);
}

double snippet_accuracy(const ModelParams& params, const std::vector<VideoRecord>& videos, int context_window) {
  const std::size_t class_count = params.label_count - 1;
  std::size_t total = 0, correct = 0;
  for (const auto& v : videos) {
    const auto labels = snippet_labels(v.instances, v.length(), class_count);
    const auto rows = model_inputs(v, context_window);
    for (std::size_t t = 0; t < rows.size(); ++t) {
      if (forward(params, rows[t]).dist.argmax() == labels[t]) ++correct;
      ++total;
    }
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

}  // namespace ncl
