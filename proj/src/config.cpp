#include "ncl/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "ncl/error.hpp"

namespace ncl {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad(std::string_view key, const std::string& why) {
  throw Error(ErrorCode::BadConfig, std::string(key) + ": " + why);
}

double parse_real(std::string_view key, std::string_view text) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) bad(key, "expected a real, got '" + std::string(text) + "'");
  return value;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view text) {
  Int value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    bad(key, "expected an integer, got '" + std::string(text) + "'");
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  bad(key, "expected true/false, got '" + std::string(text) + "'");
}

std::vector<double> parse_list(std::string_view key, std::string_view text) {
  std::vector<double> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    out.push_back(parse_real(key, trim(text.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

std::string format_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += format_double(values[i]);
  }
  return out;
}

struct Field {
  std::string_view key;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Field field(std::string_view key, T ExperimentConfig::*member) {
  Field f;
  f.key = key;
  f.set = [key, member](ExperimentConfig& c, std::string_view v) {
    if constexpr (std::is_same_v<T, double>) {
      c.*member = parse_real(key, v);
    } else if constexpr (std::is_same_v<T, bool>) {
      c.*member = parse_bool(key, v);
    } else if constexpr (std::is_same_v<T, Objective>) {
      try {
        c.*member = parse_objective(v);
      } catch (const Error&) {
        bad(key, "unknown objective '" + std::string(v) + "'");
      }
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      c.*member = parse_list(key, v);
    } else {
      c.*member = parse_int<T>(key, v);
    }
  };
  f.get = [member](const ExperimentConfig& c) -> std::string {
    if constexpr (std::is_same_v<T, double>) {
      return format_double(c.*member);
    } else if constexpr (std::is_same_v<T, bool>) {
      return c.*member ? "true" : "false";
    } else if constexpr (std::is_same_v<T, Objective>) {
      return std::string(to_string(c.*member));
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      return format_list(c.*member);
    } else {
      return std::to_string(c.*member);
    }
  };
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      field("lambda", &ExperimentConfig::lambda),
      field("alpha", &ExperimentConfig::alpha),
      field("objective", &ExperimentConfig::objective),
      field("use_negative", &ExperimentConfig::use_negative),
      field("use_positive", &ExperimentConfig::use_positive),
      field("normalize_by_set_size", &ExperimentConfig::normalize_by_set_size),
      field("omit_refinement_losses", &ExperimentConfig::omit_refinement_losses),
      field("class_count", &ExperimentConfig::class_count),
      field("feature_dim", &ExperimentConfig::feature_dim),
      field("labeled_ratio", &ExperimentConfig::labeled_ratio),
      field("snippets_per_video", &ExperimentConfig::snippets_per_video),
      field("video_count", &ExperimentConfig::video_count),
      field("test_video_count", &ExperimentConfig::test_video_count),
      field("noise_sigma", &ExperimentConfig::noise_sigma),
      field("prototype_separation", &ExperimentConfig::prototype_separation),
      field("class_group_size", &ExperimentConfig::class_group_size),
      field("min_instances", &ExperimentConfig::min_instances),
      field("max_instances", &ExperimentConfig::max_instances),
      field("seed", &ExperimentConfig::seed),
      field("hidden_width", &ExperimentConfig::hidden_width),
      field("context_window", &ExperimentConfig::context_window),
      field("epochs_pretrain", &ExperimentConfig::epochs_pretrain),
      field("epochs_self_train", &ExperimentConfig::epochs_self_train),
      field("batch_size", &ExperimentConfig::batch_size),
      field("learning_rate", &ExperimentConfig::learning_rate),
      field("self_train_learning_rate", &ExperimentConfig::self_train_learning_rate),
      field("sharpen_temperature", &ExperimentConfig::sharpen_temperature),
      field("per_step_refresh", &ExperimentConfig::per_step_refresh),
      field("soft_nms_threshold", &ExperimentConfig::soft_nms_threshold),
      field("soft_nms_sigma", &ExperimentConfig::soft_nms_sigma),
      field("tiou_grid", &ExperimentConfig::tiou_grid),
      field("classification_thresholds", &ExperimentConfig::classification_thresholds),
      field("mask_thresholds", &ExperimentConfig::mask_thresholds),
  };
  return table;
}

void check_unit_grid(std::string_view key, const std::vector<double>& grid) {
  if (grid.empty()) bad(key, "must not be empty");
  for (double v : grid) {
    if (!(v >= 0.0 && v <= 1.0)) bad(key, "entries must lie in [0,1]");
  }
}

}  // namespace

std::string_view to_string(Objective objective) {
  switch (objective) {
    case Objective::Hybrid: return "hybrid";
    case Objective::TargetOnly: return "target-only";
    case Objective::SoftPseudo: return "soft-pseudo";
    case Objective::Complementary: return "complementary";
  }
  return "hybrid";
}

Objective parse_objective(std::string_view text) {
  if (text == "hybrid") return Objective::Hybrid;
  if (text == "target-only") return Objective::TargetOnly;
  if (text == "soft-pseudo") return Objective::SoftPseudo;
  if (text == "complementary") return Objective::Complementary;
  throw Error(ErrorCode::BadConfig, "objective: unknown value '" + std::string(text) + "'");
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void ExperimentConfig::validate() const {
  if (!(lambda > 0.0 && lambda <= 1.0)) bad("lambda", "must lie in (0,1]");
  if (!(alpha >= 0.0)) bad("alpha", "must be >= 0");
  if (class_count < 1) bad("class_count", "must be >= 1");
  if (feature_dim < 1) bad("feature_dim", "must be >= 1");
  if (!(labeled_ratio > 0.0 && labeled_ratio <= 1.0)) bad("labeled_ratio", "must lie in (0,1]");
  if (snippets_per_video < 1) bad("snippets_per_video", "must be >= 1");
  if (video_count < 1) bad("video_count", "must be >= 1");
  if (test_video_count < 0) bad("test_video_count", "must be >= 0");
  if (!(noise_sigma >= 0.0)) bad("noise_sigma", "must be >= 0");
  if (!(prototype_separation >= 0.0)) bad("prototype_separation", "must be >= 0");
  if (class_group_size < 1) bad("class_group_size", "must be >= 1");
  if (min_instances < 0 || max_instances < min_instances) bad("max_instances", "need 0 <= min_instances <= max_instances");
  if (hidden_width < 1) bad("hidden_width", "must be >= 1");
  if (context_window < 0) bad("context_window", "must be >= 0");
  if (epochs_pretrain < 0) bad("epochs_pretrain", "must be >= 0");
  if (epochs_self_train < 0) bad("epochs_self_train", "must be >= 0");
  if (batch_size < 1) bad("batch_size", "must be >= 1");
  if (!(learning_rate >= 0.0)) bad("learning_rate", "must be >= 0");
  if (!(self_train_learning_rate >= 0.0)) bad("self_train_learning_rate", "must be >= 0");
  if (!(sharpen_temperature > 0.0)) bad("sharpen_temperature", "must be > 0");
  if (!(soft_nms_threshold >= 0.0 && soft_nms_threshold <= 1.0)) bad("soft_nms_threshold", "must lie in [0,1]");
  if (!(soft_nms_sigma > 0.0)) bad("soft_nms_sigma", "must be > 0");
  check_unit_grid("tiou_grid", tiou_grid);
  check_unit_grid("classification_thresholds", classification_thresholds);
  check_unit_grid("mask_thresholds", mask_thresholds);
}

void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(config, trim(value));
      return;
    }
  }
  bad(key, "unknown key");
}

ExperimentConfig parse_config(std::string_view text, ExperimentConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::BadConfig, "line " + std::to_string(line_no) + ": expected key = value");
    }
    set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  base.validate();
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingArtifact, "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(base));
}

std::string format_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& f : fields()) {
    out += std::string(f.key) + " = " + f.get(config) + "\n";
  }
  return out;
}

}  // namespace ncl
