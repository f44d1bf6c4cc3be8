#include "ncl/datagen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace ncl {

static_assert(std::endian::native == std::endian::little, "feature container I/O assumes a little-endian host");

void SealedGroundTruth::store(const std::string& video_id, std::vector<ActionInstance> instances) {
  sealed_[video_id] = std::move(instances);
}

const std::vector<ActionInstance>& SealedGroundTruth::instances(const std::string& video_id) const {
  const auto it = sealed_.find(video_id);
  if (it == sealed_.end()) throw Error(ErrorCode::MissingGroundTruth, "no sealed ground truth for video " + video_id);
  return it->second;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

constexpr std::uint64_t kPrototypeStream = 0x70726f746full;
constexpr std::uint64_t kSplitStream = 0x73706c6974ull;
constexpr std::uint64_t kTestStreamBase = 1ull << 40;

std::vector<double> random_unit(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = n(rng);
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

void normalize(std::vector<double>& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
}

std::vector<ActionInstance> place_instances(const ExperimentConfig& config, std::mt19937_64& rng,
                                            const std::string& video_id) {
  const std::size_t length = static_cast<std::size_t>(config.snippets_per_video);
  std::uniform_int_distribution<int> count_dist(config.min_instances, config.max_instances);
  const std::size_t count = static_cast<std::size_t>(count_dist(rng));
  if (count == 0) return {};

  const double mean_duration = std::max(2.0, static_cast<double>(length) / 10.0);
  std::geometric_distribution<int> extra(1.0 / std::max(1.0, mean_duration - 1.0));
  std::uniform_int_distribution<int> class_dist(0, config.class_count - 1);

  std::vector<std::size_t> durations(count);
  std::vector<ClassIndex> labels(count);
  for (std::size_t i = 0; i < count; ++i) {
    durations[i] = std::min<std::size_t>(2 + static_cast<std::size_t>(extra(rng)), std::max<std::size_t>(1, length / 2));
    labels[i] = static_cast<ClassIndex>(class_dist(rng));
  }

  // Instances keep at least one background snippet between them so that
  // neighbouring actions never merge into one run.
  for (int shrink = 0; shrink < 8; ++shrink) {
    for (int attempt = 0; attempt < 64; ++attempt) {
      std::vector<ActionInstance> placed;
      bool ok = true;
      for (std::size_t i = 0; i < count && ok; ++i) {
        if (durations[i] > length) {
          ok = false;
          break;
        }
        std::uniform_int_distribution<std::size_t> start_dist(0, length - durations[i]);
        const std::size_t start = start_dist(rng);
        const std::size_t end = start + durations[i] - 1;
        for (const auto& other : placed) {
          if (start <= other.end + 1 && other.start <= end + 1) {
            ok = false;
            break;
          }
        }
        if (ok) placed.push_back(ActionInstance{start, end, labels[i], 1.0});
      }
      if (ok) {
        std::sort(placed.begin(), placed.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
        return placed;
      }
    }
    bool shrunk = false;
    for (auto& d : durations) {
      if (d > 1) {
        d = std::max<std::size_t>(1, d / 2);
        shrunk = true;
      }
    }
    if (!shrunk) break;
  }
  throw Error(ErrorCode::InfeasiblePlacement,
              "cannot place " + std::to_string(count) + " instances in video " + video_id);
}

VideoRecord make_video(const ExperimentConfig& config, const std::vector<std::vector<double>>& prototypes,
                       std::uint64_t stream, std::string id) {
  std::mt19937_64 rng(derive_seed(config.seed, stream));
  VideoRecord video;
  video.id = std::move(id);
  video.instances = place_instances(config, rng, video.id);
  video.labeled = true;

  const std::size_t length = static_cast<std::size_t>(config.snippets_per_video);
  const std::size_t dim = static_cast<std::size_t>(config.feature_dim);
  const auto labels = snippet_labels(video.instances, length, static_cast<std::size_t>(config.class_count));
  std::normal_distribution<double> noise(0.0, 1.0);
  video.snippets.resize(length);
  for (std::size_t t = 0; t < length; ++t) {
    auto& s = video.snippets[t];
    s.feature.assign(dim, 0.0);
    if (labels[t] < prototypes.size()) s.feature = prototypes[labels[t]];
    for (double& x : s.feature) x += config.noise_sigma * noise(rng);
    s.supervision = GroundTruthLabel{labels[t]};
  }
  return video;
}

void strip_annotations(VideoRecord& video) {
  video.instances.clear();
  video.labeled = false;
  for (auto& s : video.snippets) s.supervision = Unlabeled{};
}

// --- binary I/O -----------------------------------------------------------

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <typename T>
  void put(T value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void bytes(const std::string& s) { out_.write(s.data(), static_cast<std::streamsize>(s.size())); }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  template <typename T>
  T get(const std::string& context) {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (in_.gcount() != static_cast<std::streamsize>(sizeof(T))) fail(context);
    offset_ += sizeof(T);
    return value;
  }

  std::string bytes(std::size_t n, const std::string& context) {
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) fail(context);
    offset_ += n;
    return s;
  }

  std::size_t offset() const { return offset_; }

  [[noreturn]] void fail(const std::string& context) const {
    throw Error(ErrorCode::CorruptRecord,
                path_ + ": truncated or unreadable " + context + " at byte offset " + std::to_string(offset_));
  }

 private:
  std::istream& in_;
  std::string path_;
  std::size_t offset_ = 0;
};

nlohmann::json instances_json(const std::vector<ActionInstance>& instances) {
  auto arr = nlohmann::json::array();
  for (const auto& inst : instances) arr.push_back({inst.start, inst.end, inst.label + 1});
  return arr;
}

}  // namespace

std::vector<std::vector<double>> make_prototypes(const ExperimentConfig& config) {
  std::mt19937_64 rng(derive_seed(config.seed, kPrototypeStream));
  const std::size_t dim = static_cast<std::size_t>(config.feature_dim);
  const std::size_t classes = static_cast<std::size_t>(config.class_count);
  const std::size_t group = static_cast<std::size_t>(config.class_group_size);
  std::vector<std::vector<double>> prototypes(classes);
  std::vector<double> center;
  for (std::size_t c = 0; c < classes; ++c) {
    if (c % group == 0) center = random_unit(rng, dim);
    if (group == 1) {
      prototypes[c] = center;
      continue;
    }
    std::vector<double> offset = random_unit(rng, dim);
    const double along = std::inner_product(offset.begin(), offset.end(), center.begin(), 0.0);
    for (std::size_t i = 0; i < dim; ++i) offset[i] -= along * center[i];
    normalize(offset);
    std::vector<double> p(dim);
    for (std::size_t i = 0; i < dim; ++i) p[i] = center[i] + config.prototype_separation * offset[i];
    normalize(p);
    prototypes[c] = std::move(p);
  }
  return prototypes;
}

Benchmark generate_benchmark(const ExperimentConfig& config) {
  config.validate();
  Benchmark bench;
  bench.prototypes = make_prototypes(config);

  const std::size_t train_count = static_cast<std::size_t>(config.video_count);
  std::vector<std::size_t> order(train_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 split_rng(derive_seed(config.seed, kSplitStream));
  std::shuffle(order.begin(), order.end(), split_rng);
  const std::size_t labeled_count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(config.labeled_ratio * static_cast<double>(train_count))), 1, train_count);
  std::vector<bool> is_labeled(train_count, false);
  for (std::size_t i = 0; i < labeled_count; ++i) is_labeled[order[i]] = true;

  for (std::size_t v = 0; v < train_count; ++v) {
    char id[32];
    std::snprintf(id, sizeof(id), "train_%04zu", v);
    VideoRecord video = make_video(config, bench.prototypes, v, id);
    if (is_labeled[v]) {
      bench.labeled.push_back(std::move(video));
    } else {
      bench.sealed.store(video.id, video.instances);
      strip_annotations(video);
      bench.unlabeled.push_back(std::move(video));
    }
  }
  for (std::size_t v = 0; v < static_cast<std::size_t>(config.test_video_count); ++v) {
    char id[32];
    std::snprintf(id, sizeof(id), "test_%04zu", v);
    bench.test.push_back(make_video(config, bench.prototypes, kTestStreamBase + v, id));
  }
  return bench;
}

void write_feature_file(const std::filesystem::path& path, const std::vector<VideoRecord>& videos,
                        std::size_t feature_dim) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  Writer w(out);
  w.bytes("NCLF");
  w.put<std::uint32_t>(kFeatureFileVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(feature_dim));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(videos.size()));
  for (const auto& video : videos) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(video.id.size()));
    w.bytes(video.id);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(video.length()));
    w.put<std::uint8_t>(video.labeled ? 1 : 0);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(video.instances.size()));
    for (const auto& inst : video.instances) {
      w.put<std::uint32_t>(static_cast<std::uint32_t>(inst.start));
      w.put<std::uint32_t>(static_cast<std::uint32_t>(inst.end));
      w.put<std::uint32_t>(static_cast<std::uint32_t>(inst.label + 1));
      w.put<double>(inst.score);
    }
    const std::size_t row_dim = video.snippets.empty() ? feature_dim : video.snippets.front().feature.size();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(row_dim));
    for (const auto& s : video.snippets) {
      for (double x : s.feature) w.put<double>(x);
    }
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

std::vector<VideoRecord> load_feature_file(const std::filesystem::path& path, std::size_t class_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingArtifact, "feature file not found: " + path.string());
  Reader r(in, path.string());
  if (r.bytes(4, "magic") != "NCLF") throw Error(ErrorCode::BadMagic, path.string() + " is not a feature container");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kFeatureFileVersion) {
    throw Error(ErrorCode::VersionMismatch, path.string() + " has version " + std::to_string(version) +
                                                ", expected " + std::to_string(kFeatureFileVersion));
  }
  const std::size_t dim = r.get<std::uint32_t>("feature dim");
  const std::size_t count = r.get<std::uint32_t>("video count");

  std::vector<VideoRecord> videos;
  videos.reserve(count);
  for (std::size_t v = 0; v < count; ++v) {
    const std::size_t record_offset = r.offset();
    VideoRecord video;
    const std::size_t id_len = r.get<std::uint32_t>("video id length");
    if (id_len > 4096) r.fail("video id length");
    video.id = r.bytes(id_len, "video id");
    const std::string ctx = "video " + video.id;
    const std::size_t length = r.get<std::uint32_t>(ctx + " length");
    video.labeled = r.get<std::uint8_t>(ctx + " labeled flag") != 0;
    const std::size_t n_inst = r.get<std::uint32_t>(ctx + " instance count");
    for (std::size_t i = 0; i < n_inst; ++i) {
      ActionInstance inst;
      inst.start = r.get<std::uint32_t>(ctx + " instance");
      inst.end = r.get<std::uint32_t>(ctx + " instance");
      const std::uint32_t label = r.get<std::uint32_t>(ctx + " instance");
      inst.score = r.get<double>(ctx + " instance");
      if (label == 0) {
        throw Error(ErrorCode::CorruptRecord, ctx + " has class id 0 near byte offset " + std::to_string(r.offset()));
      }
      inst.label = label - 1;
      video.instances.push_back(inst);
    }
    const std::size_t row_dim = r.get<std::uint32_t>(ctx + " row width");
    if (row_dim != dim) {
      throw Error(ErrorCode::ShapeMismatch, ctx + " has rows of width " + std::to_string(row_dim) +
                                                " but the header declares " + std::to_string(dim));
    }
    const auto labels = snippet_labels(video.instances, length, class_count);
    video.snippets.resize(length);
    for (std::size_t t = 0; t < length; ++t) {
      auto& s = video.snippets[t];
      s.feature.resize(dim);
      for (double& x : s.feature) x = r.get<double>(ctx + " features");
      if (video.labeled) {
        s.supervision = GroundTruthLabel{labels[t]};
      } else {
        s.supervision = Unlabeled{};
      }
    }
    try {
      validate_video(video, class_count, dim);
    } catch (const Error& e) {
      throw Error(ErrorCode::CorruptRecord, std::string(e.what()) + " (record at byte offset " +
                                                std::to_string(record_offset) + ")");
    }
    videos.push_back(std::move(video));
  }
  return videos;
}

std::string format_manifest(const Benchmark& benchmark) {
  std::string out;
  auto emit = [&out](const VideoRecord& v, const char* split, const std::vector<ActionInstance>& instances) {
    nlohmann::json j = {{"id", v.id},
                        {"split", split},
                        {"labeled", v.labeled},
                        {"snippets", v.length()},
                        {"instances", instances_json(instances)}};
    out += j.dump() + "\n";
  };
  for (const auto& v : benchmark.labeled) emit(v, "train", v.instances);
  for (const auto& v : benchmark.unlabeled) emit(v, "train", {});
  for (const auto& v : benchmark.test) emit(v, "test", v.instances);
  return out;
}

void write_sealed_ground_truth(const std::filesystem::path& path, const SealedGroundTruth& sealed) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (const auto& [id, instances] : sealed.all()) {
    out << nlohmann::json{{"id", id}, {"instances", instances_json(instances)}}.dump() << '\n';
  }
}

SealedGroundTruth load_sealed_ground_truth(const std::filesystem::path& path, std::size_t class_count) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingArtifact, "sealed ground truth not found: " + path.string());
  SealedGroundTruth sealed;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      std::vector<ActionInstance> instances;
      for (const auto& t : j.at("instances")) {
        const auto label = t.at(2).get<std::size_t>();
        if (label == 0 || label > class_count) throw Error(ErrorCode::CorruptRecord, "class id out of range");
        instances.push_back(ActionInstance{t.at(0).get<std::size_t>(), t.at(1).get<std::size_t>(), label - 1, 1.0});
      }
      sealed.store(j.at("id").get<std::string>(), std::move(instances));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::CorruptRecord, path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return sealed;
}

}  // namespace ncl
