#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ncl/config.hpp"
#include "ncl/core.hpp"

namespace ncl {

/// Ground truth of the unlabeled training videos. Training code only ever
/// sees the stripped VideoRecords; audits look answers up here.
class SealedGroundTruth {
 public:
  void store(const std::string& video_id, std::vector<ActionInstance> instances);
  /// Throws MissingGroundTruth for an unknown id.
  const std::vector<ActionInstance>& instances(const std::string& video_id) const;
  bool contains(const std::string& video_id) const { return sealed_.count(video_id) != 0; }
  const std::map<std::string, std::vector<ActionInstance>>& all() const { return sealed_; }

 private:
  std::map<std::string, std::vector<ActionInstance>> sealed_;
};

struct Benchmark {
  std::vector<VideoRecord> labeled;
  std::vector<VideoRecord> unlabeled;
  std::vector<VideoRecord> test;
  SealedGroundTruth sealed;
  std::vector<std::vector<double>> prototypes;  // class_count x feature_dim
};

/// Mixes a base seed with a stream index (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Unit prototypes arranged in groups of `class_group_size` that share a
/// random center; `prototype_separation` is the tangent of each member's
/// angle to its center, so 0 collapses a group onto one point.
std::vector<std::vector<double>> make_prototypes(const ExperimentConfig& config);

/// Synthetic untrimmed videos. Every video draws from its own derived seed,
/// so the output depends only on the config.
Benchmark generate_benchmark(const ExperimentConfig& config);

/// Binary feature container (little-endian):
///   "NCLF" u32 version u32 feature_dim u32 video_count
///   per video: u32 id_len, id bytes, u32 length, u8 labeled,
///              u32 instance_count, {u32 start, u32 end, u32 class (1-based), f64 score}*,
///              u32 row_dim, length*row_dim f64 row-major
inline constexpr std::uint32_t kFeatureFileVersion = 1;

void write_feature_file(const std::filesystem::path& path, const std::vector<VideoRecord>& videos,
                        std::size_t feature_dim);

/// Labeled videos come back with ground-truth supervision per snippet,
/// unlabeled ones with Unlabeled. Errors name the video and byte offset.
std::vector<VideoRecord> load_feature_file(const std::filesystem::path& path, std::size_t class_count);

/// One JSON object per line: id, split, labeled flag, 1-based instances.
std::string format_manifest(const Benchmark& benchmark);

void write_sealed_ground_truth(const std::filesystem::path& path, const SealedGroundTruth& sealed);
SealedGroundTruth load_sealed_ground_truth(const std::filesystem::path& path, std::size_t class_count);

}  // namespace ncl
