#pragma once

#include "ksamil/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ksa {

/// Unreadable, malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bag sampling could not satisfy its constraints.
class SamplingError : public DataError {
 public:
  using DataError::DataError;
};

// ---------------------------------------------------------------------------
// IDX container (MNIST)

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Parses an unsigned-byte image file into [count x 1 x rows x cols] with
/// pixels scaled by 1/255.
TensorD parse_idx_images(std::span<const std::uint8_t> bytes);

/// Parses an unsigned-byte label file; every label must be a digit 0-9.
std::vector<int> parse_idx_labels(std::span<const std::uint8_t> bytes);

/// Inverse of parse_idx_images for a [count x 1 x rows x cols] stack whose
/// values are multiples of 1/255.
std::vector<std::uint8_t> encode_idx_images(const TensorD& images);
std::vector<std::uint8_t> encode_idx_labels(std::span<const int> labels);

/// Whole file contents, transparently gunzipped when the gzip magic is present.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Instance pool and bags

/// Immutable collection of instances with their concept ids.
struct InstancePool {
  TensorD images;             // [P x ...instance shape]
  std::vector<int> concepts;  // length P

  Index size() const { return static_cast<Index>(concepts.size()); }
  Shape instance_shape() const { return Shape(images.shape().begin() + 1, images.shape().end()); }

  /// Stack of the selected instances, [indices.size() x ...instance shape].
  TensorD gather(std::span<const Index> indices) const;
};

InstancePool load_idx_pool(const std::filesystem::path& images, const std::filesystem::path& labels);

struct Bag {
  std::size_t id = 0;
  std::vector<Index> pool_indices;  // empty for bags not drawn from a pool
  std::vector<int> concepts;        // hidden instance concepts, never seen by the model
  int label = 0;
  TensorD instances;                // [N x ...instance shape]

  Index size() const { return instances.shape().empty() ? 0 : instances.shape()[0]; }
};

// ---------------------------------------------------------------------------
// Labelling rules

/// Bag labelling assumption over instance concepts.
///   standard   positive iff concept c occurs at least once
///   presence   positive iff every concept in the set occurs at least once
///   threshold  positive iff every concept c_i occurs at least t_i times
struct AssumptionRule {
  enum class Kind { standard, presence, threshold };

  Kind kind = Kind::standard;
  std::vector<std::pair<int, int>> requirements;  // (concept, minimum count)

  static AssumptionRule standard(int target);
  static AssumptionRule presence(std::vector<int> concepts);
  static AssumptionRule threshold(std::vector<std::pair<int, int>> concept_counts);

  /// Throws std::invalid_argument on empty requirement lists or counts < 1.
  void validate() const;
  std::string describe() const;

  friend bool operator==(const AssumptionRule&, const AssumptionRule&) = default;
};

std::string to_string(AssumptionRule::Kind kind);
AssumptionRule::Kind rule_kind_from_string(const std::string& name);

int label_bag(const AssumptionRule& rule, std::span<const int> concepts);

// ---------------------------------------------------------------------------
// Bag sampling

struct BagSamplerConfig {
  double mean = 10;
  double stddev = 2;
  Index min_size = 1;
  bool balance = true;
  std::uint64_t seed = 0;
  /// Consecutive rejected bags tolerated while balancing before giving up.
  Index max_rejections = 10000;

  void validate() const;
};

/// Draws bags whose size is max(min_size, round(N(mean, stddev))) and whose
/// members are drawn uniformly with replacement from the pool.
class BagSampler {
 public:
  explicit BagSampler(BagSamplerConfig cfg);

  Index sample_size();
  Bag sample_bag(const InstancePool& pool, const AssumptionRule& rule);

  /// `count` bags with ids 0..count-1.  With balancing, ceil(count/2) bags are
  /// positive and floor(count/2) negative; excess bags of a full class are
  /// rejected.
  std::vector<Bag> sample(const InstancePool& pool, const AssumptionRule& rule, std::size_t count);

 private:
  Bag draw_members(const InstancePool& pool, const AssumptionRule& rule);

  BagSamplerConfig cfg_;
  std::mt19937_64 rng_;
};

std::vector<Bag> sample_bags(const InstancePool& pool, const AssumptionRule& rule,
                             const BagSamplerConfig& cfg, std::size_t count);

}  // namespace ksa
