#pragma once

#include "ksamil/config.hpp"
#include "ksamil/io.hpp"
#include "ksamil/train.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace ksa {

struct SweepResult {
  std::size_t train_bags = 0;
  std::size_t total_bags = 0;
  std::filesystem::path directory;
  CvReport report;
};

/// Runs the configured protocol once per training-bag count.  Layout under
/// config.output:
///   config.resolved.json
///   train_bags_<n>/{metrics,summary,predictions}.csv, manifest.json,
///                  history/rep<r>_fold<f>.csv, checkpoints/rep<r>_fold<f>.{bin,json}
/// Datasets, fold plans and initial weights depend only on the seed and the
/// bag count, so two methods run from the same seed see the same bags.
std::vector<SweepResult> run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

/// Pooling weights and, with self-attention, the beta map of every bag.
nlohmann::json dump_attention(MilModelD& model, const std::vector<Bag>& bags);

/// Incompatible run directories passed to compare.
class CompareError : public DataError {
 public:
  using DataError::DataError;
};

/// Long-format AUC table: method, train_bags, auc_mean, auc_std, n,
/// auc_diff_vs_first.  All runs must cover the same bag counts.
CsvTable compare_runs(const std::vector<std::filesystem::path>& run_dirs);

}  // namespace ksa
