#pragma once

#include "ksamil/adam.hpp"
#include "ksamil/data.hpp"
#include "ksamil/model.hpp"
#include "ksamil/train.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace ksa {

/// Invalid or unreadable experiment configuration.  what() lists every
/// offending field, one per line.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct DatasetConfig {
  std::filesystem::path images;
  std::filesystem::path labels;
};

struct SamplerSettings {
  double mean = 10;
  double stddev = 2;
  Index min_size = 1;
  bool balance = true;
  Index max_rejections = 10000;
  /// Sweep over the number of bags in the training folds.
  std::vector<std::size_t> train_bags{50};
  /// Size of an extra held-out test set scored by every fold model; 0 scores
  /// each model on its own test fold.
  std::size_t test_bags = 0;
};

struct ProtocolConfig {
  std::size_t folds = 10;
  std::size_t repetitions = 5;
  int patience = 5;
  int max_epochs = 200;
  std::uint64_t seed = 1;
  StopCriterion criterion = StopCriterion::val_loss;
  std::size_t workers = 1;
  bool save_checkpoints = true;
};

struct ExperimentConfig {
  std::string name;  // method label in reports; defaults to the method name
  DatasetConfig dataset;
  AssumptionRule rule = AssumptionRule::standard(9);
  SamplerSettings sampler;
  ModelSpec model;
  AdamOptions optimizer;
  ProtocolConfig protocol;
  std::filesystem::path output = "runs/experiment";
};

/// Total bags sampled so that the k - 2 training folds hold about
/// `train_bags` bags: ceil(train_bags * k / (k - 2)).
std::size_t dataset_size_for(std::size_t train_bags, std::size_t folds);

/// Parses and validates a configuration document.  Relative dataset paths are
/// resolved against `data_root`.  Unknown keys are errors.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& data_root = {});

/// Reads a JSON config file.  Relative dataset paths resolve against the
/// KSAMIL_DATA_ROOT environment variable when set, otherwise against the
/// directory holding the config file.
ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const ExperimentConfig& config);
nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const AssumptionRule& rule);

}  // namespace ksa
