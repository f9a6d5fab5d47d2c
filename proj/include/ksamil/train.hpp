#pragma once

#include "ksamil/adam.hpp"
#include "ksamil/data.hpp"
#include "ksamil/metrics.hpp"
#include "ksamil/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ksa {

/// Training hit a non-finite loss or gradient.
class TrainingError : public NumericError {
 public:
  using NumericError::NumericError;
};

enum class StopCriterion { val_loss, val_auc };

std::string to_string(StopCriterion c);
StopCriterion stop_criterion_from_string(const std::string& name);

/// Patience-based early stopping with a snapshot of the best parameters.
/// Lower is better for val_loss, higher for val_auc; NaN never improves.
class EarlyStopper {
 public:
  EarlyStopper(int window, StopCriterion criterion = StopCriterion::val_loss);

  /// Records the metric of a finished epoch.  Returns true when `window`
  /// epochs have passed since the best one, i.e. training should stop.
  bool update(int epoch, double metric, const ParameterStore<double>& params);

  /// Writes the best snapshot back; no-op before the first improvement.
  void restore(ParameterStore<double>& params) const;

  int window() const { return window_; }
  int best_epoch() const { return best_epoch_; }
  double best_metric() const { return best_metric_; }
  bool has_snapshot() const { return !snapshot_.empty(); }

 private:
  bool improves(double metric) const;

  int window_;
  StopCriterion criterion_;
  int best_epoch_ = 0;
  double best_metric_;
  std::vector<TensorD> snapshot_;
};

struct TrainOptions {
  AdamOptions adam;
  int max_epochs = 200;
  int patience = 5;
  StopCriterion criterion = StopCriterion::val_loss;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_auc = 0;  // NaN when the validation set has one class
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;  // 0 when no epoch ran
  bool stopped_early = false;
};

struct Validation {
  double loss = 0;
  double auc = 0;
};

/// Replaces the built-in validation pass (used to drive the stopping rule
/// from a scripted metric sequence).
using ValidationFn = std::function<Validation(MilModelD&, int epoch)>;

/// Mean loss and AUC (NaN with one class) of the model over the bags.
Validation validate(MilModelD& model, std::span<const Bag> bags);

/// Batch-size-1 Adam training with per-epoch shuffling, validation after
/// every epoch and early stopping; the best snapshot is restored at the end.
TrainResult train_model(MilModelD& model, std::span<const Bag> train_bags, std::span<const Bag> val_bags,
                        const TrainOptions& options, const ValidationFn& validation = {});

// ---------------------------------------------------------------------------
// Cross-validation

/// Stratified partition of bag indices into k folds.
struct FoldPlan {
  std::vector<std::vector<std::size_t>> folds;

  struct Split {
    std::vector<std::size_t> train, val, test;
  };

  /// Rotation r: fold r is the test fold, fold (r + 1) mod k the validation
  /// fold, the rest train.
  Split split(std::size_t rotation) const;
};

FoldPlan make_fold_plan(std::span<const int> labels, std::size_t k, std::uint64_t seed);

/// Seed of the fold plan that run_cv uses for one repetition.
std::uint64_t fold_plan_seed(std::uint64_t cv_seed, std::size_t repetition);

struct CvOptions {
  std::size_t folds = 10;
  std::size_t repetitions = 5;
  std::uint64_t seed = 0;
  std::size_t workers = 1;  // 0: one per hardware thread
  TrainOptions train;
};

struct FoldResult {
  std::size_t repetition = 0;
  std::size_t fold = 0;
  MetricsReport test;
  std::vector<double> test_scores;
  std::vector<int> test_labels;
  std::vector<std::size_t> test_ids;
  TrainResult training;
  MilModelD model;  // best snapshot
};

struct CvReport {
  std::vector<FoldResult> folds;  // ordered by (repetition, fold)
  Summary accuracy, precision, recall, f_score, auc;
};

/// Progress hook, called once per finished job from a single thread at a time.
using FoldCallback = std::function<void(const FoldResult&)>;

/// Repetitions x k-fold cross-validation.  Each (repetition, fold) job trains
/// a fresh model; jobs share no mutable state and may run on `workers`
/// threads.  When `held_out` is non-empty every job is scored on it instead
/// of its test fold.
CvReport run_cv(std::span<const Bag> bags, const ModelSpec& spec, const CvOptions& options,
                std::span<const Bag> held_out = {}, const FoldCallback& on_fold = {});

}  // namespace ksa
