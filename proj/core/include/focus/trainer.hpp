#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "focus/config.hpp"
#include "focus/dataio.hpp"
#include "focus/metrics.hpp"
#include "focus/model.hpp"
#include "focus/parallel.hpp"
#include "focus/rng.hpp"

namespace focus {

// Bag positions (into Dataset::bags) used by one fold.
struct FoldPlan {
  std::size_t fold_index = 0;
  std::vector<std::size_t> train;  // the K-shot subset, grouped by class
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Stratified 6:2:2 resampling for the fold, then K bags per class drawn from
// its train part. Depends only on the manifest, fold index, k_shot and seed.
FoldPlan plan_fold(const DatasetManifest& manifest, const RunConfig& config,
                   std::size_t fold_index);

struct TrainState {
  std::size_t epoch = 0;
  double best_val_metric = -1.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_since_improve = 0;
  ParamStore best_params;
  CounterRng rng{0};
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_balanced_acc = 0.0;
  bool improved = false;
};

struct StageRatio {
  std::string stage;
  double mean_ratio = 1.0;
};

struct FoldResult {
  std::size_t fold_index = 0;
  MetricSet metrics;  // on the test split, using the best-validation parameters
  double best_val_metric = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  std::vector<StageRatio> stage_ratios;  // mean over test bags
  std::vector<EpochLog> history;
  ParamStore best_params;
};

struct TrainOptions {
  // Folds in run_experiment run concurrently under Execution::Parallel.
  Execution exec = Execution::Sequential;
  // Called after every epoch with the model as it stands after that epoch.
  std::function<void(const EpochLog&, const FocusModel&)> on_epoch;
};

// Stage-1 output for every bag of the dataset under `config`.
std::vector<PreparedBag> prepare_dataset(const Dataset& dataset, const RunConfig& config,
                                         Execution exec = Execution::Sequential);

// Knowledge prompts for the model; a zero row when the dataset has none and
// the configuration never reads them.
Matrix model_knowledge(const Dataset& dataset, const RunConfig& config);

FoldResult train_one_fold(const Dataset& dataset, const std::vector<PreparedBag>& prepared,
                          const FoldPlan& plan, const RunConfig& config,
                          const TrainOptions& options = {});
FoldResult train_one_fold(const Dataset& dataset, const FoldPlan& plan, const RunConfig& config,
                          const TrainOptions& options = {});

// Class probabilities of `model` on the given bags.
EvalBatch evaluate(const FocusModel& model, const std::vector<PreparedBag>& prepared,
                   const std::vector<std::size_t>& positions, const Dataset& dataset);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};
MeanStd mean_std(const std::vector<double>& values);

struct ExperimentReport {
  std::string variant;
  RunConfig config;
  std::vector<FoldResult> folds;
  std::map<std::string, MeanStd> summary;  // balanced_acc, auc, f1

  std::string to_json(int indent = 2) const;
  std::string to_csv() const;  // one row per fold plus mean and std rows
};

ExperimentReport run_experiment(const Dataset& dataset, const RunConfig& config,
                                const TrainOptions& options = {});

struct AblationTable {
  std::vector<ExperimentReport> rows;  // cumulative variant order

  std::string to_json(int indent = 2) const;
  std::string to_csv() const;  // one row per variant: mean and std per metric
  // Folds where the last row's balanced accuracy is at least every other row's.
  std::size_t folds_full_model_best() const;
};

AblationTable run_ablation(const Dataset& dataset, const RunConfig& config,
                           const TrainOptions& options = {});

// "0.819 ± 0.044" with three decimals.
std::string format_mean_std(const MeanStd& v);

}  // namespace focus
