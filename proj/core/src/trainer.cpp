#include "focus/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <unordered_map>

#include "focus/errors.hpp"
#include "focus/optim.hpp"
#include "json.hpp"

namespace focus {

using nlohmann::ordered_json;

namespace {

constexpr const char* kMetricNames[] = {"balanced_acc", "auc", "f1"};

double metric_of(const MetricSet& m, const std::string& name) {
  if (name == "balanced_acc") return m.balanced_acc;
  if (name == "auc") return m.auc;
  return m.f1;
}

bool needs_prompts(const AblationFlags& f) { return f.prompt || f.kavtc || f.crossagg; }

}  // namespace

FoldPlan plan_fold(const DatasetManifest& manifest, const RunConfig& config,
                   std::size_t fold_index) {
  const DatasetManifest fold = make_fold(manifest, fold_index, config.seed);
  const std::uint64_t fold_seed = derive_seed(config.seed, fold_index);
  std::unordered_map<std::string, std::size_t> by_path;
  for (std::size_t i = 0; i < fold.bags.size(); ++i) {
    if (!by_path.emplace(fold.bags[i].path, i).second) {
      throw ConfigError("manifest lists '" + fold.bags[i].path + "' twice");
    }
  }
  FoldPlan plan;
  plan.fold_index = fold_index;
  for (const auto& path : sample_k_shot(fold, config.k_shot, derive_seed(fold_seed, 1))) {
    plan.train.push_back(by_path.at(path));
  }
  plan.val = fold.indices(Split::Val);
  plan.test = fold.indices(Split::Test);
  return plan;
}

Matrix model_knowledge(const Dataset& dataset, const RunConfig& config) {
  if (dataset.knowledge.rows() > 0) return dataset.knowledge;
  if (needs_prompts(config.ablation)) {
    throw ConfigError("configuration needs knowledge prompts but the manifest lists none");
  }
  return Matrix(1, dataset.manifest.d);
}

std::vector<PreparedBag> prepare_dataset(const Dataset& dataset, const RunConfig& config,
                                         Execution exec) {
  const FocusModel model(config, model_knowledge(dataset, config),
                         dataset.manifest.num_classes(), std::uint64_t{0});
  std::vector<PreparedBag> out(dataset.bags.size());
  parallel_for(dataset.bags.size(), exec,
               [&](std::size_t i) { out[i] = model.prepare(dataset.bags[i]); });
  return out;
}

EvalBatch evaluate(const FocusModel& model, const std::vector<PreparedBag>& prepared,
                   const std::vector<std::size_t>& positions, const Dataset& dataset) {
  EvalBatch batch;
  batch.probs = Matrix(positions.size(), model.num_classes());
  for (std::size_t m = 0; m < positions.size(); ++m) {
    const auto probs = softmax(model.forward(prepared[positions[m]]).logits);
    std::copy(probs.begin(), probs.end(), batch.probs.row(m).begin());
    batch.labels.push_back(dataset.manifest.bags[positions[m]].label);
  }
  return batch;
}

FoldResult train_one_fold(const Dataset& dataset, const std::vector<PreparedBag>& prepared,
                          const FoldPlan& plan, const RunConfig& config,
                          const TrainOptions& options) {
  config.validate_for_dim(dataset.manifest.d);
  if (prepared.size() != dataset.bags.size()) {
    throw ShapeMismatch("prepared bag count differs from the dataset");
  }
  const std::size_t n_classes = dataset.manifest.num_classes();
  for (std::size_t c = 0; c < n_classes; ++c) {
    const bool present = std::any_of(plan.train.begin(), plan.train.end(), [&](std::size_t i) {
      return dataset.manifest.bags[i].label == static_cast<int>(c);
    });
    if (!present) throw InsufficientShots(static_cast<int>(c), 0, config.k_shot);
  }

  const std::uint64_t fold_seed = derive_seed(config.seed, plan.fold_index);
  FocusModel model(config, model_knowledge(dataset, config), n_classes,
                   derive_seed(fold_seed, 2));
  AdamW optimizer(AdamWOptions{.lr = config.lr, .weight_decay = config.weight_decay});

  TrainState state;
  state.rng = CounterRng(derive_seed(fold_seed, 3));
  state.best_params = model.params();

  FoldResult result;
  result.fold_index = plan.fold_index;
  std::vector<std::size_t> order = plan.train;
  while (state.epoch < config.max_epochs) {
    ++state.epoch;
    state.rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t pos : order) {
      const std::string where = "fold " + std::to_string(plan.fold_index) + ", epoch " +
                                std::to_string(state.epoch) + ", bag '" +
                                dataset.manifest.bags[pos].path + "'";
      double loss = 0.0;
      try {
        loss = model.loss_and_grad(prepared[pos], dataset.manifest.bags[pos].label);
      } catch (const NonFiniteLoss& e) {
        throw NonFiniteLoss(where + ": " + e.what());
      } catch (const NonFiniteValue& e) {
        throw NonFiniteLoss(where + ": " + e.what());
      }
      if (!std::isfinite(loss)) throw NonFiniteLoss(where + ": non-finite loss");
      loss_sum += loss;
      optimizer.step(model.params());
    }
    EpochLog log;
    log.epoch = state.epoch;
    log.train_loss = loss_sum / static_cast<double>(order.size());
    log.val_balanced_acc = balanced_accuracy(evaluate(model, prepared, plan.val, dataset));
    if (log.val_balanced_acc > state.best_val_metric) {
      log.improved = true;
      state.best_val_metric = log.val_balanced_acc;
      state.best_epoch = state.epoch;
      state.best_params = model.params();
      state.epochs_since_improve = 0;
    } else {
      ++state.epochs_since_improve;
    }
    result.history.push_back(log);
    if (options.on_epoch) options.on_epoch(log, model);
    if (state.epochs_since_improve >= config.patience) break;
  }

  model.params() = state.best_params;
  result.metrics = evaluate_metrics(evaluate(model, prepared, plan.test, dataset));
  result.best_val_metric = state.best_val_metric;
  result.best_epoch = state.best_epoch;
  result.epochs_run = state.epoch;
  result.best_params = std::move(state.best_params);

  std::vector<std::pair<std::string, double>> sums;
  for (std::size_t pos : plan.test) {
    const auto trace = model.forward(prepared[pos]).trace;
    for (std::size_t s = 0; s < trace.stage_records.size(); ++s) {
      const auto& rec = trace.stage_records[s];
      if (sums.size() <= s) sums.emplace_back(rec.stage_name, 0.0);
      sums[s].second += rec.ratio();
    }
  }
  for (const auto& [stage, sum] : sums) {
    result.stage_ratios.push_back({stage, sum / static_cast<double>(plan.test.size())});
  }
  return result;
}

FoldResult train_one_fold(const Dataset& dataset, const FoldPlan& plan, const RunConfig& config,
                          const TrainOptions& options) {
  return train_one_fold(dataset, prepare_dataset(dataset, config, options.exec), plan, config,
                        options);
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) return {};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

std::string format_mean_std(const MeanStd& v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f ± %.3f", v.mean, v.std);
  return buf;
}

namespace {

ExperimentReport run_with_prepared(const Dataset& dataset,
                                   const std::vector<PreparedBag>& prepared,
                                   const RunConfig& config, const TrainOptions& options) {
  ExperimentReport report;
  report.config = config;
  report.folds.resize(config.n_folds);
  parallel_for(config.n_folds, options.exec, [&](std::size_t f) {
    const FoldPlan plan = plan_fold(dataset.manifest, config, f);
    report.folds[f] = train_one_fold(dataset, prepared, plan, config, options);
  });
  for (const std::string name : kMetricNames) {
    std::vector<double> values;
    for (const auto& fold : report.folds) values.push_back(metric_of(fold.metrics, name));
    report.summary[name] = mean_std(values);
  }
  return report;
}

ordered_json report_json(const ExperimentReport& r) {
  ordered_json j;
  if (!r.variant.empty()) j["variant"] = r.variant;
  j["config"] = ordered_json::parse(r.config.to_json());
  j["folds"] = ordered_json::array();
  for (const auto& f : r.folds) {
    ordered_json fj;
    fj["fold_index"] = f.fold_index;
    fj["metrics"] = {{"balanced_acc", f.metrics.balanced_acc},
                     {"auc", f.metrics.auc},
                     {"f1", f.metrics.f1}};
    fj["best_val_balanced_acc"] = f.best_val_metric;
    fj["best_epoch"] = f.best_epoch;
    fj["epochs_run"] = f.epochs_run;
    ordered_json ratios = ordered_json::object();
    for (const auto& s : f.stage_ratios) ratios[s.stage] = s.mean_ratio;
    fj["stage_ratios"] = ratios;
    j["folds"].push_back(fj);
  }
  ordered_json summary;
  for (const std::string name : kMetricNames) {
    const auto& ms = r.summary.at(name);
    summary[name] = {{"mean", ms.mean}, {"std", ms.std}};
  }
  j["summary"] = summary;
  return j;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string ExperimentReport::to_json(int indent) const {
  return report_json(*this).dump(indent) + "\n";
}

std::string ExperimentReport::to_csv() const {
  std::ostringstream out;
  out << "fold,balanced_acc,auc,f1,best_epoch,epochs_run\n";
  for (const auto& f : folds) {
    out << f.fold_index << ',' << fixed(f.metrics.balanced_acc) << ',' << fixed(f.metrics.auc)
        << ',' << fixed(f.metrics.f1) << ',' << f.best_epoch << ',' << f.epochs_run << '\n';
  }
  for (const char* stat : {"mean", "std"}) {
    out << stat;
    for (const std::string name : kMetricNames) {
      const auto& ms = summary.at(name);
      out << ',' << fixed(std::string(stat) == "mean" ? ms.mean : ms.std);
    }
    out << ",,\n";
  }
  return out.str();
}

ExperimentReport run_experiment(const Dataset& dataset, const RunConfig& config,
                                const TrainOptions& options) {
  config.validate_for_dim(dataset.manifest.d);
  const auto prepared = prepare_dataset(dataset, config, options.exec);
  return run_with_prepared(dataset, prepared, config, options);
}

AblationTable run_ablation(const Dataset& dataset, const RunConfig& config,
                           const TrainOptions& options) {
  config.validate_for_dim(dataset.manifest.d);
  AblationTable table;
  // Stage 1 depends only on the kavtc flag; reuse its output across variants.
  std::optional<std::vector<PreparedBag>> with_stage1, without_stage1;
  for (const auto& variant : cumulative_variants()) {
    RunConfig vc = config;
    vc.ablation = variant.flags;
    auto& slot = vc.ablation.kavtc ? with_stage1 : without_stage1;
    if (!slot) slot = prepare_dataset(dataset, vc, options.exec);
    ExperimentReport row = run_with_prepared(dataset, *slot, vc, options);
    row.variant = variant.name;
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string AblationTable::to_json(int indent) const {
  ordered_json j;
  j["variants"] = ordered_json::array();
  for (const auto& r : rows) j["variants"].push_back(report_json(r));
  j["folds_full_model_best"] = folds_full_model_best();
  return j.dump(indent) + "\n";
}

std::string AblationTable::to_csv() const {
  std::ostringstream out;
  out << "variant";
  for (const std::string name : kMetricNames) out << ',' << name << "_mean," << name << "_std";
  out << '\n';
  for (const auto& r : rows) {
    out << r.variant;
    for (const std::string name : kMetricNames) {
      out << ',' << fixed(r.summary.at(name).mean) << ',' << fixed(r.summary.at(name).std);
    }
    out << '\n';
  }
  return out.str();
}

std::size_t AblationTable::folds_full_model_best() const {
  if (rows.empty()) return 0;
  const auto& full = rows.back();
  std::size_t count = 0;
  for (std::size_t f = 0; f < full.folds.size(); ++f) {
    const double mine = full.folds[f].metrics.balanced_acc;
    bool best = true;
    for (const auto& r : rows) {
      if (f < r.folds.size() && r.folds[f].metrics.balanced_acc > mine) best = false;
    }
    if (best) ++count;
  }
  return count;
}

}  // namespace focus
