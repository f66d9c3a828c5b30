#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fixtures.hpp"
#include "focus/errors.hpp"
#include "focus/trainer.hpp"

using namespace focus;

namespace {

SynthSpec small_spec(std::size_t classes = 3) {
  SynthSpec s;
  s.num_classes = classes;
  s.bags_per_class = 10;
  s.n_tokens = 192;
  s.d = 16;
  s.signal_fraction = 0.1;
  return s;
}

RunConfig small_config() {
  RunConfig c;
  c.heads = 2;
  c.w = 16;
  c.t2 = 2;
  c.n_folds = 2;
  c.max_epochs = 6;
  c.patience = 3;
  c.lr = 1e-3;
  return c;
}

}  // namespace

TEST(Trainer, FoldPlanShapes) {
  const Dataset ds = fixtures::synthetic_dataset(small_spec());
  RunConfig c = small_config();
  c.k_shot = 4;
  const FoldPlan plan = plan_fold(ds.manifest, c, 1);
  EXPECT_EQ(plan.train.size(), 12u);
  EXPECT_EQ(plan.val.size(), 6u);
  EXPECT_EQ(plan.test.size(), 6u);
  std::set<std::size_t> all(plan.train.begin(), plan.train.end());
  all.insert(plan.val.begin(), plan.val.end());
  all.insert(plan.test.begin(), plan.test.end());
  EXPECT_EQ(all.size(), 24u);
  const FoldPlan again = plan_fold(ds.manifest, c, 1);
  EXPECT_EQ(plan.train, again.train);
  EXPECT_NE(plan.test, plan_fold(ds.manifest, c, 2).test);
}

TEST(Trainer, PatienceOneWithoutImprovementRunsTwoEpochs) {
  const Dataset ds = fixtures::synthetic_dataset(small_spec());
  RunConfig c = small_config();
  c.patience = 1;
  c.max_epochs = 80;
  c.lr = 1e-15;  // predictions never change, so validation never improves
  const FoldResult r = train_one_fold(ds, plan_fold(ds.manifest, c, 0), c);
  EXPECT_EQ(r.epochs_run, 2u);
  EXPECT_EQ(r.best_epoch, 1u);
}

TEST(Trainer, SeparableTwoClassTask) {
  SynthSpec s = small_spec(2);
  s.bags_per_class = 20;
  s.signal_fraction = 0.25;
  const Dataset ds = fixtures::synthetic_dataset(s);
  RunConfig c;
  c.heads = 2;
  c.w = 16;
  c.k_shot = 4;
  c.lr = 1e-3;
  for (std::size_t fold = 0; fold < 3; ++fold) {
    const FoldResult r = train_one_fold(ds, plan_fold(ds.manifest, c, fold), c);
    EXPECT_GE(r.metrics.balanced_acc, 0.95) << "fold " << fold;
  }
}

TEST(Trainer, ReportsBestCheckpointNotLastEpoch) {
  const Dataset ds = fixtures::synthetic_dataset(small_spec());
  RunConfig c = small_config();
  c.max_epochs = 12;
  c.patience = 12;
  const FoldPlan plan = plan_fold(ds.manifest, c, 0);
  ParamStore last;
  TrainOptions opts;
  opts.on_epoch = [&](const EpochLog&, const FocusModel& m) { last = m.params(); };
  const FoldResult r = train_one_fold(ds, plan, c, opts);

  double best = -1;
  std::size_t best_epoch = 0;
  for (const auto& log : r.history) {
    if (log.val_balanced_acc > best) {
      best = log.val_balanced_acc;
      best_epoch = log.epoch;
    }
  }
  EXPECT_EQ(r.best_epoch, best_epoch);
  EXPECT_DOUBLE_EQ(r.best_val_metric, best);

  const auto prepared = prepare_dataset(ds, c);
  const FocusModel best_model(c, ds.knowledge, 3, r.best_params);
  const MetricSet m = evaluate_metrics(evaluate(best_model, prepared, plan.test, ds));
  EXPECT_EQ(m.balanced_acc, r.metrics.balanced_acc);
  EXPECT_EQ(m.auc, r.metrics.auc);
  if (r.best_epoch < r.epochs_run) {
    bool differs = false;
    for (const auto& name : last.names())
      differs |= !(last.value(name) == r.best_params.value(name));
    EXPECT_TRUE(differs);
  }
}

TEST(Trainer, NeverMutatesTheDataset) {
  const Dataset ds = fixtures::synthetic_dataset(small_spec());
  const Dataset copy = ds;
  RunConfig c = small_config();
  c.max_epochs = 2;
  (void)train_one_fold(ds, plan_fold(ds.manifest, c, 0), c);
  for (std::size_t i = 0; i < ds.bags.size(); ++i) {
    EXPECT_EQ(ds.bags[i].features, copy.bags[i].features);
    EXPECT_EQ(ds.bags[i].patch_indices, copy.bags[i].patch_indices);
  }
}

TEST(Trainer, DivergenceRaisesNonFiniteLoss) {
  const Dataset ds = fixtures::synthetic_dataset(small_spec());
  RunConfig c = small_config();
  c.lr = 1e300;
  c.weight_decay = 0.0;
  EXPECT_THROW(train_one_fold(ds, plan_fold(ds.manifest, c, 0), c), NonFiniteLoss);
}

TEST(Trainer, MissingPromptsRejectedUnlessBaseMil) {
  Dataset ds = fixtures::synthetic_dataset(small_spec());
  ds.knowledge = Matrix();
  RunConfig c = small_config();
  EXPECT_THROW(model_knowledge(ds, c), ConfigError);
  c.ablation = cumulative_variants()[0].flags;
  EXPECT_EQ(model_knowledge(ds, c).rows(), 1u);
}

TEST(Experiment, SingleFoldHasZeroStd) {
  const Dataset ds = fixtures::synthetic_dataset(small_spec());
  RunConfig c = small_config();
  c.n_folds = 1;
  c.max_epochs = 2;
  const auto report = run_experiment(ds, c);
  ASSERT_EQ(report.folds.size(), 1u);
  for (const auto& [name, ms] : report.summary) EXPECT_EQ(ms.std, 0.0) << name;
}

TEST(Experiment, DeterministicReportsAndParallelFolds) {
  const Dataset ds = fixtures::synthetic_dataset(small_spec());
  RunConfig c = small_config();
  c.max_epochs = 3;
  const std::string a = run_experiment(ds, c).to_json();
  EXPECT_EQ(a, run_experiment(ds, c).to_json());
  TrainOptions par;
  par.exec = Execution::Parallel;
  EXPECT_EQ(a, run_experiment(ds, c, par).to_json());
}

TEST(Experiment, MetricsBoundedAndCsvShape) {
  const Dataset ds = fixtures::synthetic_dataset(small_spec());
  RunConfig c = small_config();
  c.max_epochs = 2;
  const auto report = run_experiment(ds, c);
  for (const auto& f : report.folds) {
    for (double v : {f.metrics.balanced_acc, f.metrics.auc, f.metrics.f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  const std::string csv = report.to_csv();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 + 2);
}

TEST(Ablation, FiveRowsInCumulativeOrder) {
  const Dataset ds = fixtures::synthetic_dataset(small_spec());
  RunConfig c = small_config();
  c.max_epochs = 2;
  const auto table = run_ablation(ds, c);
  ASSERT_EQ(table.rows.size(), 5u);
  const auto variants = cumulative_variants();
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(table.rows[i].variant, variants[i].name);
    EXPECT_EQ(table.rows[i].config.ablation, variants[i].flags);
  }
  EXPECT_LE(table.folds_full_model_best(), 2u);
  const std::string csv = table.to_csv();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
}

TEST(Summary, PopulationStdAndFormatting) {
  const MeanStd ms = mean_std({1.0, 3.0});
  EXPECT_DOUBLE_EQ(ms.mean, 2.0);
  EXPECT_DOUBLE_EQ(ms.std, 1.0);
  EXPECT_EQ(format_mean_std({0.8191, 0.0444}), "0.819 ± 0.044");
}
