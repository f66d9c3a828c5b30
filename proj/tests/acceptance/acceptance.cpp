// Acceptance suite: one PASS/FAIL line per criterion. Optional arguments pick
// a subset of criteria by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "fixtures.hpp"
#include "focus/config.hpp"
#include "focus/metrics.hpp"
#include "focus/model.hpp"
#include "focus/numerics.hpp"
#include "focus/prioritize.hpp"
#include "focus/redundancy.hpp"
#include "focus/seqcompress.hpp"
#include "focus/synth.hpp"
#include "focus/trainer.hpp"
#include "oracles.hpp"

using namespace focus;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

template <typename Fn>
double seconds(Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::size_t pick(CounterRng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

// 1. Each stage against its brute-force reference on random instances.
Outcome oracle_equivalence() {
  constexpr std::size_t kInstances = 60;
  std::size_t exact = 0;
  for (std::size_t s = 0; s < kInstances; ++s) {
    CounterRng rng(derive_seed(101, s));
    const std::size_t d = pick(rng, 2, 16);
    const FeatureBag bag = s % 2 == 0 ? oracle::clustered_bag(pick(rng, 2, 256), d, rng)
                                      : FeatureBag{"", oracle::gaussian(pick(rng, 2, 256), d, rng),
                                                   {}, std::nullopt};
    const Matrix& x = bag.features;
    const std::size_t w = pick(rng, 2, 40);
    const bool s1 = remove_global_redundancy_positions(x, w).kept_positions ==
                    oracle::redundancy(x, w);

    const Matrix prompts = oracle::gaussian(pick(rng, 1, 8), d, rng);
    const Matrix wq = oracle::gaussian(d, d, rng);
    const Matrix wk = oracle::gaussian(d, d, rng);
    const double gamma = 0.05 + 0.9 * rng.uniform();
    const std::size_t m_max = pick(rng, 1, 300);
    const bool s2 = select_topk(score_relevance(x, prompts, wq, wk), gamma, m_max)
                        .selected_positions ==
                    oracle::topk(oracle::relevance(x, prompts, wq, wk), gamma, m_max);

    const auto schedule = StageSchedule::linear(0.3 + 0.5 * rng.uniform(), 0.05, pick(rng, 1, 4));
    const bool s3 = compress_sequential_positions(x, schedule) ==
                    oracle::sequential(x, schedule.thresholds);
    exact += (s1 && s2 && s3) ? 1 : 0;
  }
  return {exact == kInstances, std::to_string(exact) + "/" + std::to_string(kInstances) +
                                   " instances exact on all three stages"};
}

// 2. Finite differences through every variant of the full pipeline.
Outcome gradient_integrity() {
  std::size_t passed = 0;
  double worst = 0.0;
  const auto variants = cumulative_variants();
  for (std::size_t v = 0; v < variants.size(); ++v) {
    CounterRng rng(derive_seed(202, v));
    RunConfig c;
    c.heads = 2;
    c.w = 4;
    c.gamma = 0.75;
    c.ablation = variants[v].flags;
    FocusModel model(c, oracle::gaussian(3, 8, rng), 3, derive_seed(203, v));
    FeatureBag bag;
    bag.features = oracle::gaussian(8, 8, rng);
    for (std::size_t i = 0; i < 8; ++i) bag.patch_indices.push_back(i);
    GradCheckOptions opts;
    opts.tolerance = 1e-4;
    opts.max_coords_per_tensor = 1u << 20;
    const GradCheckReport r = check_model_gradients(model, bag, static_cast<int>(v % 3), opts);
    worst = std::max(worst, r.max_error);
    passed += r.passed ? 1 : 0;
  }
  return {passed == variants.size(), std::to_string(passed) + "/" +
                                         std::to_string(variants.size()) +
                                         " variants, max relative error " + fmt("%.2e", worst)};
}

// 3. Stated invariants, each over 20 seeds.
Outcome invariant_suite() {
  constexpr std::uint64_t kSeeds = 20;
  std::vector<std::pair<std::string, std::function<bool(CounterRng&)>>> checks;

  checks.emplace_back("subset chain + length monotonicity", [](CounterRng& rng) {
    const FeatureBag bag = oracle::clustered_bag(pick(rng, 40, 256), 16, rng);
    RunConfig c;
    c.heads = 2;
    c.w = pick(rng, 2, 32);
    const FocusModel model(c, oracle::gaussian(3, 16, rng), 3, rng.next_u64());
    const auto trace = model.forward(bag).trace;
    trace.check_subset_chain();
    std::size_t prev = bag.size();
    for (const auto& r : trace.stage_records) {
      if (r.input_size != prev || r.retained_original_indices.size() > prev) return false;
      prev = r.retained_original_indices.size();
    }
    return prev >= 1;
  });
  checks.emplace_back("threshold monotonicity", [](CounterRng& rng) {
    const FeatureBag bag = oracle::clustered_bag(pick(rng, 10, 200), 8, rng);
    const double lo = 0.2 + 0.6 * rng.uniform();
    const auto a = compress_stage_positions(bag.features, lo);
    const auto b = compress_stage_positions(bag.features, lo + 0.15 * rng.uniform());
    if (a.kept_positions.size() > b.kept_positions.size()) return false;
    return a.guard_fired || std::includes(b.kept_positions.begin(), b.kept_positions.end(),
                                          a.kept_positions.begin(), a.kept_positions.end());
  });
  checks.emplace_back("softmax normalization", [](CounterRng& rng) {
    const std::size_t d = pick(rng, 2, 16);
    const auto s = score_relevance(oracle::gaussian(pick(rng, 1, 200), d, rng),
                                   oracle::gaussian(pick(rng, 1, 8), d, rng),
                                   oracle::gaussian(d, d, rng), oracle::gaussian(d, d, rng));
    for (std::size_t r = 0; r < s.attention.rows(); ++r) {
      const auto row = s.attention.row(r);
      if (std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) > 1e-12) return false;
    }
    return std::abs(std::accumulate(s.relevance.begin(), s.relevance.end(), 0.0) - 1.0) < 1e-12;
  });
  checks.emplace_back("scale invariance", [](CounterRng& rng) {
    const FeatureBag bag = oracle::clustered_bag(pick(rng, 20, 200), 10, rng);
    Matrix scaled = bag.features;
    for (std::size_t r = 0; r < scaled.rows(); ++r) {
      const double f = std::ldexp(1.0, static_cast<int>(rng.below(21)) - 10);
      for (auto& x : scaled.row(r)) x *= f;
    }
    const std::size_t w = pick(rng, 2, 32);
    const auto schedule = StageSchedule::linear(0.7, 0.05, 3);
    return remove_global_redundancy_positions(bag.features, w).kept_positions ==
               remove_global_redundancy_positions(scaled, w).kept_positions &&
           compress_sequential_positions(bag.features, schedule) ==
               compress_sequential_positions(scaled, schedule);
  });
  checks.emplace_back("argmax/shift invariance", [](CounterRng& rng) {
    const Matrix z = oracle::gaussian(1, pick(rng, 2, 10), rng);
    Matrix shifted = z;
    const double c = 50.0 * rng.normal();
    for (auto& x : shifted.values()) x += c;
    const Matrix p = row_softmax(z), q = row_softmax(shifted);
    for (std::size_t j = 0; j < p.cols(); ++j)
      if (std::abs(p(0, j) - q(0, j)) > 1e-12) return false;
    return argmax(z.row(0)) == argmax(shifted.row(0));
  });
  checks.emplace_back("metric bounds", [](CounterRng& rng) {
    const std::size_t s = pick(rng, 2, 6);
    EvalBatch b;
    b.probs = row_softmax(oracle::gaussian(s * pick(rng, 2, 10), s, rng));
    for (std::size_t i = 0; i < b.probs.rows(); ++i) b.labels.push_back(static_cast<int>(i % s));
    const MetricSet m = evaluate_metrics(b);
    for (double v : {m.balanced_acc, m.auc, m.f1})
      if (!(v >= 0.0 && v <= 1.0)) return false;
    return true;
  });
  checks.emplace_back("AUC monotone-transform invariance", [](CounterRng& rng) {
    const std::size_t n = pick(rng, 4, 80);
    std::vector<double> a(n), b(n);
    std::vector<bool> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = std::round(4.0 * rng.normal()) / 4.0;
      b[i] = 3.0 * std::exp(a[i]) + 1.0;
      pos[i] = i % 2 == 0;
    }
    return binary_auc(a, pos) == binary_auc(b, pos);
  });

  std::size_t failed = 0;
  std::string names;
  for (const auto& [name, check] : checks) {
    std::size_t ok = 0;
    for (std::uint64_t s = 0; s < kSeeds; ++s) {
      CounterRng rng(derive_seed(303, s * 97 + name.size()));
      try {
        ok += check(rng) ? 1 : 0;
      } catch (const std::exception&) {
      }
    }
    if (ok != kSeeds) {
      ++failed;
      names += " " + name;
    }
  }
  return {failed == 0, std::to_string(checks.size() - failed) + "/" +
                           std::to_string(checks.size()) + " invariants held over " +
                           std::to_string(kSeeds) + " seeds" +
                           (failed ? "; failing:" + names : std::string())};
}

// 4 and 5 share one ablation run on the default synthetic task.
struct AblationCache {
  bool done = false;
  AblationTable table;
  double seconds = 0.0;
};

const AblationTable& default_ablation(AblationCache& cache) {
  if (!cache.done) {
    const Dataset ds = fixtures::synthetic_dataset(SynthSpec{});
    RunConfig c;  // K = 4, 10 folds
    cache.seconds = seconds([&] { cache.table = run_ablation(ds, c); });
    cache.done = true;
  }
  return cache.table;
}

Outcome fewshot_efficacy(AblationCache& cache) {
  const auto& t = default_ablation(cache);
  const MeanStd base = t.rows.front().summary.at("balanced_acc");
  const MeanStd full = t.rows.back().summary.at("balanced_acc");
  const bool pass = full.mean > base.mean && full.mean >= 0.2 + 0.4;
  return {pass, "full " + format_mean_std(full) + " vs BaseMIL " + format_mean_std(base) +
                    " balanced acc over 10 folds (ablation " + fmt("%.0f", cache.seconds) + " s)"};
}

Outcome ablation_trend(AblationCache& cache) {
  const auto& t = default_ablation(cache);
  const std::size_t best = t.folds_full_model_best();
  std::string rows;
  for (const auto& r : t.rows)
    rows += " " + r.variant + "=" + fmt("%.3f", r.summary.at("balanced_acc").mean);
  return {best >= 8, "full model best or tied in " + std::to_string(best) + "/10 folds;" + rows};
}

// 6. Noise-free bags at default settings.
Outcome compression_behavior() {
  SynthSpec spec;
  spec.noise_sigma = 0.0;
  const SyntheticData data = generate_synthetic(spec);
  const RunConfig c;
  const FocusModel model(c, data.prompts, spec.num_classes, derive_seed(c.seed, 2));
  double worst_ratio = 0.0, worst_recall = 1.0;
  for (const auto& sb : data.bags) {
    const auto trace = model.forward(sb.bag).trace;
    worst_ratio = std::max(worst_ratio, trace.overall_ratio());
    worst_recall = std::min(
        worst_recall,
        signal_recall(sb.signal_indices, trace.stage_records.back().retained_original_indices));
  }
  return {worst_ratio <= c.gamma && worst_recall >= 0.9,
          std::to_string(data.bags.size()) + " bags: worst ratio " + fmt("%.3f", worst_ratio) +
              " (bound " + fmt("%.2f", c.gamma) + "), worst signal recall " +
              fmt("%.3f", worst_recall)};
}

// 7. Two CLI train runs, compared byte for byte.
Outcome determinism() {
  fixtures::TempDir dir("acceptance_det");
  std::ostringstream out, err;
  const std::string data = (dir.path() / "data").string();
  if (cli::run({"focus", "synth", "--out", data}, out, err) != 0) return {false, err.str()};
  std::string reports[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path run = dir.path() / ("run" + std::to_string(i));
    if (cli::run({"focus", "train", "--manifest", data + "/manifest.json", "--out", run.string(),
                  "--set", "n_folds=2"},
                 out, err) != 0)
      return {false, err.str()};
    std::ifstream in(run / "report.json", std::ios::binary);
    reports[i].assign(std::istreambuf_iterator<char>(in), {});
  }
  const bool same = !reports[0].empty() && reports[0] == reports[1];
  return {same, std::string(same ? "identical" : "different") + " report.json (" +
                    std::to_string(reports[0].size()) + " bytes)"};
}

// 8. Stage-1 timing on a 100k x 512 bag, best of three.
Outcome performance() {
  constexpr double kBoundSeconds = 5.0;
  CounterRng rng(808);
  const Matrix x = oracle::gaussian(100000, 512, rng);
  const RunConfig c;
  double single = 1e300, parallel = 1e300;
  for (int r = 0; r < 3; ++r) {
    single = std::min(single, seconds([&] {
      (void)remove_global_redundancy_positions(x, c.w, Execution::Sequential);
    }));
    parallel = std::min(parallel, seconds([&] {
      (void)remove_global_redundancy_positions(x, c.w, Execution::Parallel);
    }));
  }
  return {single < kBoundSeconds && parallel <= single * 1.05,
          "single " + fmt("%.2f", single) + " s (bound " + fmt("%.0f", kBoundSeconds) +
              " s), parallel " + fmt("%.2f", parallel) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  AblationCache cache;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle equivalence", oracle_equivalence},
      {"gradient integrity", gradient_integrity},
      {"invariant suite", invariant_suite},
      {"synthetic few-shot efficacy", [&] { return fewshot_efficacy(cache); }},
      {"ablation trend", [&] { return ablation_trend(cache); }},
      {"compression behavior", compression_behavior},
      {"determinism", determinism},
      {"stage-1 performance", performance},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    const double t = seconds([&] {
      try {
        o = criteria[i].second();
      } catch (const std::exception& e) {
        o = {false, std::string("error: ") + e.what()};
      }
    });
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first
              << "): " << o.detail << " [" << fmt("%.1f", t) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
