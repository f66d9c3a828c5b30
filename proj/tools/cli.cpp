#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "focus/checkpoint.hpp"
#include "focus/dataio.hpp"
#include "focus/errors.hpp"
#include "focus/gradcheck.hpp"
#include "focus/model.hpp"
#include "focus/prioritize.hpp"
#include "focus/redundancy.hpp"
#include "focus/rng.hpp"
#include "focus/seqcompress.hpp"
#include "focus/synth.hpp"
#include "focus/trainer.hpp"
#include "json.hpp"
#include "plot.hpp"

namespace focus::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Bad invocation: missing inputs, unreadable config, unknown keys.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) {
    throw UsageError(std::string(what) + " '" + path + "' does not exist");
  }
}

struct CommonArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
};

RunConfig resolve_config(const CommonArgs& a) {
  RunConfig c;
  if (!a.config.empty()) {
    require_file(a.config, "config");
    c = RunConfig::from_json(read_text(a.config));
  }
  for (const auto& o : a.overrides) c.apply_override(o);
  c.validate();
  return c;
}

Execution execution(bool parallel) { return parallel ? Execution::Parallel : Execution::Sequential; }

Dataset open_dataset(const std::string& manifest) {
  require_file(manifest, "manifest");
  return load_dataset(manifest);
}

CheckpointHeader header_for(const FocusModel& model) {
  CheckpointHeader h;
  h.d = static_cast<std::uint32_t>(model.dim());
  h.heads = static_cast<std::uint32_t>(model.config().heads);
  h.head_dim = static_cast<std::uint32_t>(model.config().head_dim(model.dim()));
  h.t1 = static_cast<std::uint32_t>(model.knowledge().rows());
  h.t2 = static_cast<std::uint32_t>(model.learnable_rows());
  h.num_classes = static_cast<std::uint32_t>(model.num_classes());
  return h;
}

std::string fold_label(std::size_t f) { return "fold " + std::to_string(f); }

void write_experiment(const ExperimentReport& report, const Dataset& ds, const fs::path& dir) {
  write_text(dir / "report.json", report.to_json());
  write_text(dir / "report.csv", report.to_csv());
  std::vector<std::string> groups;
  BarSeries bacc{"balanced_acc", {}, {}}, auc{"auc", {}, {}}, f1{"f1", {}, {}};
  for (const auto& f : report.folds) {
    groups.push_back(fold_label(f.fold_index));
    bacc.values.push_back(f.metrics.balanced_acc);
    auc.values.push_back(f.metrics.auc);
    f1.values.push_back(f.metrics.f1);
  }
  write_text(dir / "folds.svg", bar_chart_svg("Per-fold test metrics", groups, {bacc, auc, f1}));
  fs::create_directories(dir / "checkpoints");
  const Matrix knowledge = model_knowledge(ds, report.config);
  for (const auto& f : report.folds) {
    FocusModel model(report.config, knowledge, ds.manifest.num_classes(), f.best_params);
    char name[32];
    std::snprintf(name, sizeof(name), "fold_%02zu.focp", f.fold_index);
    save_checkpoint(header_for(model), model.params(), dir / "checkpoints" / name);
  }
}

int cmd_synth(const CommonArgs& a, std::ostream& out) {
  SynthSpec spec;
  if (!a.config.empty()) {
    require_file(a.config, "config");
    spec = SynthSpec::from_json(read_text(a.config));
  }
  for (const auto& o : a.overrides) spec.apply_override(o);
  spec.validate();
  const SyntheticData data = generate_synthetic(spec);
  write_synthetic(data, spec, a.out);
  out << "wrote " << data.bags.size() << " bags to " << a.out << "\n";
  return kOk;
}

int cmd_train(const CommonArgs& a, const std::string& manifest, bool parallel,
              std::ostream& out) {
  RunConfig config = resolve_config(a);
  const Dataset ds = open_dataset(manifest);
  config.validate_for_dim(ds.manifest.d);
  fs::create_directories(a.out);
  write_text(fs::path(a.out) / "config.json", config.to_json());
  TrainOptions options;
  options.exec = execution(parallel);
  const ExperimentReport report = run_experiment(ds, config, options);
  write_experiment(report, ds, a.out);
  for (const auto& [name, ms] : report.summary) {
    out << name << ": " << format_mean_std(ms) << "\n";
  }
  return kOk;
}

int cmd_ablate(const CommonArgs& a, const std::string& manifest, bool parallel,
               std::ostream& out) {
  RunConfig config = resolve_config(a);
  const Dataset ds = open_dataset(manifest);
  config.validate_for_dim(ds.manifest.d);
  fs::create_directories(a.out);
  write_text(fs::path(a.out) / "config.json", config.to_json());
  TrainOptions options;
  options.exec = execution(parallel);
  const AblationTable table = run_ablation(ds, config, options);
  write_text(fs::path(a.out) / "ablation.json", table.to_json());
  write_text(fs::path(a.out) / "ablation.csv", table.to_csv());
  std::vector<std::string> groups;
  BarSeries bacc{"balanced_acc", {}, {}}, auc{"auc", {}, {}}, f1{"f1", {}, {}};
  for (const auto& row : table.rows) {
    groups.push_back(row.variant);
    for (auto* s : {&bacc, &auc, &f1}) {
      const auto& ms = row.summary.at(s->name);
      s->values.push_back(ms.mean);
      s->errors.push_back(ms.std);
    }
    out << row.variant << "  balanced_acc " << format_mean_std(row.summary.at("balanced_acc"))
        << "  auc " << format_mean_std(row.summary.at("auc")) << "  f1 "
        << format_mean_std(row.summary.at("f1")) << "\n";
  }
  write_text(fs::path(a.out) / "ablation.svg",
             bar_chart_svg("Cumulative variants (mean and std over folds)", groups,
                           {bacc, auc, f1}));
  return kOk;
}

int cmd_eval(const CommonArgs& a, const std::string& manifest, const std::string& checkpoint,
             const std::string& split_name, std::ostream& out) {
  if (a.config.empty()) throw UsageError("eval needs --config (the run's config.json)");
  RunConfig config = resolve_config(a);
  require_file(checkpoint, "checkpoint");
  const Split split = parse_split(split_name);
  const Dataset ds = open_dataset(manifest);
  Checkpoint ck = load_checkpoint(checkpoint);
  FocusModel model(config, model_knowledge(ds, config), ds.manifest.num_classes(),
                   std::move(ck.params));
  if (!(header_for(model) == ck.header)) {
    throw ConfigError("checkpoint header does not match the configuration and manifest");
  }
  const auto positions = ds.manifest.indices(split);
  const auto prepared = prepare_dataset(ds, config);
  const MetricSet m = evaluate_metrics(evaluate(model, prepared, positions, ds));
  ordered_json j;
  j["checkpoint"] = checkpoint;
  j["split"] = to_string(split);
  j["bags"] = positions.size();
  j["metrics"] = {{"balanced_acc", m.balanced_acc}, {"auc", m.auc}, {"f1", m.f1}};
  const std::string text = j.dump(2) + "\n";
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_text(fs::path(a.out) / "config.json", config.to_json());
    write_text(fs::path(a.out) / "eval.json", text);
  }
  out << text;
  return kOk;
}

int cmd_compress(const CommonArgs& a, const std::string& bag_path, const std::string& prompts,
                 const std::string& manifest, const std::string& checkpoint, std::ostream& out) {
  RunConfig config = resolve_config(a);
  require_file(bag_path, "bag");
  Matrix knowledge;
  if (!prompts.empty()) {
    require_file(prompts, "prompts");
    knowledge = read_prompts(prompts);
  } else if (!manifest.empty()) {
    const Dataset ds = open_dataset(manifest);
    knowledge = model_knowledge(ds, config);
  } else {
    throw UsageError("compress needs --prompts or --manifest");
  }
  const FeatureBag bag = read_bag(bag_path);
  std::optional<FocusModel> model;
  if (!checkpoint.empty()) {
    require_file(checkpoint, "checkpoint");
    Checkpoint ck = load_checkpoint(checkpoint);
    model.emplace(config, knowledge, ck.header.num_classes, std::move(ck.params));
  } else {
    model.emplace(config, knowledge, knowledge.rows(), config.seed);
  }
  const CompressionTrace trace = model->forward(bag).trace;
  trace.check_subset_chain();
  if (a.out.empty()) {
    out << trace.to_json();
  } else {
    write_text(a.out, trace.to_json());
    out << "retained " << trace.final_size() << " of " << trace.input_indices.size()
        << " tokens\n";
  }
  return kOk;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, CounterRng& rng) {
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = rng.normal();
  return m;
}

template <typename Fn>
double best_seconds(std::size_t repeats, Fn&& fn) {
  double best = 1e300;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    best = std::min(best, dt.count());
  }
  return best;
}

int cmd_bench(const CommonArgs& a, const std::vector<std::size_t>& sizes, std::size_t d,
              std::size_t repeats, std::ostream& out) {
  const RunConfig config = resolve_config(a);
  std::ostringstream csv;
  csv << "stage,n,d,mode,seconds\n";
  CounterRng rng(derive_seed(config.seed, 77));
  const Matrix prompts = random_matrix(config.t2 + 5, d, rng);
  const Matrix eye = Matrix::identity(d);
  for (std::size_t n : sizes) {
    const Matrix features = random_matrix(n, d, rng);
    for (Execution exec : {Execution::Sequential, Execution::Parallel}) {
      const char* mode = exec == Execution::Sequential ? "single" : "parallel";
      const double t = best_seconds(
          repeats, [&] { (void)remove_global_redundancy_positions(features, config.w, exec); });
      csv << "redundancy," << n << ',' << d << ',' << mode << ',' << t << "\n";
    }
    const double t2 = best_seconds(repeats, [&] {
      const auto scores = score_relevance(features, prompts, eye, eye);
      (void)select_topk(scores, config.gamma, config.m_max);
    });
    csv << "prioritize," << n << ',' << d << ",single," << t2 << "\n";
    const double t3 = best_seconds(
        repeats, [&] { (void)compress_sequential_positions(features, StageSchedule{config.thresholds()}); });
    csv << "svtc," << n << ',' << d << ",single," << t3 << "\n";
  }
  if (a.out.empty()) {
    out << csv.str();
  } else {
    write_text(a.out, csv.str());
    out << csv.str();
  }
  return kOk;
}

int cmd_gradcheck(const CommonArgs& a, std::size_t tokens, std::size_t dim,
                  std::size_t classes, std::ostream& out) {
  const RunConfig config = resolve_config(a);
  CounterRng rng(derive_seed(config.seed, 99));
  FeatureBag bag;
  bag.id = "gradcheck";
  bag.features = random_matrix(tokens, dim, rng);
  for (std::size_t i = 0; i < tokens; ++i) bag.patch_indices.push_back(i);
  FocusModel model(config, random_matrix(classes, dim, rng), classes, config.seed);
  GradCheckOptions options;
  options.seed = config.seed;
  const GradCheckReport report = check_model_gradients(model, bag, 0, options);
  out << report.summary() << "\n";
  return report.passed ? kOk : kRuntimeFailure;
}

int cmd_convert(const std::string& input, const std::string& output, std::uint64_t seed,
                std::ostream& out) {
  if (!fs::is_directory(input)) throw UsageError("input directory '" + input + "' does not exist");
  const DatasetManifest m = convert_raw_directory(input, output, seed);
  out << "converted " << m.bags.size() << " slides into " << output << "\n";
  return kOk;
}

void structured_error(std::ostream& err, const char* kind, const std::string& message) {
  ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  err << j.dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot MIL with visual token compression over patch-feature bags", "focus"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string manifest, checkpoint, split = "test", bag, prompts, input;
  bool parallel = false;
  std::vector<std::size_t> sizes{10000, 50000, 100000};
  std::size_t bench_dim = 512, repeats = 3, gc_tokens = 8, gc_dim = 16, gc_classes = 3;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub, bool out_required) {
    sub->add_option("--config", common.config, "JSON configuration file");
    sub->add_option("--set", common.overrides, "Override, dotted.key=value (repeatable)");
    auto* o = sub->add_option("--out", common.out, "Output path");
    if (out_required) o->required();
  };

  auto* synth = app.add_subcommand("synth", "Write a planted-signal synthetic dataset");
  add_common(synth, true);
  auto* train = app.add_subcommand("train", "K-shot training over resampled folds");
  add_common(train, true);
  train->add_option("--manifest", manifest, "Dataset manifest")->required();
  train->add_flag("--parallel", parallel, "Run folds on worker threads");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on one manifest split");
  add_common(eval, false);
  eval->add_option("--manifest", manifest, "Dataset manifest")->required();
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--split", split, "train, val or test");
  auto* compress = app.add_subcommand("compress", "Write the compression trace of one bag");
  add_common(compress, false);
  compress->add_option("--bag", bag, "Feature file")->required();
  compress->add_option("--prompts", prompts, "Knowledge prompt file");
  compress->add_option("--manifest", manifest, "Manifest whose prompts to use");
  compress->add_option("--checkpoint", checkpoint, "Trained parameters");
  auto* ablate = app.add_subcommand("ablate", "Run the cumulative ablation variants");
  add_common(ablate, true);
  ablate->add_option("--manifest", manifest, "Dataset manifest")->required();
  ablate->add_flag("--parallel", parallel, "Run folds on worker threads");
  auto* bench = app.add_subcommand("bench", "Time the compression stages");
  add_common(bench, false);
  bench->add_option("--sizes", sizes, "Bag sizes")->delimiter(',');
  bench->add_option("--dim", bench_dim, "Feature width");
  bench->add_option("--repeats", repeats, "Timing repeats (best is kept)");
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  add_common(gradcheck, false);
  gradcheck->add_option("--tokens", gc_tokens, "Tokens in the random bag");
  gradcheck->add_option("--dim", gc_dim, "Feature width");
  gradcheck->add_option("--classes", gc_classes, "Number of classes");
  auto* convert = app.add_subcommand("convert", "Import raw per-slide matrices");
  convert->add_option("--input", input, "Directory holding labels.json")->required();
  convert->add_option("--out", common.out, "Output directory")->required();
  convert->add_option("--seed", seed, "Split seed");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    structured_error(err, "usage", e.what());
    return kUsageError;
  }

  try {
    if (*synth) return cmd_synth(common, out);
    if (*train) return cmd_train(common, manifest, parallel, out);
    if (*eval) return cmd_eval(common, manifest, checkpoint, split, out);
    if (*compress) return cmd_compress(common, bag, prompts, manifest, checkpoint, out);
    if (*ablate) return cmd_ablate(common, manifest, parallel, out);
    if (*bench) return cmd_bench(common, sizes, bench_dim, repeats, out);
    if (*gradcheck) return cmd_gradcheck(common, gc_tokens, gc_dim, gc_classes, out);
    if (*convert) return cmd_convert(input, common.out, seed, out);
  } catch (const UsageError& e) {
    structured_error(err, "usage", e.what());
    return kUsageError;
  } catch (const ConfigError& e) {
    structured_error(err, "config", e.what());
    return kUsageError;
  } catch (const Error& e) {
    structured_error(err, "runtime", e.what());
    return kRuntimeFailure;
  } catch (const std::exception& e) {
    structured_error(err, "runtime", e.what());
    return kRuntimeFailure;
  }
  return kUsageError;
}

}  // namespace focus::cli
