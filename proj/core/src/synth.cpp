#include "focus/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "focus/dataio.hpp"
#include "focus/errors.hpp"
#include "focus/rng.hpp"
#include "json.hpp"

namespace focus {

using nlohmann::ordered_json;

std::size_t SynthSpec::signal_count() const {
  return static_cast<std::size_t>(
      std::ceil(signal_fraction * static_cast<double>(n_tokens) - 1e-9));
}

void SynthSpec::validate() const {
  if (num_classes < 2) throw ConfigError("synth: need at least two classes");
  if (bags_per_class < 1) throw ConfigError("synth: bags_per_class must be >= 1");
  if (n_tokens < 1 || d < 1) throw ConfigError("synth: n_tokens and d must be >= 1");
  if (!(signal_fraction > 0.0 && signal_fraction < 1.0)) {
    throw ConfigError("synth: signal_fraction must lie in (0, 1)");
  }
  if (signal_fraction * static_cast<double>(n_tokens) < 1.0) {
    throw ConfigError("synth: signal_fraction * n_tokens must be >= 1");
  }
  if (signal_count() > n_tokens) throw ConfigError("synth: too many signal tokens");
  if (d < num_classes) throw ConfigError("synth: d must be >= num_classes");
  if (redundancy_run_len < 1) throw ConfigError("synth: redundancy_run_len must be >= 1");
  if (background_centroids < 1) throw ConfigError("synth: background_centroids must be >= 1");
  if (noise_sigma < 0.0 || jitter < 0.0) throw ConfigError("synth: noise must be >= 0");
}

namespace {

ordered_json spec_json(const SynthSpec& s) {
  return {{"num_classes", s.num_classes},
          {"bags_per_class", s.bags_per_class},
          {"n_tokens", s.n_tokens},
          {"d", s.d},
          {"signal_fraction", s.signal_fraction},
          {"redundancy_run_len", s.redundancy_run_len},
          {"noise_sigma", s.noise_sigma},
          {"background_centroids", s.background_centroids},
          {"jitter", s.jitter},
          {"seed", s.seed}};
}

SynthSpec spec_from(const ordered_json& j) {
  if (!j.is_object()) throw ConfigError("synth spec must be a JSON object");
  SynthSpec s;
  auto as_count = [](const ordered_json& v, const std::string& key) {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ConfigError("synth key '" + key + "' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  };
  auto as_real = [](const ordered_json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError("synth key '" + key + "' must be a number");
    return v.get<double>();
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "num_classes") s.num_classes = as_count(v, key);
    else if (key == "bags_per_class") s.bags_per_class = as_count(v, key);
    else if (key == "n_tokens") s.n_tokens = as_count(v, key);
    else if (key == "d") s.d = as_count(v, key);
    else if (key == "signal_fraction") s.signal_fraction = as_real(v, key);
    else if (key == "redundancy_run_len") s.redundancy_run_len = as_count(v, key);
    else if (key == "noise_sigma") s.noise_sigma = as_real(v, key);
    else if (key == "background_centroids") s.background_centroids = as_count(v, key);
    else if (key == "jitter") s.jitter = as_real(v, key);
    else if (key == "seed") s.seed = as_count(v, key);
    else throw ConfigError("unknown synth key '" + key + "'");
  }
  return s;
}

void add_noise(std::span<double> v, double sigma, CounterRng& rng) {
  if (sigma == 0.0) return;
  const double per = sigma / std::sqrt(static_cast<double>(v.size()));
  for (auto& x : v) x += per * rng.normal();
}

Matrix orthonormal_rows(std::size_t n, std::size_t d, CounterRng& rng) {
  Matrix m(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = m.row(r);
    for (;;) {
      for (auto& x : row) x = rng.normal();
      for (std::size_t p = 0; p < r; ++p) {
        const double proj = dot(row, m.row(p));
        auto prev = m.row(p);
        for (std::size_t c = 0; c < d; ++c) row[c] -= proj * prev[c];
      }
      const double norm = l2_norm(row);
      if (norm > 1e-6) {
        for (auto& x : row) x /= norm;
        break;
      }
    }
  }
  return m;
}

Matrix unit_rows(std::size_t n, std::size_t d, CounterRng& rng) {
  Matrix m(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = m.row(r);
    double norm = 0.0;
    while (norm < 1e-6) {
      for (auto& x : row) x = rng.normal();
      norm = l2_norm(row);
    }
    for (auto& x : row) x /= norm;
  }
  return m;
}

SyntheticBag make_bag(const SynthSpec& spec, int label, std::size_t global_index,
                      const Matrix& class_centroids, const Matrix& background) {
  CounterRng rng(derive_seed(spec.seed, 1000 + global_index));
  const std::size_t n = spec.n_tokens;
  const std::size_t d = spec.d;
  const std::size_t n_signal = spec.signal_count();

  std::vector<std::size_t> positions(n);
  for (std::size_t i = 0; i < n; ++i) positions[i] = i;
  for (std::size_t i = 0; i < n_signal; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(positions[i], positions[j]);
  }
  std::vector<bool> is_signal(n, false);
  for (std::size_t i = 0; i < n_signal; ++i) is_signal[positions[i]] = true;

  SyntheticBag out;
  out.bag.features = Matrix(n, d);
  out.bag.patch_indices.resize(n);
  out.bag.label = label;
  std::vector<double> run_vec(d);
  std::size_t run_left = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out.bag.patch_indices[i] = i;
    auto row = out.bag.features.row(i);
    if (is_signal[i]) {
      auto mu = class_centroids.row(static_cast<std::size_t>(label));
      std::copy(mu.begin(), mu.end(), row.begin());
      add_noise(row, spec.noise_sigma, rng);
      out.signal_indices.push_back(i);
      continue;
    }
    if (run_left == 0) {
      auto beta = background.row(static_cast<std::size_t>(rng.below(background.rows())));
      std::copy(beta.begin(), beta.end(), run_vec.begin());
      add_noise(run_vec, spec.noise_sigma, rng);
      run_left = spec.redundancy_run_len;
    }
    std::copy(run_vec.begin(), run_vec.end(), row.begin());
    add_noise(row, spec.jitter, rng);
    --run_left;
  }
  return out;
}

}  // namespace

std::string SynthSpec::to_json(int indent) const { return spec_json(*this).dump(indent) + "\n"; }

SynthSpec SynthSpec::from_json(std::string_view text) {
  try {
    return spec_from(ordered_json::parse(text));
  } catch (const ordered_json::parse_error& e) {
    throw ConfigError(std::string("synth spec is not valid JSON: ") + e.what());
  }
}

void SynthSpec::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  std::string key(assignment.substr(0, eq));
  if (key.rfind("synth.", 0) == 0) key = key.substr(6);
  ordered_json value;
  try {
    value = ordered_json::parse(assignment.substr(eq + 1));
  } catch (const ordered_json::parse_error&) {
    value = std::string(assignment.substr(eq + 1));
  }
  ordered_json j = spec_json(*this);
  if (!j.contains(key)) throw ConfigError("unknown synth key '" + key + "'");
  j[key] = value;
  *this = spec_from(j);
}

SyntheticData generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  CounterRng rng(derive_seed(spec.seed, 0));
  SyntheticData data;
  data.class_centroids = orthonormal_rows(spec.num_classes, spec.d, rng);
  const Matrix background = unit_rows(spec.background_centroids, spec.d, rng);

  data.prompts = data.class_centroids;
  CounterRng prompt_rng(derive_seed(spec.seed, 1));
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    add_noise(data.prompts.row(c), spec.noise_sigma, prompt_rng);
  }

  data.manifest.d = spec.d;
  data.manifest.prompts = "prompts.fbag";
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    data.manifest.class_names.push_back("class_" + std::to_string(c));
  }
  std::size_t global = 0;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t b = 0; b < spec.bags_per_class; ++b, ++global) {
      SyntheticBag sb = make_bag(spec, static_cast<int>(c), global, data.class_centroids,
                                 background);
      char name[64];
      std::snprintf(name, sizeof(name), "c%02zu_b%04zu", c, b);
      sb.bag.id = std::string("bags/") + name + ".fbag";
      data.manifest.bags.push_back({sb.bag.id, static_cast<int>(c), Split::Train});
      data.bags.push_back(std::move(sb));
    }
  }
  const auto split = make_fold(data.manifest, 0, spec.seed);
  data.manifest.bags = split.bags;
  return data;
}

void write_synthetic(const SyntheticData& data, const SynthSpec& spec,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "bags");
  for (const auto& sb : data.bags) write_bag(sb.bag, dir / sb.bag.id);
  write_prompts(data.prompts, dir / "prompts.fbag");
  save_manifest(data.manifest, dir / "manifest.json");

  ordered_json signal;
  for (const auto& sb : data.bags) signal[sb.bag.id] = sb.signal_indices;
  std::ofstream(dir / "signal.json") << signal.dump(1) << "\n";
  std::ofstream(dir / "synth.json") << spec.to_json();
}

double signal_recall(const std::vector<std::uint64_t>& signal,
                     const std::vector<std::uint64_t>& retained) {
  if (signal.empty()) return 1.0;
  std::size_t hit = 0;
  for (auto s : signal) {
    if (std::binary_search(retained.begin(), retained.end(), s)) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(signal.size());
}

}  // namespace focus
