#include "focus/config.hpp"

#include <cmath>

#include "focus/errors.hpp"
#include "json.hpp"

namespace focus {

using nlohmann::ordered_json;

std::vector<AblationVariant> cumulative_variants() {
  return {
      {"BaseMIL", {false, false, false, false}},
      {"+Prompt", {true, false, false, false}},
      {"+KAVTC", {true, true, false, false}},
      {"+SVTC", {true, true, true, false}},
      {"+CrossAgg", {true, true, true, true}},
  };
}

void RunConfig::validate() const {
  if (w < 2) throw ConfigError("w must be >= 2");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  if (m_max < 1) throw ConfigError("m_max must be >= 1");
  if (n_stages < 1) throw ConfigError("n_stages must be >= 1");
  if (!(theta_base > 0.0)) throw ConfigError("theta_base must be > 0");
  if (n_stages > 1 && !(delta_theta > 0.0)) {
    throw ConfigError("delta_theta must be > 0 so thresholds strictly increase");
  }
  if (theta_base + static_cast<double>(n_stages) * delta_theta > 1.0 + 1e-12) {
    throw ConfigError("theta_base + n_stages * delta_theta must be <= 1");
  }
  if (heads < 1) throw ConfigError("heads must be >= 1");
  if (k_shot < 1) throw ConfigError("k_shot must be >= 1");
  if (n_folds < 1) throw ConfigError("n_folds must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
}

void RunConfig::validate_for_dim(std::size_t d) const {
  validate();
  if (d == 0 || d % heads != 0) {
    throw ConfigError("feature width " + std::to_string(d) + " is not divisible by heads=" +
                      std::to_string(heads));
  }
}

std::vector<double> RunConfig::thresholds() const {
  std::vector<double> t(n_stages);
  for (std::size_t i = 0; i < n_stages; ++i) {
    t[i] = theta_base + static_cast<double>(i) * delta_theta;
  }
  return t;
}

namespace {

ordered_json to_ordered(const RunConfig& c) {
  ordered_json j;
  j["w"] = c.w;
  j["gamma"] = c.gamma;
  j["m_max"] = c.m_max;
  j["theta_base"] = c.theta_base;
  j["delta_theta"] = c.delta_theta;
  j["n_stages"] = c.n_stages;
  j["heads"] = c.heads;
  j["t2"] = c.t2;
  j["k_shot"] = c.k_shot;
  j["n_folds"] = c.n_folds;
  j["lr"] = c.lr;
  j["weight_decay"] = c.weight_decay;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["seed"] = c.seed;
  j["ablation"] = {{"prompt", c.ablation.prompt},
                   {"kavtc", c.ablation.kavtc},
                   {"svtc", c.ablation.svtc},
                   {"crossagg", c.ablation.crossagg}};
  return j;
}

template <typename T>
void read_field(const ordered_json& j, const std::string& path, T& out) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!j.is_number_integer() || (j.is_number_integer() && j.get<long long>() < 0)) {
        throw ConfigError("");
      }
    } else {
      if (!j.is_number()) throw ConfigError("");
    }
    out = j.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config key '" + path + "' has an invalid value: " + j.dump());
  }
}

RunConfig from_ordered(const ordered_json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "w") read_field(value, key, c.w);
    else if (key == "gamma") read_field(value, key, c.gamma);
    else if (key == "m_max") read_field(value, key, c.m_max);
    else if (key == "theta_base") read_field(value, key, c.theta_base);
    else if (key == "delta_theta") read_field(value, key, c.delta_theta);
    else if (key == "n_stages") read_field(value, key, c.n_stages);
    else if (key == "heads") read_field(value, key, c.heads);
    else if (key == "t2") read_field(value, key, c.t2);
    else if (key == "k_shot") read_field(value, key, c.k_shot);
    else if (key == "n_folds") read_field(value, key, c.n_folds);
    else if (key == "lr") read_field(value, key, c.lr);
    else if (key == "weight_decay") read_field(value, key, c.weight_decay);
    else if (key == "max_epochs") read_field(value, key, c.max_epochs);
    else if (key == "patience") read_field(value, key, c.patience);
    else if (key == "seed") read_field(value, key, c.seed);
    else if (key == "ablation") {
      if (!value.is_object()) throw ConfigError("config key 'ablation' must be an object");
      for (const auto& [flag, v] : value.items()) {
        const std::string path = "ablation." + flag;
        if (flag == "prompt") read_field(v, path, c.ablation.prompt);
        else if (flag == "kavtc") read_field(v, path, c.ablation.kavtc);
        else if (flag == "svtc") read_field(v, path, c.ablation.svtc);
        else if (flag == "crossagg") read_field(v, path, c.ablation.crossagg);
        else throw ConfigError("unknown config key '" + path + "'");
      }
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  return c;
}

}  // namespace

std::string RunConfig::to_json(int indent) const { return to_ordered(*this).dump(indent) + "\n"; }

RunConfig RunConfig::from_json(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return from_ordered(j);
}

void RunConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));

  ordered_json value;
  try {
    value = ordered_json::parse(raw);
  } catch (const ordered_json::parse_error&) {
    value = raw;
  }

  ordered_json j = to_ordered(*this);
  ordered_json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (!node->is_object() || !node->contains(part)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw ConfigError("config key '" + key + "' is a section");
  *node = value;
  *this = from_ordered(j);
}

}  // namespace focus
