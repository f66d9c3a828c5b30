#include "focus/manifest.hpp"

#include <fstream>
#include <sstream>

#include "focus/errors.hpp"
#include "focus/rng.hpp"
#include "json.hpp"

namespace focus {

using nlohmann::ordered_json;

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ConfigError("unknown split '" + s + "'");
}

void DatasetManifest::validate() const {
  if (class_names.size() < 2) throw ConfigError("manifest needs at least two classes");
  if (d == 0) throw ConfigError("manifest feature width d must be > 0");
  std::vector<bool> in_train(class_names.size(), false);
  for (const auto& b : bags) {
    if (b.label < 0 || static_cast<std::size_t>(b.label) >= class_names.size()) {
      throw LabelOutOfRange(b.label, static_cast<int>(class_names.size()));
    }
    if (b.split == Split::Train) in_train[static_cast<std::size_t>(b.label)] = true;
  }
  for (std::size_t c = 0; c < in_train.size(); ++c) {
    if (!in_train[c]) {
      throw ConfigError("class '" + class_names[c] + "' has no train bags");
    }
  }
}

std::vector<std::size_t> DatasetManifest::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    if (bags[i].split == s) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> DatasetManifest::indices(Split s, int label) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    if (bags[i].split == s && bags[i].label == label) out.push_back(i);
  }
  return out;
}

std::string DatasetManifest::to_json(int indent) const {
  ordered_json j;
  j["d"] = d;
  j["classes"] = class_names;
  if (prompts) j["prompts"] = *prompts;
  auto arr = ordered_json::array();
  for (const auto& b : bags) {
    arr.push_back({{"path", b.path}, {"label", b.label}, {"split", to_string(b.split)}});
  }
  j["bags"] = std::move(arr);
  return j.dump(indent) + "\n";
}

DatasetManifest DatasetManifest::from_json(const std::string& text,
                                           const std::filesystem::path& base_dir) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw ConfigError(std::string("manifest is not valid JSON: ") + e.what());
  }
  DatasetManifest m;
  m.base_dir = base_dir;
  try {
    m.d = j.at("d").get<std::size_t>();
    m.class_names = j.at("classes").get<std::vector<std::string>>();
    if (j.contains("prompts")) m.prompts = j.at("prompts").get<std::string>();
    for (const auto& b : j.at("bags")) {
      BagEntry e;
      e.path = b.at("path").get<std::string>();
      e.label = b.at("label").get<int>();
      e.split = b.contains("split") ? parse_split(b.at("split").get<std::string>()) : Split::Train;
      m.bags.push_back(std::move(e));
    }
  } catch (const ordered_json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  for (const auto& b : m.bags) {
    if (b.label < 0 || static_cast<std::size_t>(b.label) >= m.class_names.size()) {
      throw LabelOutOfRange(b.label, static_cast<int>(m.class_names.size()));
    }
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return DatasetManifest::from_json(ss.str(), path.parent_path());
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
  out << manifest.to_json();
}

std::vector<std::string> sample_k_shot(const DatasetManifest& manifest, std::size_t k,
                                       std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(k * manifest.num_classes());
  for (std::size_t c = 0; c < manifest.num_classes(); ++c) {
    auto pool = manifest.indices(Split::Train, static_cast<int>(c));
    if (pool.size() < k) throw InsufficientShots(static_cast<int>(c), pool.size(), k);
    CounterRng rng(derive_seed(seed, c));
    rng.shuffle(pool);
    for (std::size_t i = 0; i < k; ++i) ids.push_back(manifest.bags[pool[i]].path);
  }
  return ids;
}

DatasetManifest make_fold(const DatasetManifest& manifest, std::size_t fold_index,
                          std::uint64_t master_seed) {
  const std::uint64_t fold_seed = derive_seed(master_seed, fold_index);
  DatasetManifest out = manifest;
  for (std::size_t c = 0; c < manifest.num_classes(); ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < manifest.bags.size(); ++i) {
      if (manifest.bags[i].label == static_cast<int>(c)) members.push_back(i);
    }
    if (members.empty()) {
      throw ConfigError("class '" + manifest.class_names[c] + "' has no bags");
    }
    CounterRng rng(derive_seed(fold_seed, c));
    rng.shuffle(members);
    const std::size_t n_holdout = members.size() / 5;
    for (std::size_t r = 0; r < members.size(); ++r) {
      Split s = Split::Train;
      if (r < n_holdout) s = Split::Val;
      else if (r < 2 * n_holdout) s = Split::Test;
      out.bags[members[r]].split = s;
    }
  }
  return out;
}

std::vector<DatasetManifest> make_folds(const DatasetManifest& manifest, std::size_t n_folds,
                                        std::uint64_t master_seed) {
  if (n_folds < 2) throw ConfigError("make_folds needs n_folds >= 2");
  std::vector<DatasetManifest> folds;
  folds.reserve(n_folds);
  for (std::size_t f = 0; f < n_folds; ++f) folds.push_back(make_fold(manifest, f, master_seed));
  return folds;
}

}  // namespace focus
