#include "focus/dataio.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "focus/errors.hpp"
#include "focus/numerics.hpp"
#include "json.hpp"

namespace focus {

static_assert(std::endian::native == std::endian::little,
              "feature files are little-endian; add byte swapping for this target");

namespace {

template <typename T>
void put(std::string& buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& pos, const std::string& path) {
  if (pos + sizeof(T) > buf.size()) throw TruncatedFile(path, buf.size());
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

struct RawFeatures {
  Matrix features;
  std::vector<std::uint64_t> indices;
};

RawFeatures decode(const std::string& buf, const std::string& path) {
  if (buf.size() < 4 || std::memcmp(buf.data(), kFeatureMagic, 4) != 0) {
    throw BadMagic(path + ": not a feature file (bad magic)");
  }
  std::size_t pos = 4;
  const auto version = take<std::uint32_t>(buf, pos, path);
  if (version != kFeatureVersion) {
    throw BadMagic(path + ": unsupported feature file version " + std::to_string(version));
  }
  const auto n = take<std::uint64_t>(buf, pos, path);
  const auto d = take<std::uint32_t>(buf, pos, path);
  take<std::uint32_t>(buf, pos, path);  // flags
  if (n == 0 || d == 0) throw Error(path + ": N and d must be positive");
  const std::uint64_t expected = feature_file_size(n, d);
  if (buf.size() < expected) {
    throw TruncatedFile(path, buf.size());
  }
  if (buf.size() > expected) throw Error(path + ": trailing bytes after footer");

  RawFeatures out;
  out.features = Matrix(n, d);
  auto values = out.features.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    float f;
    std::memcpy(&f, buf.data() + pos + 4 * i, 4);
    if (!std::isfinite(f)) {
      throw NonFiniteValue(path + ": non-finite feature at row " + std::to_string(i / d));
    }
    values[i] = static_cast<double>(f);
  }
  pos += 4 * values.size();
  out.indices.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.indices[i] = take<std::uint64_t>(buf, pos, path);
  return out;
}

std::string encode(const Matrix& features, const std::vector<std::uint64_t>& indices) {
  std::string buf;
  buf.reserve(feature_file_size(features.rows(), static_cast<std::uint32_t>(features.cols())));
  buf.append(kFeatureMagic, 4);
  put<std::uint32_t>(buf, kFeatureVersion);
  put<std::uint64_t>(buf, features.rows());
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(features.cols()));
  put<std::uint32_t>(buf, 0);
  for (double v : features.values()) put<float>(buf, static_cast<float>(v));
  for (auto idx : indices) put<std::uint64_t>(buf, idx);
  return buf;
}

}  // namespace

std::uint64_t feature_file_size(std::uint64_t n, std::uint32_t d) {
  return kFeatureHeaderBytes + 4 * n * d + 8 * n;
}

FeatureBag read_bag(const std::filesystem::path& path) {
  const std::string name = path.string();
  auto raw = decode(slurp(path), name);
  FeatureBag bag;
  bag.id = path.stem().string();
  bag.features = std::move(raw.features);
  bag.patch_indices = std::move(raw.indices);
  bag.validate();
  return bag;
}

void write_bag(const FeatureBag& bag, const std::filesystem::path& path) {
  bag.validate();
  spill(path, encode(bag.features, bag.patch_indices));
}

Matrix read_prompts(const std::filesystem::path& path) {
  return decode(slurp(path), path.string()).features;
}

void write_prompts(const Matrix& prompts, const std::filesystem::path& path) {
  if (prompts.rows() == 0) throw Error("refusing to write an empty prompt file");
  require_finite(prompts, "prompts");
  std::vector<std::uint64_t> idx(prompts.rows());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  spill(path, encode(prompts, idx));
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  Dataset ds;
  ds.manifest = load_manifest(manifest_path);
  ds.bags.reserve(ds.manifest.bags.size());
  for (const auto& entry : ds.manifest.bags) {
    FeatureBag bag = read_bag(ds.manifest.resolve(entry.path));
    if (bag.dim() != ds.manifest.d) {
      throw ShapeMismatch(entry.path + ": width " + std::to_string(bag.dim()) +
                          " differs from manifest d=" + std::to_string(ds.manifest.d));
    }
    bag.id = entry.path;
    bag.label = entry.label;
    ds.bags.push_back(std::move(bag));
  }
  if (ds.manifest.prompts) {
    ds.knowledge = read_prompts(ds.manifest.resolve(*ds.manifest.prompts));
    if (ds.knowledge.cols() != ds.manifest.d) {
      throw ShapeMismatch("prompt width differs from manifest d");
    }
  }
  return ds;
}

DatasetManifest convert_raw_directory(const std::filesystem::path& input_dir,
                                      const std::filesystem::path& output_dir,
                                      std::uint64_t seed) {
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(slurp(input_dir / "labels.json"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("labels.json: ") + e.what());
  }
  DatasetManifest m;
  m.base_dir = output_dir;
  std::filesystem::create_directories(output_dir);

  auto read_raw = [&](const std::string& file, std::size_t d) {
    const std::string buf = slurp(input_dir / file);
    if (buf.size() % (4 * d) != 0 || buf.empty()) {
      throw TruncatedFile((input_dir / file).string(), buf.size());
    }
    const std::size_t n = buf.size() / (4 * d);
    Matrix mat(n, d);
    auto v = mat.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      float f;
      std::memcpy(&f, buf.data() + 4 * i, 4);
      v[i] = static_cast<double>(f);
    }
    return mat;
  };

  try {
    m.d = sidecar.at("d").get<std::size_t>();
    m.class_names = sidecar.at("classes").get<std::vector<std::string>>();
    for (const auto& slide : sidecar.at("slides")) {
      const std::string file = slide.at("file").get<std::string>();
      FeatureBag bag;
      bag.features = read_raw(file, m.d);
      bag.patch_indices.resize(bag.features.rows());
      for (std::size_t i = 0; i < bag.patch_indices.size(); ++i) bag.patch_indices[i] = i;
      bag.id = std::filesystem::path(file).stem().string();
      const std::string out_name = bag.id + ".fbag";
      write_bag(bag, output_dir / out_name);
      m.bags.push_back({out_name, slide.at("label").get<int>(), Split::Train});
    }
    if (sidecar.contains("prompts")) {
      write_prompts(read_raw(sidecar.at("prompts").get<std::string>(), m.d),
                    output_dir / "prompts.fbag");
      m.prompts = "prompts.fbag";
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("labels.json: ") + e.what());
  }
  DatasetManifest split = make_fold(m, 0, seed);
  save_manifest(split, output_dir / "manifest.json");
  return split;
}

}  // namespace focus
