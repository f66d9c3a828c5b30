#include "fixtures.hpp"

#include <unistd.h>

namespace focus::fixtures {

Dataset synthetic_dataset(const SyntheticData& data) {
  Dataset ds;
  ds.manifest = data.manifest;
  ds.knowledge = data.prompts;
  for (const auto& sb : data.bags) ds.bags.push_back(sb.bag);
  return ds;
}

Dataset synthetic_dataset(const SynthSpec& spec) {
  return synthetic_dataset(generate_synthetic(spec));
}

TempDir::TempDir(const std::string& tag) {
  path_ = std::filesystem::temp_directory_path() /
          ("focus_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace focus::fixtures
