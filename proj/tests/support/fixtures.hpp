#pragma once

#include <filesystem>
#include <string>

#include "focus/dataio.hpp"
#include "focus/synth.hpp"

namespace focus::fixtures {

// In-memory dataset equivalent to loading write_synthetic's output.
Dataset synthetic_dataset(const SyntheticData& data);
Dataset synthetic_dataset(const SynthSpec& spec);

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace focus::fixtures
