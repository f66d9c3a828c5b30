#pragma once

#include <cstdint>
#include <filesystem>

#include "focus/numerics.hpp"

namespace focus {

// Checkpoint layout, little-endian:
//   "FOCP", version u32, then u32 d, h, d_k, t1, t2, S
//   then until EOF, in sorted name order, one record per tensor:
//   name_len u32, name bytes, rows u32, cols u32, rows*cols f32 values.
inline constexpr char kCheckpointMagic[4] = {'F', 'O', 'C', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointHeader {
  std::uint32_t d = 0;
  std::uint32_t heads = 0;
  std::uint32_t head_dim = 0;
  std::uint32_t t1 = 0;
  std::uint32_t t2 = 0;
  std::uint32_t num_classes = 0;

  friend bool operator==(const CheckpointHeader&, const CheckpointHeader&) = default;
};

struct Checkpoint {
  CheckpointHeader header;
  ParamStore params;  // every tensor loaded as trainable
};

void save_checkpoint(const CheckpointHeader& header, const ParamStore& params,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace focus
