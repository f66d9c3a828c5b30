#include "focus/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "focus/errors.hpp"

namespace focus {

namespace {

void put_u32(std::string& buf, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  buf.append(b, 4);
}

std::uint32_t take_u32(const std::string& buf, std::size_t& pos, const std::string& path) {
  if (pos + 4 > buf.size()) throw TruncatedFile(path, buf.size());
  std::uint32_t v;
  std::memcpy(&v, buf.data() + pos, 4);
  pos += 4;
  return v;
}

}  // namespace

void save_checkpoint(const CheckpointHeader& header, const ParamStore& params,
                     const std::filesystem::path& path) {
  std::string buf;
  buf.append(kCheckpointMagic, 4);
  put_u32(buf, kCheckpointVersion);
  put_u32(buf, header.d);
  put_u32(buf, header.heads);
  put_u32(buf, header.head_dim);
  put_u32(buf, header.t1);
  put_u32(buf, header.t2);
  put_u32(buf, header.num_classes);
  for (const auto& [name, t] : params.entries()) {
    put_u32(buf, static_cast<std::uint32_t>(name.size()));
    buf.append(name);
    put_u32(buf, static_cast<std::uint32_t>(t.rows()));
    put_u32(buf, static_cast<std::uint32_t>(t.cols()));
    for (double v : t.value.values()) {
      const float f = static_cast<float>(v);
      char b[4];
      std::memcpy(b, &f, 4);
      buf.append(b, 4);
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string name = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + name + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();

  if (buf.size() < 4 || std::memcmp(buf.data(), kCheckpointMagic, 4) != 0) {
    throw BadMagic(name + ": not a checkpoint (bad magic)");
  }
  std::size_t pos = 4;
  const auto version = take_u32(buf, pos, name);
  if (version != kCheckpointVersion) {
    throw BadMagic(name + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.header.d = take_u32(buf, pos, name);
  ck.header.heads = take_u32(buf, pos, name);
  ck.header.head_dim = take_u32(buf, pos, name);
  ck.header.t1 = take_u32(buf, pos, name);
  ck.header.t2 = take_u32(buf, pos, name);
  ck.header.num_classes = take_u32(buf, pos, name);
  while (pos < buf.size()) {
    const auto len = take_u32(buf, pos, name);
    if (pos + len > buf.size()) throw TruncatedFile(name, buf.size());
    std::string tname = buf.substr(pos, len);
    pos += len;
    const auto rows = take_u32(buf, pos, name);
    const auto cols = take_u32(buf, pos, name);
    const std::size_t count = static_cast<std::size_t>(rows) * cols;
    if (pos + 4 * count > buf.size()) throw TruncatedFile(name, buf.size());
    Matrix m(rows, cols);
    auto v = m.values();
    for (std::size_t i = 0; i < count; ++i) {
      float f;
      std::memcpy(&f, buf.data() + pos + 4 * i, 4);
      if (!std::isfinite(f)) throw NonFiniteValue(name + ": non-finite value in " + tname);
      v[i] = static_cast<double>(f);
    }
    pos += 4 * count;
    ck.params.add(tname, std::move(m));
  }
  return ck;
}

}  // namespace focus
