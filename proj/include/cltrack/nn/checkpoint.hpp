#pragma once

// Checkpoint container:
//   magic "CLTKCKPT" | u32 version | u32 n, n bytes of config text
//   u32 parameter count, then per parameter:
//   u32 name length, name bytes | u32 rank, rank x u32 dims | f32 values
// All integers and floats are little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "cltrack/error.hpp"
#include "cltrack/nn/params.hpp"

namespace cltrack::nn {

inline constexpr char kCheckpointMagic[8] = {'C', 'L', 'T', 'K', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string config;
  ParameterSet params;
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw ConfigError("checkpoint truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::string get_bytes(std::istream& is, std::uint32_t n) {
  if (n > (1u << 28)) throw ConfigError("checkpoint field too large");
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw ConfigError("checkpoint truncated");
  return s;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
  os.write(kCheckpointMagic, 8);
  detail::put_u32(os, kCheckpointVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(ck.config.size()));
  os.write(ck.config.data(), static_cast<std::streamsize>(ck.config.size()));
  detail::put_u32(os, static_cast<std::uint32_t>(ck.params.size()));
  for (const auto& p : ck.params) {
    detail::put_u32(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    detail::put_u32(os, static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) detail::put_u32(os, static_cast<std::uint32_t>(d));
    for (double v : p.value.data()) detail::put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
}

inline Checkpoint read_checkpoint(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) throw ConfigError("not a checkpoint file");
  const auto version = detail::get_u32(is);
  if (version != kCheckpointVersion) throw ConfigError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.config = detail::get_bytes(is, detail::get_u32(is));
  const auto count = detail::get_u32(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = detail::get_bytes(is, detail::get_u32(is));
    const auto rank = detail::get_u32(is);
    if (rank == 0 || rank > 8) throw ConfigError("checkpoint: bad rank for " + name);
    std::vector<std::size_t> shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(detail::get_u32(is));
    Tensor t(shape);
    for (auto& v : t.data()) v = static_cast<double>(std::bit_cast<float>(detail::get_u32(is)));
    ck.params.add(std::move(name), std::move(t));
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path);
  write_checkpoint(os, ck);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path);
  return read_checkpoint(is);
}

}  // namespace cltrack::nn
