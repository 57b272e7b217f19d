#include "uie/serialize.hpp"

#include <istream>
#include <cstring>
#include <ostream>
#include <vector>

#include "uie/error.hpp"

namespace uie {

void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, uint64_t v) {
  write_u32(os, static_cast<uint32_t>(v));
  write_u32(os, static_cast<uint32_t>(v >> 32));
}

void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw CheckpointError("truncated file");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t read_u64(std::istream& is) {
  uint64_t lo = read_u32(is);
  uint64_t hi = read_u32(is);
  return lo | (hi << 32);
}

std::string read_string(std::istream& is) {
  uint32_t n = read_u32(is);
  if (n > (1u << 28)) throw CheckpointError("corrupt string length");
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw CheckpointError("truncated file");
  return s;
}

namespace {

void write_f32_le(std::ostream& os, float f) {
  uint32_t u;
  static_assert(sizeof(u) == sizeof(f));
  std::memcpy(&u, &f, 4);
  write_u32(os, u);
}

float read_f32_le(std::istream& is) {
  uint32_t u = read_u32(is);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

}  // namespace

void write_param_blocks(std::ostream& os, const ParamStore& params) {
  write_u32(os, static_cast<uint32_t>(params.count()));
  for (const auto& [name, p] : params) {
    write_string(os, name);
    write_u32(os, static_cast<uint32_t>(p.value.shape.size()));
    for (int d : p.value.shape) write_u32(os, static_cast<uint32_t>(d));
    write_u64(os, static_cast<uint64_t>(p.value.numel()));
    for (double v : p.value.data) write_f32_le(os, static_cast<float>(v));
  }
}

void read_param_blocks(std::istream& is, ParamStore& params) {
  uint32_t count = read_u32(is);
  if (count != params.count())
    throw CheckpointError("parameter count mismatch: file has " + std::to_string(count) +
                          ", model expects " + std::to_string(params.count()));
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = read_string(is);
    if (!params.has(name)) throw CheckpointError("unknown parameter block '" + name + "'");
    Param& p = params.get(name);
    uint32_t ndims = read_u32(is);
    std::vector<int> shape(ndims);
    for (uint32_t d = 0; d < ndims; ++d) shape[d] = static_cast<int>(read_u32(is));
    uint64_t numel = read_u64(is);
    if (shape != p.value.shape || numel != static_cast<uint64_t>(p.value.numel()))
      throw CheckpointError("shape mismatch for parameter '" + name + "'");
    for (uint64_t k = 0; k < numel; ++k)
      p.value[static_cast<size_t>(k)] = static_cast<double>(read_f32_le(is));
  }
}

}  // namespace uie
