#pragma once

#include <iosfwd>
#include <string>

#include "uie/params.hpp"

namespace uie {

// Named raw parameter blocks, little-endian float32 payloads, emitted in
// name-sorted order so byte output is deterministic.
void write_param_blocks(std::ostream& os, const ParamStore& params);

// Reads blocks into an existing store; names and shapes must match exactly.
void read_param_blocks(std::istream& is, ParamStore& params);

void write_u32(std::ostream& os, uint32_t v);
void write_u64(std::ostream& os, uint64_t v);
void write_string(std::ostream& os, const std::string& s);
uint32_t read_u32(std::istream& is);
uint64_t read_u64(std::istream& is);
std::string read_string(std::istream& is);

}  // namespace uie
