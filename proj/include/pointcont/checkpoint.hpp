#pragma once

// PCNT tensor container:
//   "PCNT" | version u32 | tensor count u32 |
//   per tensor: name length u16, UTF-8 name, rank u8, dims u32 x rank,
//               payload f32 x prod(dims), row-major.
// All integers and floats little-endian.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pointcont/param_store.hpp"

namespace pct {

inline constexpr std::uint32_t kPcntVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

void write_pcnt(std::ostream& out, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_pcnt(std::istream& in);

void write_pcnt_file(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_pcnt_file(const std::filesystem::path& path);

// Every tensor in the store, running statistics included, in name order.
void save_checkpoint(const std::filesystem::path& path, const ParamStore& store);
// Every tensor in the store must be present in the file with the same shape;
// extra or missing tensors are a FormatError.
void load_checkpoint(const std::filesystem::path& path, ParamStore& store);

std::vector<NamedTensor> to_named_tensors(const ParamStore& store);
void assign_from(ParamStore& store, const std::vector<NamedTensor>& tensors);

}  // namespace pct
