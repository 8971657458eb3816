#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "arithlm/config.hpp"
#include "arithlm/model.hpp"

namespace arithlm {

// Container layout (all integers little-endian):
//   "ARITHLM\0"  u32 version  u32 header_len  header JSON bytes
//   u32 tensor_count, then per tensor:
//     u32 name_len  name  u32 ndim  u64 extents[ndim]  f32 values[numel]
inline constexpr char kCheckpointMagic[8] = {'A', 'R', 'I', 'T', 'H', 'L', 'M', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

struct Container {
  Json header;
  NamedTensors tensors;
};

void write_container(const std::string& path, const Container& c);
Container read_container(const std::string& path);
std::string encode_container(const Container& c);
Container decode_container(const std::string& bytes);

struct Checkpoint {
  Model model;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
};

void save_checkpoint(const std::string& path, const Model& model, std::uint64_t seed,
                     std::size_t epoch);
Checkpoint load_checkpoint(const std::string& path);

/// FNV-1a over every parameter's name, shape and bytes.
std::uint64_t parameter_hash(const Model& model);

}  // namespace arithlm
