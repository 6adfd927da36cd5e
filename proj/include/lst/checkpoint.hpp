#pragma once

#include "lst/model.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace lst {

// On-disk layout, all integers little-endian:
//
//   magic      8 bytes  "LSTCKPT\0"
//   version    u32      kCheckpointVersion
//   desc_len   u32      length of the descriptor text block
//   desc       bytes    line 1: architecture descriptor; further lines: key=value metadata
//   count      u32      number of parameter tensors
//   per tensor:
//     rank     u32
//     extents  u64 x rank
//     values   f64 x numel (IEEE-754 binary64, little-endian)
//   checksum   u64      FNV-1a 64 over every preceding byte
inline constexpr std::uint32_t kCheckpointVersion = 2;

struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    Architecture architecture;
    std::vector<Tensor> parameters;
    std::map<std::string, std::string> metadata;  // seed, epochs, dataset, ...

    Model model() const { return Model(architecture, parameters); }
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const std::map<std::string, std::string>& metadata = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace lst
