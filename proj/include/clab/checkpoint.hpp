#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "clab/encoder.hpp"

namespace clab {

// On-disk layout, all little-endian:
//   "CLAB1"                     5 bytes
//   layer count                 u32
//   query encoder layers        per layer: rows u32, cols u32,
//                               weight f64[rows*cols] row-major, bias f64[rows]
//   key encoder layers          same layout
//   velocity layers             same layout
//   step counter                u64
struct Checkpoint {
  EncoderParams query;
  EncoderParams key;
  GradBuffer velocity;
  std::uint64_t step = 0;

  bool operator==(const Checkpoint& other) const;
};

inline constexpr char kCheckpointMagic[] = "CLAB1";

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

// Writes to a temporary sibling and renames into place.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace clab
