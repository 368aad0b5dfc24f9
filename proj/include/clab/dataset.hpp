#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "clab/contrastive.hpp"
#include "clab/rng.hpp"
#include "clab/tensor.hpp"

namespace clab {

struct Dataset {
  std::vector<ImageTensor> images;
  std::vector<Label> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return images.size(); }
};

enum class DataSource { Synthetic, Cifar10Binary };

struct DatasetSpec {
  DataSource source = DataSource::Synthetic;
  std::filesystem::path path;  // CIFAR-10 batch file
  std::size_t limit = 2000;    // CIFAR-10 subset size; 0 = whole file
  std::size_t classes = 8;
  std::size_t per_class = 128;
  std::size_t image_size = 16;
  std::size_t channels = 1;
  double noise = 0.1;
  double label_fraction = 0.0;

  void validate() const;
};

inline constexpr std::size_t kCifarRecordBytes = 3073;
inline constexpr std::size_t kCifarSide = 32;

// Records of 1 label byte (0-9) followed by 1024 R, 1024 G, 1024 B bytes,
// each plane row-major 32x32. Pixels are scaled by 1/255. Rejects the whole
// buffer on any malformed record.
Dataset parse_cifar10(std::span<const std::uint8_t> bytes);
Dataset load_cifar10(const std::filesystem::path& path);

// Class c is a sinusoidal grating with its own orientation and frequency;
// `noise` adds uniform [-noise, noise] per value before clamping to [0, 1].
Dataset synth_dataset(const DatasetSpec& spec, std::uint64_t seed);

Dataset load_dataset(const DatasetSpec& spec, std::uint64_t seed);

// First ceil(f * n) entries of a seeded shuffle are labeled. For a fixed rng
// the labeled sets nest as f grows.
std::vector<bool> labeled_partition(std::size_t n, double fraction, RngStream rng);

// Seeded Fisher-Yates permutation of [0, n).
std::vector<std::size_t> shuffled_indices(std::size_t n, RngStream rng);

// Binary PPM (P6, maxval 255). Single-channel images are written as gray RGB.
std::vector<std::uint8_t> encode_ppm(const ImageTensor& img);
ImageTensor decode_ppm(std::span<const std::uint8_t> bytes);
void write_ppm(const std::filesystem::path& path, const ImageTensor& img);
ImageTensor read_ppm(const std::filesystem::path& path);

}  // namespace clab
