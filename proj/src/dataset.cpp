#include "clab/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "clab/checkpoint.hpp"

namespace clab {

void DatasetSpec::validate() const {
  if (source == DataSource::Synthetic) {
    if (classes < 2) throw std::invalid_argument("DatasetSpec: synthetic data needs >= 2 classes");
    if (per_class == 0 || image_size == 0)
      throw std::invalid_argument("DatasetSpec: per-class count and image size must be positive");
    if (channels != 1 && channels != 3) throw std::invalid_argument("DatasetSpec: channels must be 1 or 3");
    if (!(noise >= 0.0 && noise <= 1.0)) throw std::invalid_argument("DatasetSpec: noise must be in [0,1]");
  }
  if (!(label_fraction >= 0.0 && label_fraction <= 1.0))
    throw std::invalid_argument("DatasetSpec: label fraction must be in [0,1]");
}

Dataset parse_cifar10(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % kCifarRecordBytes != 0)
    throw std::runtime_error("CIFAR-10: file length " + std::to_string(bytes.size()) +
                             " is not a multiple of " + std::to_string(kCifarRecordBytes));
  const std::size_t records = bytes.size() / kCifarRecordBytes;
  constexpr std::size_t plane = kCifarSide * kCifarSide;
  Dataset ds;
  ds.num_classes = 10;
  ds.images.reserve(records);
  ds.labels.reserve(records);
  for (std::size_t r = 0; r < records; ++r) {
    const std::uint8_t* rec = bytes.data() + r * kCifarRecordBytes;
    if (rec[0] > 9)
      throw std::runtime_error("CIFAR-10: record " + std::to_string(r) + " has label byte " +
                               std::to_string(rec[0]) + " > 9");
    std::vector<float> px(plane * 3);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < plane; ++i)
        px[i * 3 + c] = static_cast<float>(rec[1 + c * plane + i]) / 255.0f;
    ds.images.emplace_back(kCifarSide, kCifarSide, 3, std::move(px));
    ds.labels.push_back(rec[0]);
  }
  return ds;
}

Dataset load_cifar10(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return parse_cifar10(bytes);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

Dataset synth_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  DatasetSpec checked = spec;
  checked.source = DataSource::Synthetic;
  checked.validate();
  RngStream rng = RngStream(seed).fork(0x5359'4E54);  // "SYNT"
  const std::size_t S = spec.image_size;
  const double side = static_cast<double>(S);
  Dataset ds;
  ds.num_classes = spec.classes;
  ds.images.reserve(spec.classes * spec.per_class);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    // Orientations stay inside [0, pi/2) so a horizontal flip (theta ->
    // pi - theta) never lands on another class's grating.
    const double theta = 0.5 * M_PI * static_cast<double>(c) / static_cast<double>(spec.classes);
    const double freq = 2.0 + 1.5 * static_cast<double>(c % 2);
    const double kx = std::cos(theta), ky = std::sin(theta);
    std::vector<float> pattern(S * S * spec.channels);
    for (std::size_t y = 0; y < S; ++y)
      for (std::size_t x = 0; x < S; ++x) {
        const double t = (static_cast<double>(x) * kx + static_cast<double>(y) * ky) / side;
        for (std::size_t ch = 0; ch < spec.channels; ++ch) {
          const double phase = static_cast<double>(ch) * 2.0 * M_PI / 3.0;
          pattern[(y * S + x) * spec.channels + ch] =
              static_cast<float>(0.5 + 0.5 * std::sin(2.0 * M_PI * freq * t + phase));
        }
      }
    for (std::size_t k = 0; k < spec.per_class; ++k) {
      std::vector<float> px = pattern;
      if (spec.noise > 0.0)
        for (auto& v : px)
          v = static_cast<float>(std::clamp(v + spec.noise * rng.uniform(-1.0, 1.0), 0.0, 1.0));
      ds.images.emplace_back(S, S, spec.channels, std::move(px));
      ds.labels.push_back(static_cast<Label>(c));
    }
  }
  return ds;
}

Dataset load_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (spec.source == DataSource::Synthetic) return synth_dataset(spec, seed);
  Dataset full = load_cifar10(spec.path);
  if (spec.limit == 0 || spec.limit >= full.size()) return full;
  Dataset sub;
  sub.num_classes = full.num_classes;
  for (std::size_t i = 0; i < spec.limit; ++i) {
    sub.images.push_back(std::move(full.images[i]));
    sub.labels.push_back(full.labels[i]);
  }
  return sub;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, RngStream rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
  return idx;
}

std::vector<bool> labeled_partition(std::size_t n, double fraction, RngStream rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw std::invalid_argument("labeled_partition: fraction must be in [0,1]");
  const auto count = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9)));
  std::vector<bool> labeled(n, false);
  const auto order = shuffled_indices(n, rng);
  for (std::size_t i = 0; i < count; ++i) labeled[order[i]] = true;
  return labeled;
}

std::vector<std::uint8_t> encode_ppm(const ImageTensor& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + img.height() * img.width() * 3);
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const float v = img.at(y, x, img.channels() == 3 ? c : 0);
        out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
      }
  return out;
}

ImageTensor decode_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> std::size_t {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw std::runtime_error("PPM: malformed header");
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) v = v * 10 + (bytes[pos++] - '0');
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw std::runtime_error("PPM: expected P6 magic");
  pos = 2;
  const std::size_t width = read_int();
  const std::size_t height = read_int();
  const std::size_t maxval = read_int();
  if (maxval != 255) throw std::runtime_error("PPM: only maxval 255 is supported, got " + std::to_string(maxval));
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw std::runtime_error("PPM: malformed header");
  ++pos;
  const std::size_t n = width * height * 3;
  if (bytes.size() - pos != n)
    throw std::runtime_error("PPM: expected " + std::to_string(n) + " pixel bytes, found " +
                             std::to_string(bytes.size() - pos));
  std::vector<float> px(n);
  for (std::size_t i = 0; i < n; ++i) px[i] = static_cast<float>(bytes[pos + i]) / 255.0f;
  return ImageTensor(height, width, 3, std::move(px));
}

void write_ppm(const std::filesystem::path& path, const ImageTensor& img) {
  write_file_atomic(path, encode_ppm(img));
}

ImageTensor read_ppm(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_ppm(bytes);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace clab
