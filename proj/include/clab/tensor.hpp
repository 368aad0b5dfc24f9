#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace clab {

// H x W x C image, row-major with interleaved channels, values in [0, 1].
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels, float fill = 0.0f);
  // Takes ownership of `data`; validates length and range.
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels, std::vector<float> data);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float& at(std::size_t y, std::size_t x, std::size_t c) {
    return data_[(y * width_ + x) * channels_ + c];
  }
  float at(std::size_t y, std::size_t x, std::size_t c) const {
    return data_[(y * width_ + x) * channels_ + c];
  }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  bool same_shape(const ImageTensor& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }
  std::string shape_string() const;

  bool operator==(const ImageTensor&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<float> data_;
};

// Axis-aligned pixel rectangle [y, y + h) x [x, x + w).
struct Rect {
  std::size_t y = 0;
  std::size_t x = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t area() const { return h * w; }
  bool contains(std::size_t py, std::size_t px) const {
    return py >= y && py < y + h && px >= x && px < x + w;
  }
  bool operator==(const Rect&) const = default;
};

struct EmbeddingVector {
  std::vector<double> values;
  bool normalized = false;

  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<double> v, bool is_normalized = false)
      : values(std::move(v)), normalized(is_normalized) {}

  std::size_t dim() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  bool operator==(const EmbeddingVector&) const = default;
};

// N rows sharing one dim and one normalized flag.
class EmbeddingBatch {
 public:
  EmbeddingBatch() = default;
  explicit EmbeddingBatch(std::vector<EmbeddingVector> rows);

  std::size_t count() const { return rows_.size(); }
  std::size_t dim() const { return rows_.empty() ? 0 : rows_.front().dim(); }
  const EmbeddingVector& operator[](std::size_t i) const { return rows_[i]; }
  const std::vector<EmbeddingVector>& rows() const { return rows_; }
  auto begin() const { return rows_.begin(); }
  auto end() const { return rows_.end(); }

 private:
  std::vector<EmbeddingVector> rows_;
};

inline constexpr double kNormEpsilon = 1e-12;

double dot(const EmbeddingVector& a, const EmbeddingVector& b);
double dot(std::span<const double> a, std::span<const double> b);
double norm(const EmbeddingVector& v);

// Zero (or near-zero, <= kNormEpsilon) input yields the zero vector with the
// normalized flag unset.
EmbeddingVector l2_normalize(const EmbeddingVector& v);

}  // namespace clab
