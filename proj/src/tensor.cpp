#include "clab/tensor.hpp"

#include <cmath>

namespace clab {

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::size_t channels, float fill)
    : height_(height), width_(width), channels_(channels),
      data_(height * width * channels, fill) {
  if (channels != 1 && channels != 3)
    throw std::invalid_argument("ImageTensor: channels must be 1 or 3, got " + std::to_string(channels));
  if (!(fill >= 0.0f && fill <= 1.0f))
    throw std::invalid_argument("ImageTensor: fill value outside [0,1]");
}

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
                         std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  if (channels != 1 && channels != 3)
    throw std::invalid_argument("ImageTensor: channels must be 1 or 3, got " + std::to_string(channels));
  if (data_.size() != height * width * channels)
    throw std::invalid_argument("ImageTensor: data length " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(height) + "x" +
                                std::to_string(width) + "x" + std::to_string(channels));
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!(data_[i] >= 0.0f && data_[i] <= 1.0f))
      throw std::invalid_argument("ImageTensor: value at index " + std::to_string(i) +
                                  " outside [0,1]");
  }
}

std::string ImageTensor::shape_string() const {
  return std::to_string(height_) + "x" + std::to_string(width_) + "x" + std::to_string(channels_);
}

EmbeddingBatch::EmbeddingBatch(std::vector<EmbeddingVector> rows) : rows_(std::move(rows)) {
  for (const auto& r : rows_) {
    if (r.dim() != rows_.front().dim())
      throw std::invalid_argument("EmbeddingBatch: rows have differing dims " +
                                  std::to_string(rows_.front().dim()) + " and " +
                                  std::to_string(r.dim()));
    if (r.normalized != rows_.front().normalized)
      throw std::invalid_argument("EmbeddingBatch: rows disagree on normalized flag");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("dot: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  return dot(std::span<const double>(a.values), std::span<const double>(b.values));
}

double norm(const EmbeddingVector& v) { return std::sqrt(dot(v, v)); }

EmbeddingVector l2_normalize(const EmbeddingVector& v) {
  const double n = norm(v);
  if (!(n > kNormEpsilon)) return EmbeddingVector(std::vector<double>(v.dim(), 0.0), false);
  std::vector<double> out(v.values);
  for (auto& x : out) x /= n;
  return EmbeddingVector(std::move(out), true);
}

}  // namespace clab
