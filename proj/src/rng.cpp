#include "clab/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace clab {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

// Domain separator so fork outputs never coincide with draw outputs.
constexpr std::uint32_t kForkTag = 0x464F524Bu;  // "FORK"

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

std::array<std::uint32_t, 2> split_key(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

RngStream RngStream::fork(std::uint64_t label) const {
  const auto out = philox4x32({static_cast<std::uint32_t>(label),
                               static_cast<std::uint32_t>(label >> 32),
                               static_cast<std::uint32_t>(stream_id_) ^ kForkTag,
                               static_cast<std::uint32_t>(stream_id_ >> 32)},
                              split_key(seed_ ^ 0xA5A5A5A5A5A5A5A5ull));
  const std::uint64_t child =
      (static_cast<std::uint64_t>(out[1]) << 32 | out[0]) ^
      (static_cast<std::uint64_t>(out[3]) << 32 | out[2]) * 0x9E3779B97F4A7C15ull;
  return RngStream(seed_, child);
}

std::uint64_t RngStream::next_u64() {
  if (block_pos_ >= 4) {
    block_ = philox4x32({static_cast<std::uint32_t>(counter_),
                         static_cast<std::uint32_t>(counter_ >> 32),
                         static_cast<std::uint32_t>(stream_id_),
                         static_cast<std::uint32_t>(stream_id_ >> 32)},
                        split_key(seed_));
    ++counter_;
    block_pos_ = 0;
  }
  const std::uint64_t v = static_cast<std::uint64_t>(block_[block_pos_ + 1]) << 32 |
                          block_[block_pos_];
  block_pos_ += 2;
  return v;
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
  // Rejection keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

double RngStream::normal() {
  // Box-Muller, one output per pair of uniforms.
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double RngStream::gamma(double shape) {
  if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be positive");
  if (shape < 1.0) {
    // Boost to shape + 1, then scale by U^(1/shape).
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia-Tsang.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double RngStream::beta(double a, double b) {
  const double x = gamma(a);
  const double y = gamma(b);
  return x / (x + y);
}

}  // namespace clab
