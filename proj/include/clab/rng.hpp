#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace clab {

// Counter-based random stream built on Philox4x32-10. A stream is identified
// by (seed, stream_id); the counter indexes draws within it. Every
// distribution below is implemented here rather than through <random> so
// draws are identical across standard libraries.
class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : seed_(seed), stream_id_(stream_id) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }

  // Child stream whose id is a keyed hash of (parent stream id, label).
  // Independent of how many draws the parent has made.
  RngStream fork(std::uint64_t label) const;

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  double normal();
  double gamma(double shape);
  double beta(double a, double b);

  bool operator==(const RngStream&) const = default;

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_id_ = 0;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  unsigned block_pos_ = 4;
};

// Raw Philox4x32-10 bijection, exposed for tests against published vectors.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key);

}  // namespace clab
