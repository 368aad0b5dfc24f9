#include <gtest/gtest.h>

#include <cmath>

#include "clab/rng.hpp"
#include "clab/tensor.hpp"

using namespace clab;

TEST(Dot, Examples) {
  EXPECT_EQ(dot(EmbeddingVector({1, 0}), EmbeddingVector({1, 0})), 1.0);
  EXPECT_EQ(dot(EmbeddingVector({1, 0}), EmbeddingVector({0, 1})), 0.0);
  EXPECT_NEAR(dot(EmbeddingVector({0.6, 0.8}), EmbeddingVector({0.8, 0.6})), 0.96, 1e-15);
}

TEST(Dot, DimensionMismatchNamesBothDims) {
  try {
    dot(EmbeddingVector({1, 2, 3}), EmbeddingVector({1, 2}));
    FAIL() << "expected throw";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find('3'), std::string::npos);
    EXPECT_NE(msg.find('2'), std::string::npos);
  }
}

TEST(L2Normalize, Examples) {
  auto v = l2_normalize(EmbeddingVector({3, 4}));
  EXPECT_TRUE(v.normalized);
  EXPECT_NEAR(v[0], 0.6, 1e-15);
  EXPECT_NEAR(v[1], 0.8, 1e-15);

  auto z = l2_normalize(EmbeddingVector({0, 0}));
  EXPECT_FALSE(z.normalized);
  EXPECT_EQ(z.values, (std::vector<double>{0, 0}));

  auto a = l2_normalize(EmbeddingVector({2, 0}));
  EXPECT_EQ(a.values, (std::vector<double>{1, 0}));
  EXPECT_TRUE(a.normalized);
}

TEST(L2Normalize, Properties) {
  RngStream rng(11);
  for (int t = 0; t < 500; ++t) {
    const std::size_t dim = 1 + rng.uniform_index(16);
    std::vector<double> a(dim), b(dim);
    for (auto& x : a) x = rng.uniform(-5, 5);
    for (auto& x : b) x = rng.uniform(-5, 5);
    const auto na = l2_normalize(EmbeddingVector(a));
    const auto nb = l2_normalize(EmbeddingVector(b));
    ASSERT_TRUE(na.normalized);
    EXPECT_LT(std::abs(norm(na) - 1.0), 1e-9);
    // Symmetric exactly, bounded for unit vectors.
    EXPECT_EQ(dot(na, nb), dot(nb, na));
    EXPECT_LE(dot(na, nb), 1.0 + 1e-9);
    EXPECT_GE(dot(na, nb), -1.0 - 1e-9);
    // Idempotent.
    const auto twice = l2_normalize(na);
    for (std::size_t i = 0; i < dim; ++i) EXPECT_NEAR(twice[i], na[i], 1e-12);
  }
}

TEST(ImageTensor, RejectsOutOfRangeAndBadLength) {
  EXPECT_THROW(ImageTensor(2, 2, 1, std::vector<float>{0, 0, 0}), std::invalid_argument);
  EXPECT_THROW(ImageTensor(1, 1, 1, std::vector<float>{1.5f}), std::invalid_argument);
  EXPECT_THROW(ImageTensor(1, 1, 2), std::invalid_argument);
  ImageTensor img(2, 3, 3, 0.25f);
  EXPECT_EQ(img.size(), 18u);
}

TEST(EmbeddingBatch, RejectsMixedRows) {
  EXPECT_THROW(EmbeddingBatch({EmbeddingVector({1, 0}), EmbeddingVector({1, 0, 0})}), std::invalid_argument);
  EXPECT_THROW(EmbeddingBatch({EmbeddingVector({1, 0}, true), EmbeddingVector({1, 0}, false)}),
               std::invalid_argument);
}

TEST(Philox, KnownAnswer) {
  // Random123 reference vectors for philox4x32-10.
  const auto zero = philox4x32({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(zero, (std::array<std::uint32_t, 4>{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  const auto ones = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(ones, (std::array<std::uint32_t, 4>{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  const auto pi = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(pi, (std::array<std::uint32_t, 4>{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(RngStream, ForkDeterminism) {
  const RngStream s(42);
  RngStream a = s.fork(0), b = s.fork(0);
  for (int i = 0; i < 64; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(RngStream, ForkLabelsDiffer) {
  const RngStream s(42);
  RngStream a = s.fork(0), b = s.fork(1);
  int differing = 0;
  for (int i = 0; i < 64; ++i) differing += a.next_u64() != b.next_u64();
  EXPECT_GE(differing, 1);
}

TEST(RngStream, ForkOrderMatters) {
  const RngStream s(42);
  RngStream ab = s.fork(0).fork(1), ba = s.fork(1).fork(0);
  EXPECT_NE(ab.stream_id(), ba.stream_id());
  EXPECT_NE(ab.next_u64(), ba.next_u64());
}

TEST(RngStream, ForkIgnoresParentDrawCount) {
  RngStream s(9);
  const RngStream before = s.fork(3);
  s.next_u64();
  EXPECT_EQ(s.fork(3).stream_id(), before.stream_id());
}

TEST(RngStream, DistributionMoments) {
  RngStream rng(1234);
  constexpr int n = 200000;
  double su = 0, sn = 0, sn2 = 0, sb = 0, sg = 0;
  for (int i = 0; i < n; ++i) {
    su += rng.uniform();
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
    sb += rng.beta(2.0, 5.0);
    sg += rng.gamma(0.5);
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.02);
  EXPECT_NEAR(sb / n, 2.0 / 7.0, 0.005);
  EXPECT_NEAR(sg / n, 0.5, 0.01);
}

TEST(RngStream, UniformIndexInRange) {
  RngStream rng(5);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.uniform_index(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
  EXPECT_THROW(rng.uniform_index(0), std::invalid_argument);
}
