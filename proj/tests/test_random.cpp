#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "mcl/random.hpp"

using namespace mcl;

// Known-answer vectors published with the Random123 reference implementation.
TEST(Philox, KnownAnswerZero) {
  const auto out = philox4x32({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out, (std::array<std::uint32_t, 4>{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
}

TEST(Philox, KnownAnswerAllOnes) {
  const auto out = philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff});
  EXPECT_EQ(out, (std::array<std::uint32_t, 4>{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
}

TEST(Philox, KnownAnswerPiDigits) {
  const auto out = philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0});
  EXPECT_EQ(out, (std::array<std::uint32_t, 4>{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(RandomStream, SameKeySameSequence) {
  RandomStream a(42, StreamDomain::WorkerNoise, 3, 7);
  RandomStream b(42, StreamDomain::WorkerNoise, 3, 7);
  for (int k = 0; k < 1000; ++k) ASSERT_EQ(a(), b());
}

TEST(RandomStream, DistinctKeysDiffer) {
  std::set<std::uint64_t> firsts;
  for (std::uint32_t a = 0; a < 4; ++a) {
    for (std::uint32_t b = 0; b < 4; ++b) {
      firsts.insert(RandomStream(1, StreamDomain::WorkerNoise, a, b)());
      firsts.insert(RandomStream(1, StreamDomain::MiniBatch, a, b)());
      firsts.insert(RandomStream(2, StreamDomain::WorkerNoise, a, b)());
    }
  }
  EXPECT_EQ(firsts.size(), 48u);
}

TEST(RandomStream, UniformRangeAndMoments) {
  RandomStream s(5, StreamDomain::Test);
  const int n = 1'000'000;
  double sum = 0.0, sumsq = 0.0;
  for (int k = 0; k < n; ++k) {
    const double u = s.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sumsq += u * u;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 0.5, 4 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(sumsq / n - mean * mean, 1.0 / 12, 1e-3);
}

TEST(RandomStream, OpenLowNeverZero) {
  RandomStream s(6, StreamDomain::Test);
  for (int k = 0; k < 100000; ++k) {
    const double u = s.uniform_open_low();
    ASSERT_GT(u, 0.0);
    ASSERT_LE(u, 1.0);
  }
}

TEST(RandomStream, BelowIsUniform) {
  RandomStream s(7, StreamDomain::Test);
  std::vector<int> counts(7, 0);
  const int n = 700000;
  for (int k = 0; k < n; ++k) {
    const auto v = s.below(7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
  EXPECT_LT(chi2, 22.46);  // 6 dof, p = 0.001
  EXPECT_THROW(s.below(0), std::invalid_argument);
}

TEST(RandomStream, UsableWithStdAlgorithms) {
  std::vector<int> v(50);
  for (int k = 0; k < 50; ++k) v[k] = k;
  auto w = v;
  RandomStream s(8, StreamDomain::Test);
  std::shuffle(w.begin(), w.end(), s);
  EXPECT_TRUE(std::is_permutation(v.begin(), v.end(), w.begin()));
  EXPECT_NE(v, w);
}
