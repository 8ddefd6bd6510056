#include "f2v/sequence.hpp"
#include "f2v/tts.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace f2v {
namespace {

using testing::brute_expand;
using testing::for_each_segmentation;
using testing::segmentation_score;

TEST(Expand, HandExample) {
  const Matrix h{{1.0}, {2.0}};
  const Matrix out = expand(h, DurationVector{{2, 1}});
  EXPECT_EQ(out, (Matrix{{1.0}, {1.0}, {2.0}}));
}

TEST(Expand, UnitDurationsAreIdentity) {
  Rng rng(1);
  Matrix h(3, 4);
  for (Index i = 0; i < h.size(); ++i) h.data()[i] = rng.normal();
  EXPECT_EQ(expand(h, DurationVector{{1, 1, 1}}), h);
}

TEST(Expand, LengthMismatchThrows) {
  EXPECT_THROW(expand(Matrix::Zero(2, 3), DurationVector{{1, 1, 1}}), InvalidInput);
}

TEST(Expand, ExhaustiveSmallInstances) {
  Rng rng(2);
  for (int n = 1; n <= 4; ++n) {
    Matrix h(n, 2);
    for (Index i = 0; i < h.size(); ++i) h.data()[i] = rng.normal();
    std::vector<int> d(static_cast<std::size_t>(n), 1);
    // Odometer over d_i in [1, 4].
    while (true) {
      const Matrix out = expand(h, DurationVector{d});
      ASSERT_EQ(out, brute_expand(h, d));
      Index start = 0;
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < d[static_cast<std::size_t>(i)]; ++k) ASSERT_EQ(out.row(start + k), h.row(i));
        start += d[static_cast<std::size_t>(i)];
      }
      std::size_t j = 0;
      while (j < d.size() && d[j] == 4) d[j++] = 1;
      if (j == d.size()) break;
      ++d[j];
    }
  }
}

TEST(Pool, HandExample) {
  const Matrix frames{{1.0}, {3.0}, {5.0}};
  EXPECT_EQ(pool_by_phoneme(frames, DurationVector{{2, 1}}), (Matrix{{2.0}, {5.0}}));
}

TEST(Pool, UnitDurationsAreIdentity) {
  const Matrix frames{{1.0, 2.0}, {3.0, 4.0}};
  EXPECT_EQ(pool_by_phoneme(frames, DurationVector{{1, 1}}), frames);
}

TEST(Pool, MismatchThrows) {
  EXPECT_THROW(pool_by_phoneme(Matrix::Zero(4, 2), DurationVector{{2, 1}}), InvalidInput);
  EXPECT_THROW(pool_by_phoneme(Matrix::Zero(2, 2), DurationVector{{2, 0}}), InvalidInput);
}

TEST(Pool, ExpandOfPoolPreservesSegmentMeans) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(5));
    DurationVector d;
    for (int i = 0; i < n; ++i) d.counts.push_back(1 + static_cast<int>(rng.uniform_int(4)));
    Matrix frames(d.total(), 3);
    for (Index i = 0; i < frames.size(); ++i) frames.data()[i] = rng.normal();
    const Matrix pooled = pool_by_phoneme(frames, d);
    EXPECT_TRUE(pool_by_phoneme(expand(pooled, d), d).isApprox(pooled, 1e-12));
  }
}

TEST(Align, SinglePhonemeTakesAllFrames) {
  const Matrix sim = Matrix::Random(1, 7);
  EXPECT_EQ(monotonic_align(sim).counts, std::vector<int>{7});
}

TEST(Align, HandExample) {
  const Matrix sim{{10, 0, 0}, {0, 10, 10}};
  EXPECT_EQ(monotonic_align(sim).counts, (std::vector<int>{1, 2}));
}

TEST(Align, InfeasibleThrows) { EXPECT_THROW(monotonic_align(Matrix::Zero(4, 3)), AlignmentInfeasible); }

TEST(Align, ExhaustiveOracleAgreement) {
  Rng rng(4);
  for (int n = 1; n <= 4; ++n) {
    for (int m = n; m <= 8; ++m) {
      for (int trial = 0; trial < 20; ++trial) {
        Matrix sim(n, m);
        for (Index i = 0; i < sim.size(); ++i) sim.data()[i] = rng.normal();
        double best = -std::numeric_limits<double>::infinity();
        for_each_segmentation(n, m, [&](const std::vector<int>& d) { best = std::max(best, segmentation_score(sim, d)); });
        const DurationVector d = monotonic_align(sim);
        ASSERT_EQ(d.total(), m);
        for (int c : d.counts) ASSERT_GE(c, 1);
        ASSERT_NEAR(segmentation_score(sim, d.counts), best, 1e-9);
      }
    }
  }
}

TEST(Durations, ExpRoundClamp) {
  const Vector raw{{0.0, std::log(2.0), std::log(2.0) + 0.01}};
  EXPECT_EQ(durations_from_log(raw).counts, (std::vector<int>{1, 2, 2}));
  EXPECT_EQ(durations_from_log(Vector{{-5.0, std::log(2.5)}}).counts, (std::vector<int>{1, 3}));
}

}  // namespace
}  // namespace f2v
