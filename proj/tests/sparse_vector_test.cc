//
// Copyright 2026 The isvc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "isvc/sparse_vector.h"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "gtest/gtest.h"
#include "isvc/accounting.h"
#include "isvc/errors.h"
#include "isvc/noise.h"
#include "stats_oracle.h"

namespace isvc {
namespace {

using ::isvc::testing::ChiSquare;
using ::isvc::testing::ChiSquareCritical1e3;

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kTwoPow20 = std::ldexp(1.0, -20);

TEST(AboveThresholdTest, ZeroModeExamples) {
  NoiseSource zero = NoiseSource::Zero();
  const std::vector<double> late = {0, 0, 5};
  EXPECT_EQ(AboveThreshold(GapView(late), 3.0, 1.0, zero), 2u);
  const std::vector<double> none = {0, 0, 0};
  EXPECT_EQ(AboveThreshold(GapView(none), 3.0, 1.0, zero), std::nullopt);
}

TEST(AboveThresholdTest, HugeFirstGapIsSelected) {
  NoiseSource source(1);
  const std::vector<double> gaps = {1e6, 0, 0};
  int first = 0;
  for (int t = 0; t < 10000; ++t) {
    first += AboveThreshold(GapView(gaps), 3.0, 1.0, source) == 0u;
  }
  EXPECT_GE(first, 9990);
}

TEST(AboveThresholdTest, RejectsNonPositiveEpsilon) {
  NoiseSource source(2);
  const std::vector<double> gaps = {1, 2};
  EXPECT_THROW(AboveThreshold(GapView(gaps), 0, 0.0, source),
               InvalidParameterError);
  EXPECT_THROW(PermutedAboveThreshold(GapView(gaps), 0, -1.0, source),
               InvalidParameterError);
}

TEST(AboveThresholdTest, InfiniteGapAlwaysFires) {
  NoiseSource source(3);
  const std::vector<double> gaps = {0, kInf};
  for (int t = 0; t < 1000; ++t) {
    const auto hit = AboveThreshold(GapView(gaps), 1e300, 1e-3, source);
    ASSERT_TRUE(hit.has_value());
  }
}

TEST(AboveThresholdTest, NeverReadsBeyondReturnedIndex) {
  NoiseSource zero = NoiseSource::Zero();
  std::size_t max_read = 0;
  std::size_t reads = 0;
  const GapView counting(1000, [&](std::size_t i) {
    max_read = std::max(max_read, i);
    ++reads;
    return i == 41 ? 10.0 : 0.0;
  });
  EXPECT_EQ(AboveThreshold(counting, 5.0, 1.0, zero), 41u);
  EXPECT_EQ(max_read, 41u);
  EXPECT_EQ(reads, 42u);

  NoiseSource source(4);
  for (int t = 0; t < 200; ++t) {
    max_read = 0;
    const auto hit = AboveThreshold(counting, 5.0, 1.0, source);
    if (hit) {
      EXPECT_EQ(max_read, *hit);
    } else {
      EXPECT_EQ(max_read, 999u);
    }
  }
}

TEST(PermutedAboveThresholdTest, ZeroModeUsesIdentityOrder) {
  NoiseSource zero = NoiseSource::Zero();
  const std::vector<double> gaps = {5, 5};
  EXPECT_EQ(PermutedAboveThreshold(GapView(gaps), 3.0, 1.0, zero), 0u);
}

TEST(PermutedAboveThresholdTest, EqualGapsAreSelectedSymmetrically) {
  NoiseSource source(5);
  const std::vector<double> pair = {5, 5};
  int first = 0;
  for (int t = 0; t < 10000; ++t) {
    first += PermutedAboveThreshold(GapView(pair), 3.0, 1e3, source) == 0u;
  }
  EXPECT_NEAR(first / 10000.0, 0.5, 0.02);

  const std::vector<double> six(6, 50.0);
  std::vector<double> counts(6, 0.0);
  for (int t = 0; t < 30000; ++t) {
    const auto hit = PermutedAboveThreshold(GapView(six), 3.0, 10.0, source);
    ASSERT_TRUE(hit.has_value());
    counts[*hit] += 1.0;
  }
  EXPECT_LT(ChiSquare(counts, std::vector<double>(6, 5000.0)),
            ChiSquareCritical1e3(5));
}

// Runs the literal permuted selector and the tracker's sampler on the same
// gaps and compares their outcome distributions with a two-sample
// chi-square test. Outcome k stands for "no selection".
void ExpectSameDistribution(const std::vector<double>& gaps, double threshold,
                            double epsilon, uint64_t seed) {
  const std::size_t k = gaps.size();
  GapTracker tracker(k);
  for (std::size_t i = 0; i < k; ++i) tracker.Set(i, gaps[i]);
  constexpr int kTrials = 40000;
  std::vector<double> literal(k + 1, 0.0), fast(k + 1, 0.0);
  NoiseSource a(seed, 0), b(seed, 1);
  for (int t = 0; t < kTrials; ++t) {
    literal[PermutedAboveThreshold(GapView(gaps), threshold, epsilon, a)
                .value_or(k)] += 1.0;
    fast[tracker.Select(threshold, epsilon, b).value_or(k)] += 1.0;
  }
  double stat = 0.0;
  int cells = 0;
  for (std::size_t j = 0; j <= k; ++j) {
    const double n = literal[j] + fast[j];
    if (n == 0) continue;
    stat += (literal[j] - fast[j]) * (literal[j] - fast[j]) / n;
    ++cells;
  }
  ASSERT_GE(cells, 2);
  ASSERT_LE(cells - 1, 9);
  const int dof = cells - 1;
  const double critical = dof <= 5 ? ChiSquareCritical1e3(dof)
                                   : ChiSquareCritical1e3(9);
  EXPECT_LT(stat, critical) << "dof " << dof;
}

TEST(GapTrackerTest, MatchesLiteralSelectorWithMixedGaps) {
  ExpectSameDistribution({0, 2, 4, 6, 8, 10}, 6.0, 1.0, 10);
}

TEST(GapTrackerTest, MatchesLiteralSelectorWithInfiniteGaps) {
  ExpectSameDistribution({kInf, 0, 30, kInf, 1}, 20.0, 0.5, 11);
}

TEST(GapTrackerTest, MatchesLiteralSelectorWhenMostlyCold) {
  ExpectSameDistribution({0, 0, 0, 0, 0, 0, 0, 25, 12}, 20.0, 2.0, 12);
}

TEST(GapTrackerTest, ColdOnlyNoSelectionRateMatches) {
  std::vector<double> gaps(500, 0.0);
  gaps[7] = 10.0;
  GapTracker tracker(gaps.size());
  for (std::size_t i = 0; i < gaps.size(); ++i) tracker.Set(i, gaps[i]);
  NoiseSource a(13, 0), b(13, 1);
  int literal_none = 0, fast_none = 0;
  constexpr int kTrials = 20000;
  for (int t = 0; t < kTrials; ++t) {
    literal_none += !PermutedAboveThreshold(GapView(gaps), 30.0, 1.0, a);
    fast_none += !tracker.Select(30.0, 1.0, b);
  }
  const double p = literal_none / static_cast<double>(kTrials);
  const double q = fast_none / static_cast<double>(kTrials);
  const double se = std::sqrt(2 * p * (1 - p) / kTrials);
  EXPECT_NEAR(p, q, 5 * se + 1e-9);
}

TEST(GapTrackerTest, CountsAndUpdates) {
  GapTracker tracker(5);
  EXPECT_EQ(tracker.infinite_count(), 5u);
  EXPECT_EQ(tracker.CountAtLeast(1e12), 5u);
  tracker.Set(1, 3.0);
  tracker.Set(3, 7.0);
  tracker.Set(3, 2.0);
  EXPECT_EQ(tracker.infinite_count(), 3u);
  EXPECT_EQ(tracker.CountAtLeast(2.0), 5u);
  EXPECT_EQ(tracker.CountAtLeast(2.5), 4u);
  EXPECT_EQ(tracker.CountAtLeast(kInf), 3u);
  tracker.Set(1, kInf);
  EXPECT_EQ(tracker.infinite_count(), 4u);
  EXPECT_THROW(tracker.Set(0, -1.0), InvalidParameterError);
}

TEST(GapTrackerTest, ZeroModeSelectsFirstAboveThreshold) {
  GapTracker tracker(4);
  for (std::size_t i = 0; i < 4; ++i) tracker.Set(i, 0.0);
  NoiseSource zero = NoiseSource::Zero();
  EXPECT_EQ(tracker.Select(1.0, 1.0, zero), std::nullopt);
  tracker.Set(2, 1.0);
  tracker.Set(3, kInf);
  EXPECT_EQ(tracker.Select(1.0, 1.0, zero), 2u);
}

TEST(SvCorrectTest, ZeroModeAllZeroGapsFiresNothing) {
  NoiseSource zero = NoiseSource::Zero();
  const std::vector<double> gaps(10, 0.0);
  const SvCorrection r = SvCorrect(gaps, 4, 0.5, kTwoPow20, 1.0, zero);
  EXPECT_EQ(r.rounds_fired, 0);
  EXPECT_EQ(r.correction, std::vector<double>(10, 0.0));
}

TEST(SvCorrectTest, ZeroModeSingleViolationIsCorrectedExactly) {
  NoiseSource zero = NoiseSource::Zero();
  std::vector<double> gaps(10, 0.0);
  gaps[6] = -10.0;
  const SvCorrection r = SvCorrect(gaps, 3, 0.5, kTwoPow20, 1.0, zero);
  EXPECT_EQ(r.rounds_fired, 1);
  EXPECT_EQ(r.correction[6], -10.0);
  for (double x : r.residual) EXPECT_EQ(x, 0.0);
}

TEST(SvCorrectTest, ZeroModeEachRoundShrinksViolatorSet) {
  NoiseSource zero = NoiseSource::Zero();
  const std::vector<double> gaps = {9, 0, -4, 0.1, 7, -0.4, 3};
  const double alpha = 1.0;
  auto violators = [&](const std::vector<double>& residual) {
    return std::count_if(residual.begin(), residual.end(),
                         [&](double r) { return std::fabs(r) > alpha / 2; });
  };
  std::ptrdiff_t previous = violators(gaps);
  for (int64_t c = 1; c <= 4; ++c) {
    const SvCorrection r = SvCorrect(gaps, c, 0.5, kTwoPow20, alpha, zero);
    EXPECT_EQ(r.rounds_fired, c);
    const std::ptrdiff_t now = violators(r.residual);
    EXPECT_LT(now, previous);
    previous = now;
  }
}

TEST(SvCorrectTest, BudgetRecomputesThroughAccounting) {
  for (int64_t c : {1, 10, 500}) {
    for (double eps : {0.1, 0.5, 1.0}) {
      const double r = SvRoundEpsilon(c, eps, kTwoPow20);
      const double half = AdvancedCompose(c, r, kTwoPow20 / 2);
      const BudgetPair spent = SvBudgetSpent(c, eps, kTwoPow20);
      EXPECT_DOUBLE_EQ(spent.epsilon, 2 * half);
      EXPECT_LE(spent.epsilon, eps);
      EXPECT_LE(spent.delta, kTwoPow20);
    }
  }
}

TEST(SvCorrectTest, RejectsTooManyRounds) {
  NoiseSource zero = NoiseSource::Zero();
  const std::vector<double> gaps(3, 0.0);
  EXPECT_THROW(SvCorrect(gaps, 4, 0.5, 0.01, 1.0, zero), InvalidParameterError);
  EXPECT_THROW(SvCorrect(gaps, 0, 0.5, 0.01, 1.0, zero), InvalidParameterError);
}

TEST(SvCorrectTest, PlantedViolationsAreRepaired) {
  constexpr std::size_t kK = 10000;
  constexpr int64_t kRounds = 50;
  const double alpha = SvAlphaSufficient(kK, kRounds, 0.5, kTwoPow20, 1e-3);
  NoiseSource source(14);
  int failures = 0;
  constexpr int kTrials = 200;
  for (int t = 0; t < kTrials; ++t) {
    std::vector<double> gaps(kK, 0.0);
    for (std::size_t j = 0; j < 30; ++j) {
      gaps[source.UniformIndex(kK)] = (j % 2 ? 5.0 : -5.0) * alpha;
    }
    const SvCorrection r = SvCorrect(gaps, kRounds, 0.5, kTwoPow20, alpha, source);
    double worst = 0;
    for (double x : r.residual) worst = std::max(worst, std::fabs(x));
    failures += worst > alpha;
  }
  EXPECT_LE(failures, 1);
}

}  // namespace
}  // namespace isvc
