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

#include "isvc/mechanisms.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "gtest/gtest.h"
#include "isvc/accounting.h"
#include "isvc/errors.h"
#include "isvc/noise.h"
#include "isvc/sparse_vector.h"

namespace isvc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kTwoPow20 = std::ldexp(1.0, -20);

Workload Spread(std::size_t k, double offset = 0.0) {
  std::vector<double> q(k);
  for (std::size_t i = 0; i < k; ++i) q[i] = offset + 3.5 * static_cast<double>(i);
  return Workload(std::move(q));
}

double LinfError(const Workload& w, const AnswerVector& a) {
  double worst = 0;
  for (std::size_t i = 0; i < w.k(); ++i) {
    worst = std::max(worst, std::fabs(w[i] - a.answers[i]));
  }
  return worst;
}

bool Within(const BudgetPair& spent, const PrivacyBudget& budget) {
  return spent.epsilon <= budget.epsilon() * (1 + 1e-12) &&
         spent.delta <= budget.delta() * (1 + 1e-12);
}

HighProbConfig PracticalConfig() {
  HighProbConfig config;
  config.constants = ScheduleConstants::Practical();
  return config;
}

TEST(WorkloadTest, ValidatesEntries) {
  EXPECT_THROW(Workload({1.0}), InvalidParameterError);
  EXPECT_THROW(Workload({1.0, kInf}), InvalidParameterError);
  EXPECT_THROW(Workload({std::nan(""), 0.0}), InvalidParameterError);
  EXPECT_EQ(Workload({1.0, 2.0}).k(), 2u);
}

class ZeroNoiseTest : public ::testing::TestWithParam<std::size_t> {};

TEST_P(ZeroNoiseTest, EveryMechanismIsExact) {
  const std::size_t k = GetParam();
  const Workload w = Spread(k, -17.25);
  const std::vector<std::pair<HighProbConfig, PrivacyBudget>> cases = {
      {HighProbConfig{}, PrivacyBudget(1.0, kTwoPow20)},
      {HighProbConfig{}, PrivacyBudget(0.1, 0.25)},
      {HighProbConfig{}, PrivacyBudget(0.5, 1e-12)},
      {PracticalConfig(), PrivacyBudget(1.0, kTwoPow20)},
      {PracticalConfig(), PrivacyBudget(0.1, std::ldexp(1.0, -40))},
  };
  for (const auto& [config, budget] : cases) {
    NoiseSource zero = NoiseSource::Zero();
    const Schedule s =
        BuildSchedule(static_cast<int64_t>(k), budget, config.constants);
    EXPECT_EQ(LinfError(w, IterativeSvc(w, s, zero)), 0.0);
    EXPECT_EQ(LinfError(w, HighProbAnswer(w, budget, config, zero)), 0.0);
    EXPECT_EQ(LinfError(w, ExpectedErrorAnswer(w, budget, config, zero)), 0.0);
    EXPECT_EQ(LinfError(w, GaussianMechanism(w, budget, zero)), 0.0);
    EXPECT_EQ(LinfError(w, LaplaceSplitBaseline(w, budget, zero)), 0.0);
  }
}

INSTANTIATE_TEST_SUITE_P(Sizes, ZeroNoiseTest, ::testing::Values(16, 1024));

TEST(IterativeSvcTest, SingleStepTrace) {
  const Workload w({7.0, -3.0});
  Schedule s = BuildSchedule(2, PrivacyBudget(1.0, 0.1));
  s.stages.resize(1);
  s.stages[0].m = 1;
  NoiseSource zero = NoiseSource::Zero();
  const AnswerVector a = IterativeSvc(w, s, zero);
  EXPECT_EQ(a.answers[0], 7.0);
  EXPECT_EQ(a.answers[1], kInf);
  EXPECT_EQ(LinfError(w, a), kInf);
}

TEST(IterativeSvcTest, RejectsMismatchedSchedule) {
  const Schedule s = BuildSchedule(10, PrivacyBudget(1.0, 0.1));
  NoiseSource source(1);
  EXPECT_THROW(IterativeSvc(Spread(11), s, source), InvalidParameterError);
}

TEST(IterativeSvcTest, ObserverSeesEveryStage) {
  const Workload w = Spread(256);
  const Schedule s = BuildSchedule(256, PrivacyBudget(1.0, kTwoPow20),
                                   ScheduleConstants::Practical());
  std::vector<int> seen;
  NoiseSource source(2);
  const AnswerVector a = IterativeSvc(
      w, s, source, [&](int stage, std::span<const double> answers) {
        EXPECT_EQ(answers.size(), 256u);
        seen.push_back(stage);
      });
  std::vector<int> expected(s.effective_stages());
  std::iota(expected.begin(), expected.end(), 1);
  EXPECT_EQ(seen, expected);
  EXPECT_TRUE(std::isfinite(LinfError(w, a)));
}

TEST(IterativeSvcTest, BudgetAudit) {
  for (int64_t k : {16, 1024, 4096}) {
    for (const PrivacyBudget budget :
         {PrivacyBudget(1.0, kTwoPow20), PrivacyBudget(0.2, 0.01)}) {
      const Schedule s = BuildSchedule(k, budget, ScheduleConstants::Practical());
      NoiseSource source(3);
      const AnswerVector a = IterativeSvc(Spread(k), s, source);
      EXPECT_EQ(a.budget_spent, BasicCompose(ScheduleBudgetChain(s)));
      EXPECT_TRUE(Within(a.budget_spent, budget));
    }
  }
}

TEST(IterativeSvcTest, TranslationInvariance) {
  const PrivacyBudget budget(1.0, kTwoPow20);
  const Schedule s =
      BuildSchedule(512, budget, ScheduleConstants::Practical());
  NoiseSource a_source(4), b_source(4);
  const Workload base = Spread(512);
  const Workload shifted = Spread(512, 1024.0);
  const AnswerVector a = IterativeSvc(base, s, a_source);
  const AnswerVector b = IterativeSvc(shifted, s, b_source);
  for (std::size_t i = 0; i < 512; ++i) {
    EXPECT_NEAR(a.answers[i] - base[i], b.answers[i] - shifted[i], 1e-6);
  }
}

// Reversing the coordinates of the workload leaves the error distribution
// unchanged: compare the mean error of the first coordinate in one order
// with the mean error of the same query placed last.
TEST(IterativeSvcTest, ErrorDistributionIgnoresCoordinateOrder) {
  constexpr std::size_t kK = 64;
  const PrivacyBudget budget(1.0, kTwoPow20);
  const Schedule s = BuildSchedule(kK, budget, ScheduleConstants::Practical());
  std::vector<double> forward(kK), backward(kK);
  for (std::size_t i = 0; i < kK; ++i) {
    forward[i] = static_cast<double>(i * i);
    backward[kK - 1 - i] = forward[i];
  }
  const Workload f(forward), b(backward);
  NoiseSource source(5);
  constexpr int kTrials = 3000;
  std::vector<double> ef, eb;
  for (int t = 0; t < kTrials; ++t) {
    ef.push_back(std::fabs(IterativeSvc(f, s, source).answers[0] - f[0]));
    eb.push_back(std::fabs(IterativeSvc(b, s, source).answers[kK - 1] - b[kK - 1]));
  }
  auto mean_var = [](const std::vector<double>& v) {
    double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double s2 = 0;
    for (double x : v) s2 += (x - m) * (x - m);
    return std::pair(m, s2 / (v.size() - 1));
  };
  const auto [mf, vf] = mean_var(ef);
  const auto [mb, vb] = mean_var(eb);
  EXPECT_NEAR(mf, mb, 4 * std::sqrt((vf + vb) / kTrials));
}

TEST(HighProbTest, CorrectionCountClamps) {
  EXPECT_EQ(HighProbCorrectionCount(1000, 1.0), 1);
  EXPECT_EQ(HighProbCorrectionCount(1000, 1e30), 1000);
  EXPECT_EQ(HighProbCorrectionCount(10000, 25 * std::pow(std::log(1e4), 10) / 1e4), 25);
  EXPECT_THROW(HighProbCorrectionCount(10, 0.0), InvalidParameterError);
}

TEST(HighProbTest, PlantedResidualsAreRepaired) {
  constexpr std::size_t kK = 10000;
  constexpr int64_t kRounds = 25;
  const PrivacyBudget budget(1.0, kTwoPow20);
  const PrivacyBudget half = budget.Split(2);
  HighProbConfig config;
  config.c_frac = kRounds * std::pow(std::log(double{kK}), 10) / kK;
  ASSERT_EQ(HighProbCorrectionCount(kK, config.c_frac), kRounds);
  const double needed = SvAlphaSufficient(kK, kRounds, half.epsilon(),
                                          half.delta(), 1e-3);
  config.alpha_mult = needed / Bound(kK, budget.epsilon(), budget.delta());
  const double alpha = config.alpha_mult * Bound(kK, 1.0, kTwoPow20);

  const Workload w(std::vector<double>(kK, 0.0));
  NoiseSource source(6);
  int successes = 0;
  constexpr int kTrials = 500;
  for (int t = 0; t < kTrials; ++t) {
    std::vector<double> initial(kK, 0.0);
    for (int j = 0; j < 20; ++j) {
      initial[source.UniformIndex(kK)] = (j % 2 ? 3.0 : -3.0) * alpha;
    }
    const AnswerVector a = HighProbCorrect(w, initial, budget, config, source);
    successes += LinfError(w, a) <= alpha;
    EXPECT_TRUE(Within(a.budget_spent, half));
  }
  EXPECT_GE(successes, 0.99 * kTrials);
}

TEST(HighProbTest, BudgetAudit) {
  const PrivacyBudget budget(1.0, kTwoPow20);
  const HighProbConfig config = PracticalConfig();
  NoiseSource source(7);
  const AnswerVector a = HighProbAnswer(Spread(1024), budget, config, source);
  const Schedule s = BuildSchedule(1024, budget.Split(2), config.constants);
  const BudgetPair parts[] = {
      BasicCompose(ScheduleBudgetChain(s)),
      SvBudgetSpent(HighProbCorrectionCount(1024, config.c_frac), 0.5,
                    kTwoPow20 / 2)};
  EXPECT_EQ(a.budget_spent, BasicCompose(parts));
  EXPECT_TRUE(Within(a.budget_spent, budget));
}

TEST(GaussianTest, SigmaCalibration) {
  EXPECT_DOUBLE_EQ(GaussianSigma(1024, PrivacyBudget(1.0, kTwoPow20)),
                   std::sqrt(2048 * std::log(1.25 * 1048576)));
}

TEST(GaussianTest, MedianAbsoluteNoise) {
  // sigma = sqrt(2 * 2 * 25) / 1 = 10.
  const PrivacyBudget budget(1.0, 1.25 * std::exp(-25.0));
  ASSERT_NEAR(GaussianSigma(2, budget), 10.0, 1e-12);
  const Workload w({0.0, 0.0});
  NoiseSource source(8);
  std::vector<double> first;
  for (int t = 0; t < 10000; ++t) {
    first.push_back(std::fabs(GaussianMechanism(w, budget, source).answers[0]));
  }
  std::nth_element(first.begin(), first.begin() + 5000, first.end());
  EXPECT_NEAR(first[5000], 6.745, 0.2);
}

TEST(GaussianTest, ExpectedMaxOverSigma) {
  const PrivacyBudget budget(1.0, kTwoPow20);
  const Workload w(std::vector<double>(1024, 0.0));
  const double sigma = GaussianSigma(1024, budget);
  NoiseSource source(9);
  double sum = 0;
  for (int t = 0; t < 1000; ++t) sum += LinfError(w, GaussianMechanism(w, budget, source));
  const double ratio = sum / 1000 / sigma;
  const double scale = std::sqrt(2 * std::log(1024.0));
  EXPECT_GE(ratio, 0.85 * scale);
  EXPECT_LE(ratio, 1.15 * scale);
  // Exact expectation of the max of 1024 half-normals, by quadrature.
  EXPECT_NEAR(ratio, 3.44187, 0.05);
}

TEST(LaplaceSplitTest, BisectionLandsInBand) {
  for (std::size_t k : {2, 100, 1024, 100000}) {
    for (const PrivacyBudget budget :
         {PrivacyBudget(1.0, kTwoPow20), PrivacyBudget(0.1, 0.3)}) {
      const double e = LaplaceSplitEpsilon(k, budget);
      const double spent = AdvancedCompose(static_cast<int64_t>(k), e, budget.delta());
      EXPECT_LE(spent, budget.epsilon());
      EXPECT_GE(spent, budget.epsilon() * (1 - 1e-6));
    }
  }
}

TEST(LaplaceSplitTest, WorseThanGaussianByAtLeastHalf) {
  const PrivacyBudget budget(1.0, kTwoPow20);
  const Workload w(std::vector<double>(1024, 0.0));
  NoiseSource source(10);
  double laplace = 0, gaussian = 0;
  for (int t = 0; t < 1000; ++t) {
    laplace += LinfError(w, LaplaceSplitBaseline(w, budget, source));
    gaussian += LinfError(w, GaussianMechanism(w, budget, source));
  }
  EXPECT_GE(laplace, 1.5 * gaussian);
}

TEST(SelectionRuleTest, DependsOnlyOnMaximum) {
  EXPECT_TRUE(SelectFirstRun(std::vector<double>{1, 2, 3}, 3.0));
  EXPECT_FALSE(SelectFirstRun(std::vector<double>{1, 3.5, 3}, 3.0));
  EXPECT_FALSE(SelectFirstRun(std::vector<double>{kInf, 0}, 1e300));
}

TEST(SelectionRuleTest, StubbedRunsPickExpectedBranch) {
  constexpr std::size_t kK = 8;
  const PrivacyBudget budget(1.0, kTwoPow20);
  const Workload w(std::vector<double>(kK, 5.0));
  const double cutoff = ExpectedErrorCutoff(kK, budget);
  EXPECT_DOUBLE_EQ(cutoff, std::pow(8.0, 10) * Bound(8, 1.0, kTwoPow20));
  const AnswerVector b{std::vector<double>(kK, -1.0), {0.1, 1e-9}};

  AnswerVector exact{std::vector<double>(kK, 5.0), {0.2, 1e-9}};
  NoiseSource zero = NoiseSource::Zero();
  EXPECT_EQ(ChooseBetweenRuns(w, exact, b, budget, zero).answers, exact.answers);

  AnswerVector far = exact;
  far.answers[3] = 5.0 + 2 * cutoff;
  EXPECT_EQ(ChooseBetweenRuns(w, far, b, budget, zero).answers, b.answers);
}

TEST(ExpectedErrorTest, BudgetAudit) {
  const PrivacyBudget budget(0.9, 0.03);
  const PrivacyBudget third = budget.Split(3);
  const std::vector<BudgetPair> thirds(3, {third.epsilon(), third.delta()});
  const BudgetPair whole = BasicCompose(thirds);
  EXPECT_NEAR(whole.epsilon, 0.9, 1e-15);
  EXPECT_NEAR(whole.delta, 0.03, 1e-15);
  NoiseSource source(11);
  const AnswerVector a =
      ExpectedErrorAnswer(Spread(1024), budget, PracticalConfig(), source);
  EXPECT_TRUE(Within(a.budget_spent, budget));
  EXPECT_TRUE(std::isfinite(LinfError(Spread(1024), a)));
}

TEST(ExpectedErrorTest, Deterministic) {
  const PrivacyBudget budget(1.0, kTwoPow20);
  NoiseSource a(12), b(12);
  EXPECT_EQ(ExpectedErrorAnswer(Spread(300), budget, PracticalConfig(), a).answers,
            ExpectedErrorAnswer(Spread(300), budget, PracticalConfig(), b).answers);
}

}  // namespace
}  // namespace isvc
