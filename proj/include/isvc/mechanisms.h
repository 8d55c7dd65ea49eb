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

// Mechanisms answering k sensitivity-1 queries under (epsilon, delta)-DP:
// the iterative sparse-vector corrector, the high-probability wrapper that
// finishes with a sparse-vector correction, the expected-error wrapper that
// picks between two independent runs, and the Gaussian and Laplace baselines.
//
// A mechanism only ever sees the true answers q_i through the Workload; error
// measurement lives in the harness.

#ifndef ISVC_MECHANISMS_H_
#define ISVC_MECHANISMS_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "isvc/accounting.h"
#include "isvc/noise.h"
#include "isvc/sparse_vector.h"

namespace isvc {

class Workload {
 public:
  // Requires k >= 2 finite values.
  explicit Workload(std::vector<double> true_answers);

  std::size_t k() const { return true_answers_.size(); }
  std::span<const double> true_answers() const { return true_answers_; }
  double operator[](std::size_t i) const { return true_answers_[i]; }

 private:
  std::vector<double> true_answers_;
};

// Released answers (+infinity for a coordinate never released) and the
// budget recomputed from the sub-calls that produced them.
struct AnswerVector {
  std::vector<double> answers;
  BudgetPair budget_spent;
};

// Called after every stage of the iterative corrector with the 1-based stage
// number and the answers so far.
using StageObserver =
    std::function<void(int stage, std::span<const double> answers)>;

// Iterative sparse-vector correction with an explicit schedule. Every a_i
// starts at +infinity; for each stage l and each of its m_l steps, a permuted
// AboveThreshold at 0.5 eps_l with threshold T_l picks i* on |q_i - a_i|, and
// a_{i*} <- q_{i*} + Lap(2/eps_l). A step with no pick still spends its
// budget. Throws InvalidParameterError if the schedule was built for a
// different k.
AnswerVector IterativeSvc(const Workload& workload, const Schedule& schedule,
                          NoiseSource& source,
                          const StageObserver& observer = {});

struct HighProbConfig {
  ScheduleConstants constants = ScheduleConstants::Paper();
  // c_sv = ceil(c_frac * k / (ln k)^10), clamped to [1, k].
  double c_frac = 1.0;
  // alpha_sv = alpha_mult * Bound(k, eps, delta).
  double alpha_mult = 2.0;
};

int64_t HighProbCorrectionCount(std::size_t k, double c_frac);

// The correction stage of HighProbAnswer on its own: sparse-vector correction
// of `initial` at (eps/2, delta/2). Exposed so tests can feed it planted
// residuals.
AnswerVector HighProbCorrect(const Workload& workload,
                             std::span<const double> initial,
                             const PrivacyBudget& budget,
                             const HighProbConfig& config, NoiseSource& source);

// IterativeSvc at (eps/2, delta/2), then HighProbCorrect on its residuals.
AnswerVector HighProbAnswer(const Workload& workload,
                            const PrivacyBudget& budget,
                            const HighProbConfig& config, NoiseSource& source,
                            const StageObserver& observer = {});

// sigma = sqrt(2 k ln(1.25/delta)) / eps.
double GaussianSigma(std::size_t k, const PrivacyBudget& budget);

// a_i = q_i + N(0, sigma^2).
AnswerVector GaussianMechanism(const Workload& workload,
                               const PrivacyBudget& budget,
                               NoiseSource& source);

// Largest per-query epsilon with AdvancedCompose(k, eps', delta) <= eps, by
// bisection; the result satisfies AdvancedCompose(...) in [eps(1-1e-6), eps].
double LaplaceSplitEpsilon(std::size_t k, const PrivacyBudget& budget);

// a_i = q_i + Lap(1/eps') with eps' = LaplaceSplitEpsilon(k, budget).
AnswerVector LaplaceSplitBaseline(const Workload& workload,
                                  const PrivacyBudget& budget,
                                  NoiseSource& source);

// k^10 * Bound(k, eps, delta).
double ExpectedErrorCutoff(std::size_t k, const PrivacyBudget& budget);

// The output rule: `a` when max_i c_i <= cutoff, else `b`. Looks at nothing
// but c and the cutoff to decide.
bool SelectFirstRun(std::span<const double> c, double cutoff);

// Given the two candidate runs, spends eps/3 of Gaussian noise on
// |q_i - a_i| and applies SelectFirstRun. budget_spent is the basic
// composition of a's, b's and the Gaussian step's budgets.
AnswerVector ChooseBetweenRuns(const Workload& workload, AnswerVector a,
                               AnswerVector b, const PrivacyBudget& budget,
                               NoiseSource& source);

// Two HighProbAnswer runs at (eps/3, delta/3) on forked noise streams, then
// ChooseBetweenRuns.
AnswerVector ExpectedErrorAnswer(const Workload& workload,
                                 const PrivacyBudget& budget,
                                 const HighProbConfig& config,
                                 NoiseSource& source,
                                 const StageObserver& observer = {});

}  // namespace isvc

#endif  // ISVC_MECHANISMS_H_
