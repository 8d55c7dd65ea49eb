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
#include <string>
#include <utility>

#include "isvc/errors.h"

namespace isvc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

Workload::Workload(std::vector<double> true_answers)
    : true_answers_(std::move(true_answers)) {
  if (true_answers_.size() < 2) {
    throw InvalidParameterError("a workload needs k >= 2 queries");
  }
  for (double v : true_answers_) {
    if (!std::isfinite(v)) {
      throw InvalidParameterError("true answers must be finite");
    }
  }
}

AnswerVector IterativeSvc(const Workload& workload, const Schedule& schedule,
                          NoiseSource& source, const StageObserver& observer) {
  const std::size_t k = workload.k();
  if (schedule.k != static_cast<int64_t>(k)) {
    throw InvalidParameterError(
        "schedule built for k = " + std::to_string(schedule.k) +
        " but workload has k = " + std::to_string(k));
  }

  AnswerVector out;
  out.answers.assign(k, kInf);
  GapTracker gaps(k);
  for (const Stage& stage : schedule.stages) {
    if (stage.m < 1 || !(stage.epsilon > 0.0)) {
      throw InvalidParameterError("malformed schedule stage " +
                                  std::to_string(stage.index));
    }
    const double answer_scale = 2.0 / stage.epsilon;
    for (int64_t j = 0; j < stage.m; ++j) {
      const SelectorOutcome pick =
          gaps.Select(stage.threshold, 0.5 * stage.epsilon, source);
      if (!pick) continue;
      const std::size_t i = *pick;
      out.answers[i] = workload[i] + source.Laplace(answer_scale);
      gaps.Set(i, std::fabs(workload[i] - out.answers[i]));
    }
    if (observer) observer(stage.index, out.answers);
  }
  const auto chain = ScheduleBudgetChain(schedule);
  out.budget_spent = BasicCompose(chain);
  return out;
}

int64_t HighProbCorrectionCount(std::size_t k, double c_frac) {
  if (!(c_frac > 0.0)) throw InvalidParameterError("c_frac must be positive");
  const double kd = static_cast<double>(k);
  const double raw = std::ceil(c_frac * kd / std::pow(std::log(kd), 10));
  return static_cast<int64_t>(std::clamp(raw, 1.0, kd));
}

AnswerVector HighProbCorrect(const Workload& workload,
                             std::span<const double> initial,
                             const PrivacyBudget& budget,
                             const HighProbConfig& config,
                             NoiseSource& source) {
  const std::size_t k = workload.k();
  if (initial.size() != k) {
    throw InvalidParameterError("initial answers do not match the workload");
  }
  if (!(config.alpha_mult > 0.0)) {
    throw InvalidParameterError("alpha_mult must be positive");
  }
  const PrivacyBudget half = budget.Split(2);
  const int64_t c_sv = HighProbCorrectionCount(k, config.c_frac);
  const double alpha_sv =
      config.alpha_mult *
      Bound(static_cast<int64_t>(k), budget.epsilon(), budget.delta());

  std::vector<double> signed_gaps(k);
  for (std::size_t i = 0; i < k; ++i) {
    signed_gaps[i] = workload[i] - initial[i];
  }
  const SvCorrection fix = SvCorrect(signed_gaps, c_sv, half.epsilon(),
                                     half.delta(), alpha_sv, source);
  AnswerVector out;
  out.answers.assign(initial.begin(), initial.end());
  for (std::size_t i = 0; i < k; ++i) {
    if (fix.corrected[i]) out.answers[i] = workload[i] - fix.residual[i];
  }
  out.budget_spent = fix.budget_spent;
  return out;
}

AnswerVector HighProbAnswer(const Workload& workload,
                            const PrivacyBudget& budget,
                            const HighProbConfig& config, NoiseSource& source,
                            const StageObserver& observer) {
  const PrivacyBudget half = budget.Split(2);
  const Schedule schedule = BuildSchedule(static_cast<int64_t>(workload.k()),
                                          half, config.constants);
  const AnswerVector first = IterativeSvc(workload, schedule, source, observer);
  AnswerVector out =
      HighProbCorrect(workload, first.answers, budget, config, source);
  const BudgetPair parts[] = {first.budget_spent, out.budget_spent};
  out.budget_spent = BasicCompose(parts);
  return out;
}

double GaussianSigma(std::size_t k, const PrivacyBudget& budget) {
  return std::sqrt(2.0 * static_cast<double>(k) *
                   std::log(1.25 / budget.delta())) /
         budget.epsilon();
}

AnswerVector GaussianMechanism(const Workload& workload,
                               const PrivacyBudget& budget,
                               NoiseSource& source) {
  const double sigma = GaussianSigma(workload.k(), budget);
  AnswerVector out;
  out.answers.resize(workload.k());
  for (std::size_t i = 0; i < workload.k(); ++i) {
    out.answers[i] = workload[i] + source.Gaussian(sigma);
  }
  out.budget_spent = {budget.epsilon(), budget.delta()};
  return out;
}

double LaplaceSplitEpsilon(std::size_t k, const PrivacyBudget& budget) {
  const auto m = static_cast<int64_t>(k);
  const double target = budget.epsilon();
  const double floor = target * (1.0 - 1e-6);
  double lo = 0.0;
  double hi = target;
  if (AdvancedCompose(m, hi, budget.delta()) <= target) return hi;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double spent = AdvancedCompose(m, mid, budget.delta());
    if (spent > target) {
      hi = mid;
    } else if (spent < floor) {
      lo = mid;
    } else {
      return mid;
    }
  }
  throw InfeasibleScheduleError(
      "no per-query epsilon composes to within 1e-6 of the budget", 0, 0.0);
}

AnswerVector LaplaceSplitBaseline(const Workload& workload,
                                  const PrivacyBudget& budget,
                                  NoiseSource& source) {
  const double eps_query = LaplaceSplitEpsilon(workload.k(), budget);
  AnswerVector out;
  out.answers.resize(workload.k());
  for (std::size_t i = 0; i < workload.k(); ++i) {
    out.answers[i] = workload[i] + source.Laplace(1.0 / eps_query);
  }
  out.budget_spent = {
      AdvancedCompose(static_cast<int64_t>(workload.k()), eps_query,
                      budget.delta()),
      budget.delta()};
  return out;
}

double ExpectedErrorCutoff(std::size_t k, const PrivacyBudget& budget) {
  const double kd = static_cast<double>(k);
  return std::pow(kd, 10) *
         Bound(static_cast<int64_t>(k), budget.epsilon(), budget.delta());
}

bool SelectFirstRun(std::span<const double> c, double cutoff) {
  double largest = -kInf;
  for (double v : c) largest = std::max(largest, v);
  return largest <= cutoff;
}

AnswerVector ChooseBetweenRuns(const Workload& workload, AnswerVector a,
                               AnswerVector b, const PrivacyBudget& budget,
                               NoiseSource& source) {
  const std::size_t k = workload.k();
  if (a.answers.size() != k || b.answers.size() != k) {
    throw InvalidParameterError("candidate runs do not match the workload");
  }
  const PrivacyBudget third = budget.Split(3);
  const double sigma = GaussianSigma(k, third);
  std::vector<double> c(k);
  for (std::size_t i = 0; i < k; ++i) {
    c[i] = std::fabs(workload[i] - a.answers[i]) + source.Gaussian(sigma);
  }
  const BudgetPair parts[] = {a.budget_spent, b.budget_spent,
                              {third.epsilon(), third.delta()}};
  AnswerVector out =
      SelectFirstRun(c, ExpectedErrorCutoff(k, budget)) ? std::move(a)
                                                        : std::move(b);
  out.budget_spent = BasicCompose(parts);
  return out;
}

AnswerVector ExpectedErrorAnswer(const Workload& workload,
                                 const PrivacyBudget& budget,
                                 const HighProbConfig& config,
                                 NoiseSource& source,
                                 const StageObserver& observer) {
  const PrivacyBudget third = budget.Split(3);
  NoiseSource first_source = source.Fork();
  NoiseSource second_source = source.Fork();
  NoiseSource select_source = source.Fork();
  AnswerVector a =
      HighProbAnswer(workload, third, config, first_source, observer);
  AnswerVector b = HighProbAnswer(workload, third, config, second_source);
  return ChooseBetweenRuns(workload, std::move(a), std::move(b), budget,
                           select_source);
}

}  // namespace isvc
