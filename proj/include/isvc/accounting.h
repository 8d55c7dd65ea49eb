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

// Privacy accounting: the B(k, eps, delta) error scale, basic and advanced
// composition, and the staged parameter schedule of the iterative corrector
// together with its per-stage budget chain.
//
// All logarithms are natural.

#ifndef ISVC_ACCOUNTING_H_
#define ISVC_ACCOUNTING_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace isvc {

// An (epsilon, delta) pair with 0 < epsilon <= 1 and 0 < delta <= 0.5.
class PrivacyBudget {
 public:
  // Throws InvalidParameterError when out of range.
  PrivacyBudget(double epsilon, double delta);

  double epsilon() const { return epsilon_; }
  double delta() const { return delta_; }

  // (epsilon / parts, delta / parts).
  PrivacyBudget Split(int parts) const;

  friend bool operator==(const PrivacyBudget&, const PrivacyBudget&) = default;

 private:
  double epsilon_;
  double delta_;
};

// Unvalidated (epsilon, delta) pair used for composition results.
struct BudgetPair {
  double epsilon = 0.0;
  double delta = 0.0;

  friend bool operator==(const BudgetPair&, const BudgetPair&) = default;
};

// (1/epsilon) * sqrt(k * ln(1/delta)).
double Bound(int64_t k, double epsilon, double delta);

// Sum of epsilons and deltas; empty input gives (0, 0).
BudgetPair BasicCompose(std::span<const BudgetPair> budgets);

// sqrt(2 m ln(1/delta')) * eps + m * eps * (e^eps - 1): the epsilon of m
// adaptive runs of an eps-DP algorithm, at additive delta'.
double AdvancedCompose(int64_t m, double epsilon, double delta_prime);

// Named constants of the staged schedule. Paper() holds the analysis
// constants; Practical() keeps kappa, lambda and every formula with smaller
// constants.
struct ScheduleConstants {
  std::string profile = "paper";
  double kappa = 0.9;
  double lambda = 0.95;
  // epsilon_0 = epsilon / (eps0_divisor * sqrt(ln(1/delta))).
  double eps0_divisor = 1000.0;
  // w_l = w_multiplier * ln(w_log_factor * k / m_l) / epsilon_l.
  double w_multiplier = 100.0;
  double w_log_factor = 500.0;
  // Stages whose unrounded size kappa^l * k falls below this are dropped.
  double m_min = 1.0;

  static ScheduleConstants Paper();
  // eps0_divisor 25, w_multiplier 16, w_log_factor 450.
  static ScheduleConstants Practical();
  // "paper" or "practical"; throws InvalidParameterError otherwise.
  static ScheduleConstants ForProfile(const std::string& name);
};

struct Stage {
  int index = 0;        // 1-based stage number l.
  int64_t m = 0;        // Number of selections in this stage.
  double epsilon = 0;   // Per-selection budget epsilon_l.
  double w = 0;         // Gap width w_l.
  double threshold = 0; // T_l.
  double tau = 0;       // T_l + w_l.
};

struct Schedule {
  ScheduleConstants constants;
  int64_t k = 0;
  double epsilon = 0;
  double delta = 0;
  int nominal_stages = 0;   // ceil(10 log_{1/kappa} ln k), at least 1.
  double epsilon0 = 0;
  double threshold0 = 0;    // T_0 = 2 w_1.
  double w_after_last = 0;  // w_{L+1}, the term T_L needs.
  std::vector<Stage> stages;

  int effective_stages() const { return static_cast<int>(stages.size()); }
  // tau_t for t in [0, effective_stages()]; tau_0 = T_0 + w_0 = T_0.
  double Tau(int t) const;
  // Sum of m_l over all stages.
  int64_t TotalSelections() const;
};

// Builds the stage table for k queries at the given budget:
//   m_l = ceil(kappa^l k), eps_l = (eps_0 / sqrt(k)) / sqrt(l lambda^l),
//   w_l as above, T_l = 4 (w_1 + ... + w_{l-1}) + 3 w_l + 2 w_{l+1}.
// Stages stop at the nominal count, when kappa^l k < m_min, or as soon as the
// rounded sizes stop strictly decreasing. Throws InvalidParameterError for
// k < 2 and InfeasibleScheduleError if the budget chain exceeds epsilon.
Schedule BuildSchedule(int64_t k, const PrivacyBudget& budget,
                       const ScheduleConstants& constants =
                           ScheduleConstants::Paper());

// Per-stage (eps'_l, delta'_l) with delta'_l = 0.5^l delta and
// eps'_l = AdvancedCompose(m_l, eps_l, delta'_l).
std::vector<BudgetPair> ScheduleBudgetChain(const Schedule& schedule);

// Fixed-width table: l, m_l, eps_l, w_l, T_l, tau_l, eps'_l, delta'_l.
std::string FormatScheduleTable(const Schedule& schedule);
// Same columns, comma-separated with a header row.
std::string FormatScheduleCsv(const Schedule& schedule);

}  // namespace isvc

#endif  // ISVC_ACCOUNTING_H_
