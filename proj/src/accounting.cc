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

#include "isvc/accounting.h"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

#include "isvc/errors.h"

namespace isvc {
namespace {

std::string Num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Nominal stage count ceil(10 log_{1/kappa} ln k), at least 1.
int NominalStages(int64_t k, double kappa) {
  const double ln_ln_k = std::log(std::log(static_cast<double>(k)));
  const double raw = std::ceil(10.0 * ln_ln_k / std::log(1.0 / kappa));
  return raw < 1.0 ? 1 : static_cast<int>(raw);
}

}  // namespace

PrivacyBudget::PrivacyBudget(double epsilon, double delta)
    : epsilon_(epsilon), delta_(delta) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) {
    throw InvalidParameterError("epsilon must lie in (0, 1], got " +
                                std::to_string(epsilon));
  }
  if (!(delta > 0.0 && delta <= 0.5)) {
    throw InvalidParameterError("delta must lie in (0, 0.5], got " +
                                Num(delta));
  }
}

PrivacyBudget PrivacyBudget::Split(int parts) const {
  if (parts < 1) throw InvalidParameterError("Split requires parts >= 1");
  return PrivacyBudget(epsilon_ / parts, delta_ / parts);
}

double Bound(int64_t k, double epsilon, double delta) {
  if (k < 1) throw InvalidParameterError("Bound requires k >= 1");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw InvalidParameterError("Bound requires epsilon > 0");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidParameterError("Bound requires delta in (0, 1), got " +
                                Num(delta));
  }
  return std::sqrt(static_cast<double>(k) * std::log(1.0 / delta)) / epsilon;
}

BudgetPair BasicCompose(std::span<const BudgetPair> budgets) {
  BudgetPair total;
  for (const auto& b : budgets) {
    if (b.epsilon < 0.0 || b.delta < 0.0) {
      throw InvalidParameterError("composed budgets must be non-negative");
    }
    total.epsilon += b.epsilon;
    total.delta += b.delta;
  }
  return total;
}

double AdvancedCompose(int64_t m, double epsilon, double delta_prime) {
  if (m < 1) throw InvalidParameterError("AdvancedCompose requires m >= 1");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw InvalidParameterError("AdvancedCompose requires epsilon >= 0");
  }
  if (!(delta_prime > 0.0 && delta_prime < 1.0)) {
    throw InvalidParameterError(
        "AdvancedCompose requires delta' in (0, 1), got " + Num(delta_prime));
  }
  const double md = static_cast<double>(m);
  return std::sqrt(2.0 * md * std::log(1.0 / delta_prime)) * epsilon +
         md * epsilon * std::expm1(epsilon);
}

ScheduleConstants ScheduleConstants::Paper() { return ScheduleConstants{}; }

ScheduleConstants ScheduleConstants::Practical() {
  ScheduleConstants c;
  c.profile = "practical";
  c.eps0_divisor = 25.0;
  c.w_multiplier = 16.0;
  c.w_log_factor = 450.0;
  return c;
}

ScheduleConstants ScheduleConstants::ForProfile(const std::string& name) {
  if (name == "paper") return Paper();
  if (name == "practical") return Practical();
  throw InvalidParameterError("unknown constants profile '" + name +
                              "' (expected paper or practical)");
}

double Schedule::Tau(int t) const {
  if (t < 0 || t > effective_stages()) {
    throw InvalidParameterError("threshold index out of range");
  }
  return t == 0 ? threshold0 : stages[t - 1].tau;
}

int64_t Schedule::TotalSelections() const {
  int64_t total = 0;
  for (const auto& s : stages) total += s.m;
  return total;
}

Schedule BuildSchedule(int64_t k, const PrivacyBudget& budget,
                       const ScheduleConstants& constants) {
  if (k < 2) {
    throw InvalidParameterError("schedule requires k >= 2, got " +
                                std::to_string(k));
  }
  const auto& c = constants;
  if (!(c.kappa > 0.0 && c.kappa < 1.0) || !(c.lambda > 0.0 && c.lambda < 1.0) ||
      !(c.eps0_divisor > 0.0) || !(c.w_multiplier > 0.0) ||
      !(c.w_log_factor > 0.0) || !(c.m_min >= 1.0)) {
    throw InvalidParameterError("schedule constants out of range");
  }

  Schedule s;
  s.constants = constants;
  s.k = k;
  s.epsilon = budget.epsilon();
  s.delta = budget.delta();
  s.nominal_stages = NominalStages(k, c.kappa);
  s.epsilon0 =
      budget.epsilon() / (c.eps0_divisor * std::sqrt(std::log(1.0 / budget.delta())));

  const double kd = static_cast<double>(k);
  auto stage_epsilon = [&](int l) {
    return s.epsilon0 / std::sqrt(kd) /
           std::sqrt(static_cast<double>(l) * std::pow(c.lambda, l));
  };
  auto stage_w = [&](int l, int64_t m) {
    return c.w_multiplier *
           std::log(c.w_log_factor * kd / static_cast<double>(m)) /
           stage_epsilon(l);
  };

  int64_t previous_m = k + 1;
  for (int l = 1; l <= s.nominal_stages; ++l) {
    const double unrounded = std::pow(c.kappa, l) * kd;
    const auto m = static_cast<int64_t>(std::ceil(unrounded));
    if (unrounded < c.m_min || m >= previous_m) break;
    Stage stage;
    stage.index = l;
    stage.m = m;
    stage.epsilon = stage_epsilon(l);
    stage.w = stage_w(l, m);
    s.stages.push_back(stage);
    previous_m = m;
  }
  if (s.stages.empty()) {
    throw InvalidParameterError("m_min leaves no stages for k = " +
                                std::to_string(k));
  }

  const int L = s.effective_stages();
  {
    const int next = L + 1;
    const auto m_next = static_cast<int64_t>(
        std::ceil(std::pow(c.kappa, next) * kd));
    s.w_after_last = stage_w(next, m_next < 1 ? 1 : m_next);
  }
  double w_prefix = 0.0;  // w_1 + ... + w_{l-1}
  for (int l = 1; l <= L; ++l) {
    Stage& stage = s.stages[l - 1];
    const double w_next = l < L ? s.stages[l].w : s.w_after_last;
    stage.threshold = 4.0 * w_prefix + 3.0 * stage.w + 2.0 * w_next;
    stage.tau = stage.threshold + stage.w;
    w_prefix += stage.w;
  }
  s.threshold0 = 2.0 * s.stages.front().w;

  const auto chain = ScheduleBudgetChain(s);
  double cumulative = 0.0;
  for (int l = 1; l <= L; ++l) {
    cumulative += chain[l - 1].epsilon;
    if (cumulative > budget.epsilon()) {
      double total = cumulative;
      for (int j = l; j < L; ++j) total += chain[j].epsilon;
      throw InfeasibleScheduleError(
          "schedule exceeds epsilon = " + Num(budget.epsilon()) +
              ": cumulative eps' first overshoots at stage " +
              std::to_string(l) + ", total " + Num(total) + " (overshoot " +
              Num(total - budget.epsilon()) + ")",
          l, total - budget.epsilon());
    }
  }
  return s;
}

std::vector<BudgetPair> ScheduleBudgetChain(const Schedule& schedule) {
  std::vector<BudgetPair> chain;
  chain.reserve(schedule.stages.size());
  for (const auto& stage : schedule.stages) {
    const double delta_l = std::ldexp(schedule.delta, -stage.index);
    chain.push_back(
        {AdvancedCompose(stage.m, stage.epsilon, delta_l), delta_l});
  }
  return chain;
}

std::string FormatScheduleTable(const Schedule& schedule) {
  const auto chain = ScheduleBudgetChain(schedule);
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%5s %12s %13s %13s %13s %13s %13s %13s\n",
                "l", "m_l", "eps_l", "w_l", "T_l", "tau_l", "eps'_l",
                "delta'_l");
  out << line;
  std::snprintf(line, sizeof(line), "%5d %12s %13s %13s %13.6e %13.6e %13s %13s\n",
                0, "-", "-", "0", schedule.threshold0, schedule.threshold0,
                "-", "-");
  out << line;
  for (std::size_t i = 0; i < schedule.stages.size(); ++i) {
    const auto& st = schedule.stages[i];
    std::snprintf(line, sizeof(line),
                  "%5d %12lld %13.6e %13.6e %13.6e %13.6e %13.6e %13.6e\n",
                  st.index, static_cast<long long>(st.m), st.epsilon, st.w,
                  st.threshold, st.tau, chain[i].epsilon, chain[i].delta);
    out << line;
  }
  return out.str();
}

std::string FormatScheduleCsv(const Schedule& schedule) {
  const auto chain = ScheduleBudgetChain(schedule);
  std::ostringstream out;
  out << "l,m_l,eps_l,w_l,T_l,tau_l,eps_prime_l,delta_prime_l\n";
  char line[256];
  for (std::size_t i = 0; i < schedule.stages.size(); ++i) {
    const auto& st = schedule.stages[i];
    std::snprintf(line, sizeof(line), "%d,%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  st.index, static_cast<long long>(st.m), st.epsilon, st.w,
                  st.threshold, st.tau, chain[i].epsilon, chain[i].delta);
    out << line;
  }
  return out.str();
}

}  // namespace isvc
