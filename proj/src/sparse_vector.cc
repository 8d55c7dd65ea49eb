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

#include <cmath>
#include <iterator>
#include <limits>
#include <string>

#include "isvc/errors.h"

namespace isvc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void CheckEpsilon(double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw InvalidParameterError("selector epsilon must be positive, got " +
                                std::to_string(epsilon));
  }
}

// Pr[nu >= x] for nu ~ Lap(scale).
double LaplaceUpperTail(double x, double scale) {
  if (x <= 0.0) return 1.0 - 0.5 * std::exp(x / scale);
  return 0.5 * std::exp(-x / scale);
}

}  // namespace

SelectorOutcome AboveThreshold(const GapView& gaps, double threshold,
                               double epsilon, NoiseSource& source) {
  CheckEpsilon(epsilon);
  const double rho = source.Laplace(2.0 / epsilon);
  const double noisy_threshold = threshold + rho;
  const double nu_scale = 4.0 / epsilon;
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    const double nu = source.Laplace(nu_scale);
    if (gaps[i] + nu >= noisy_threshold) return i;
  }
  return std::nullopt;
}

SelectorOutcome PermutedAboveThreshold(const GapView& gaps, double threshold,
                                       double epsilon, NoiseSource& source) {
  CheckEpsilon(epsilon);
  if (gaps.size() == 0) return std::nullopt;
  const double rho = source.Laplace(2.0 / epsilon);
  const double noisy_threshold = threshold + rho;
  const double nu_scale = 4.0 / epsilon;
  LazyPermutation order(gaps.size(), source);
  while (order.has_next()) {
    const std::size_t i = order.Next();
    const double nu = source.Laplace(nu_scale);
    if (gaps[i] + nu >= noisy_threshold) return i;
  }
  return std::nullopt;
}

GapTracker::GapTracker(std::size_t k)
    : gaps_(k, kInf), infinite_(k), infinite_slot_(k) {
  for (std::size_t i = 0; i < k; ++i) {
    infinite_[i] = i;
    infinite_slot_[i] = i;
  }
}

void GapTracker::RemoveInfinite(std::size_t i) {
  const std::size_t slot = infinite_slot_[i];
  const std::size_t last = infinite_.back();
  infinite_[slot] = last;
  infinite_slot_[last] = slot;
  infinite_.pop_back();
}

void GapTracker::Set(std::size_t i, double gap) {
  if (!(gap >= 0.0)) {
    throw InvalidParameterError("gaps must be non-negative");
  }
  const double old = gaps_[i];
  if (std::isinf(old)) {
    if (std::isinf(gap)) return;
    RemoveInfinite(i);
  } else {
    finite_.erase({old, i});
  }
  gaps_[i] = gap;
  if (std::isinf(gap)) {
    infinite_slot_[i] = infinite_.size();
    infinite_.push_back(i);
  } else {
    finite_.insert({gap, i});
  }
}

std::size_t GapTracker::CountAtLeast(double level) const {
  if (std::isinf(level)) return infinite_.size();
  const auto first = finite_.lower_bound({level, 0});
  return infinite_.size() +
         static_cast<std::size_t>(std::distance(first, finite_.end()));
}

SelectorOutcome GapTracker::Select(double threshold, double epsilon,
                                   NoiseSource& source) {
  CheckEpsilon(epsilon);
  const std::size_t k = gaps_.size();
  if (k == 0) return std::nullopt;

  if (source.zero()) {
    // Identity order, no noise: the literal scan.
    for (std::size_t i = 0; i < k; ++i) {
      if (gaps_[i] >= threshold) return i;
    }
    return std::nullopt;
  }

  const double nu_scale = 4.0 / epsilon;
  const double level = threshold + source.Laplace(2.0 / epsilon);
  const double kd = static_cast<double>(k < 2 ? 2 : k);
  const double cold_margin = nu_scale * std::log(kd);
  const double cutoff = level - cold_margin;
  const double p_cold = 0.5 / kd;

  std::vector<std::size_t> fired;
  for (auto it = finite_.lower_bound({cutoff, 0}); it != finite_.end(); ++it) {
    if (source.Uniform() < LaplaceUpperTail(level - it->first, nu_scale)) {
      fired.push_back(it->second);
    }
  }

  const double log_miss = std::log1p(-p_cold);
  double position = -1.0;
  while (true) {
    position += 1.0 + std::floor(std::log(source.Uniform()) / log_miss);
    if (position >= static_cast<double>(k)) break;
    const auto i = static_cast<std::size_t>(position);
    const double g = gaps_[i];
    if (std::isinf(g) || g >= cutoff) continue;
    if (source.Uniform() * p_cold < LaplaceUpperTail(level - g, nu_scale)) {
      fired.push_back(i);
    }
  }

  const std::size_t total = infinite_.size() + fired.size();
  if (total == 0) return std::nullopt;
  const std::size_t pick = source.UniformIndex(total);
  if (pick < infinite_.size()) return infinite_[pick];
  return fired[pick - infinite_.size()];
}

double SvRoundEpsilon(int64_t c_sv, double epsilon_sv, double delta_sv) {
  if (c_sv < 1) throw InvalidParameterError("c_sv must be >= 1");
  if (!(epsilon_sv > 0.0) || !std::isfinite(epsilon_sv)) {
    throw InvalidParameterError("epsilon_sv must be positive");
  }
  if (!(delta_sv > 0.0 && delta_sv < 1.0)) {
    throw InvalidParameterError("delta_sv must lie in (0, 1)");
  }
  return (epsilon_sv / 2.0) /
         std::sqrt(8.0 * static_cast<double>(c_sv) * std::log(2.0 / delta_sv));
}

BudgetPair SvBudgetSpent(int64_t c_sv, double epsilon_sv, double delta_sv) {
  const double eps_round = SvRoundEpsilon(c_sv, epsilon_sv, delta_sv);
  const double half = AdvancedCompose(c_sv, eps_round, delta_sv / 2.0);
  const BudgetPair parts[] = {{half, delta_sv / 2.0}, {half, delta_sv / 2.0}};
  return BasicCompose(parts);
}

double SvAlphaSufficient(int64_t k, int64_t c_sv, double epsilon_sv,
                         double delta_sv, double beta_sv) {
  if (!(beta_sv > 0.0 && beta_sv < 1.0)) {
    throw InvalidParameterError("beta_sv must lie in (0, 1)");
  }
  const double eps_round = SvRoundEpsilon(c_sv, epsilon_sv, delta_sv);
  return (32.0 / eps_round) *
         std::log(3.0 * static_cast<double>(c_sv) * static_cast<double>(k) /
                  beta_sv);
}

SvCorrection SvCorrect(std::span<const double> signed_gaps, int64_t c_sv,
                       double epsilon_sv, double delta_sv, double alpha_sv,
                       NoiseSource& source) {
  const auto k = static_cast<int64_t>(signed_gaps.size());
  if (c_sv < 1 || c_sv > k) {
    throw InvalidParameterError("c_sv must lie in [1, k], got " +
                                std::to_string(c_sv));
  }
  if (!(alpha_sv > 0.0) || !std::isfinite(alpha_sv)) {
    throw InvalidParameterError("alpha_sv must be positive and finite");
  }
  const double eps_round = SvRoundEpsilon(c_sv, epsilon_sv, delta_sv);

  SvCorrection out;
  out.correction.assign(signed_gaps.size(), 0.0);
  out.residual.assign(signed_gaps.begin(), signed_gaps.end());
  out.corrected.assign(signed_gaps.size(), false);
  out.budget_spent = SvBudgetSpent(c_sv, epsilon_sv, delta_sv);

  const GapView magnitudes(signed_gaps.size(), [&out](std::size_t i) {
    return std::fabs(out.residual[i]);
  });
  const double threshold = 0.75 * alpha_sv;
  for (int64_t round = 0; round < c_sv; ++round) {
    const SelectorOutcome hit =
        AboveThreshold(magnitudes, threshold, eps_round, source);
    if (!hit) break;
    const std::size_t i = *hit;
    const double noise = source.Laplace(1.0 / eps_round);
    out.correction[i] = signed_gaps[i] + noise;
    out.residual[i] = -noise;
    out.corrected[i] = true;
    ++out.rounds_fired;
  }
  return out;
}

}  // namespace isvc
