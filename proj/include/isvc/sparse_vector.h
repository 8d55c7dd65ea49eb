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

// AboveThreshold, its permuted variant, and the multi-round sparse-vector
// corrector.
//
// Indices are 0-based throughout. A gap of +infinity marks a coordinate that
// has no released answer yet; it fires every comparison.

#ifndef ISVC_SPARSE_VECTOR_H_
#define ISVC_SPARSE_VECTOR_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "isvc/accounting.h"
#include "isvc/noise.h"

namespace isvc {

// Read-only access to the k query values g_i. Either wraps a span or a
// callable (the latter lets tests count accesses).
class GapView {
 public:
  explicit GapView(std::span<const double> values)
      : size_(values.size()), values_(values) {}
  GapView(std::size_t size, std::function<double(std::size_t)> accessor)
      : size_(size), accessor_(std::move(accessor)) {}

  std::size_t size() const { return size_; }
  double operator[](std::size_t i) const {
    return accessor_ ? accessor_(i) : values_[i];
  }

 private:
  std::size_t size_;
  std::span<const double> values_;
  std::function<double(std::size_t)> accessor_;
};

// Selected index, or nullopt when no query crossed the noisy threshold.
using SelectorOutcome = std::optional<std::size_t>;

// rho ~ Lap(2/eps) once; then for i = 0, 1, ... draws nu_i ~ Lap(4/eps) and
// returns the first i with g_i + nu_i >= T + rho. Reads exactly the scanned
// prefix of `gaps`.
SelectorOutcome AboveThreshold(const GapView& gaps, double threshold,
                               double epsilon, NoiseSource& source);

// AboveThreshold over a uniformly permuted order, mapped back to the original
// index. The permutation is drawn lazily alongside the scan.
SelectorOutcome PermutedAboveThreshold(const GapView& gaps, double threshold,
                                       double epsilon, NoiseSource& source);

// Non-negative gaps under point updates, with a PermutedAboveThreshold
// sampler whose cost does not grow with k.
//
// Given rho, each index fires independently (nu_i is fresh per position and
// the permutation is independent of the coins), and the permuted scan returns
// the earliest firing index in a uniform order, i.e. a uniform element of the
// firing set F. Select() samples exactly that: +infinity gaps are always in F,
// indices within `cold_margin` of the noisy threshold are tested one by one,
// and the remaining "cold" indices are thinned from a Bernoulli(p_cold)
// candidate stream and accepted with probability p_i / p_cold. The output
// law matches PermutedAboveThreshold; the random draws consumed differ.
class GapTracker {
 public:
  explicit GapTracker(std::size_t k);  // All gaps start at +infinity.

  std::size_t size() const { return gaps_.size(); }
  double gap(std::size_t i) const { return gaps_[i]; }
  std::span<const double> gaps() const { return gaps_; }
  std::size_t infinite_count() const { return infinite_.size(); }

  // Sets gap i (non-negative or +infinity).
  void Set(std::size_t i, double gap);

  // Number of indices with gap >= level (+infinity counts).
  std::size_t CountAtLeast(double level) const;

  SelectorOutcome Select(double threshold, double epsilon, NoiseSource& source);

 private:
  void RemoveInfinite(std::size_t i);

  std::vector<double> gaps_;
  std::vector<std::size_t> infinite_;
  std::vector<std::size_t> infinite_slot_;
  std::set<std::pair<double, std::size_t>> finite_;
};

// Per-round budget of the corrector: each half of eps_sv covers c_sv rounds
// under advanced composition at delta_sv / 2:
//   eps_round = (eps_sv / 2) / sqrt(8 c_sv ln(2 / delta_sv)).
double SvRoundEpsilon(int64_t c_sv, double epsilon_sv, double delta_sv);

// Budget consumed by SvCorrect, recomputed by advanced composition of the
// c_sv selector rounds and c_sv answer releases.
BudgetPair SvBudgetSpent(int64_t c_sv, double epsilon_sv, double delta_sv);

// An alpha_sv for which SvCorrect meets its guarantee with failure
// probability at most beta_sv, from a union bound over the selector noise
// (threshold slack alpha/4) and the answer noise:
//   alpha = (32 / eps_round) * ln(3 c_sv k / beta_sv).
double SvAlphaSufficient(int64_t k, int64_t c_sv, double epsilon_sv,
                         double delta_sv, double beta_sv);

struct SvCorrection {
  // b_i = g_i + Lap(1/eps_round) for corrected indices, 0 otherwise.
  std::vector<double> correction;
  // g_i - b_i; equals minus the answer noise for corrected indices (also
  // when g_i is infinite) and g_i otherwise.
  std::vector<double> residual;
  std::vector<bool> corrected;
  int64_t rounds_fired = 0;
  BudgetPair budget_spent;
};

// Up to c_sv rounds; each runs AboveThreshold on |residual| with threshold
// 3 alpha_sv / 4 at eps_round and, on a hit at i, re-releases g_i with
// Lap(1/eps_round) noise. Stops at the first round with no hit. If at most
// c_sv indices have |g_i| > alpha_sv / 2, then with probability
// >= 1 - beta_sv every |g_i - b_i| <= alpha_sv (see SvAlphaSufficient).
// Throws InvalidParameterError for c_sv outside [1, k] or bad budgets.
SvCorrection SvCorrect(std::span<const double> signed_gaps, int64_t c_sv,
                       double epsilon_sv, double delta_sv, double alpha_sv,
                       NoiseSource& source);

}  // namespace isvc

#endif  // ISVC_SPARSE_VECTOR_H_
