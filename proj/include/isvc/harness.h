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

// Monte Carlo harness: workload generation, single trials with error
// measurement and stage tracing, parallel sweeps, and the CSV wire formats.
//
// This is the only place that compares released answers with true answers.

#ifndef ISVC_HARNESS_H_
#define ISVC_HARNESS_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "isvc/accounting.h"
#include "isvc/mechanisms.h"
#include "isvc/noise.h"

namespace isvc {

enum class WorkloadKind { kZeros, kUniform, kAdversarialSpread };

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::kZeros;
  double low = 0.0;   // kUniform only.
  double high = 1.0;  // kUniform only.
};

// Parses "zeros", "uniform", "uniform:LO:HI" and "spread"; throws
// InvalidParameterError for anything else.
WorkloadSpec ParseWorkloadSpec(const std::string& text);

Workload MakeWorkload(const WorkloadSpec& spec, std::size_t k, uint64_t seed);

enum class MechanismId { kIterative, kHighProb, kExpected, kGaussian, kLaplaceSplit };

std::string MechanismName(MechanismId id);
// Accepts the names above; throws InvalidParameterError otherwise.
MechanismId ParseMechanism(const std::string& name);

struct MechanismSpec {
  MechanismId id = MechanismId::kIterative;
  HighProbConfig config;  // constants also drive kIterative's schedule.
};

// For t = 0..L, the number of i with |q_i - a_i| >= tau_t. Unreleased
// (+infinity) answers count at every threshold.
std::vector<int64_t> MeasureISets(std::span<const double> true_answers,
                                  std::span<const double> answers,
                                  const Schedule& schedule);

struct TrialReport {
  std::string mechanism;
  int64_t k = 0;
  double epsilon = 0;
  double delta = 0;
  uint64_t trial = 0;
  uint64_t seed = 0;
  double linf_error = 0;  // +infinity if some coordinate was never released.
  double ratio_to_bound = 0;
  // "tau_<t>" -> count of |q_i - a_i| >= tau_t against the schedule the
  // mechanism ran (kIterative only; empty otherwise).
  std::map<std::string, int64_t> violation_counts;
  // trace[l-1] = |I^l_l|, measured after stage l (kIterative only).
  std::vector<int64_t> stage_trace;
  BudgetPair budget_spent;
  double wall_seconds = 0;
};

// Runs one mechanism on `workload` with NoiseSource(seed, 0, mode). Errors
// from the mechanism are rethrown with the trial context prepended.
TrialReport RunTrial(const MechanismSpec& mechanism, const Workload& workload,
                     const PrivacyBudget& budget, uint64_t seed,
                     NoiseMode mode = NoiseMode::kRandom, uint64_t trial = 0);

// Calls fn(i) for i in [0, n) on up to `parallelism` threads. Each index runs
// exactly once; callers write results into slot i so the outcome does not
// depend on scheduling.
void ParallelFor(std::size_t n, int parallelism,
                 const std::function<void(std::size_t)>& fn);

struct SweepCell {
  MechanismSpec mechanism;
  int64_t k = 0;
  double epsilon = 1.0;
  double delta = 0.5;
};

struct SweepOptions {
  std::size_t trials = 1;
  uint64_t master_seed = 0;
  int parallelism = 1;
  WorkloadSpec workload;
  NoiseMode mode = NoiseMode::kRandom;
  // Failure is linf > target * B(k, eps, delta). Unset: the empirical p99 of
  // the Gaussian baseline's ratio on the same cell.
  std::optional<double> failure_target;
};

struct SweepSummary {
  std::string mechanism;
  int64_t k = 0;
  double epsilon = 0;
  double delta = 0;
  std::size_t trials = 0;  // Completed trials.
  double mean_linf = 0;
  double median_linf = 0;
  double p95_linf = 0;
  double mean_ratio = 0;
  double fail_freq = 0;
  double failure_target = 0;
  std::size_t failed_trials = 0;  // Trials that threw.
  std::string first_error;
};

struct SweepResult {
  std::vector<TrialReport> reports;  // Cell-major, trial-minor.
  std::vector<SweepSummary> summaries;
};

// Seed of trial t in cell c.
uint64_t TrialSeed(uint64_t master_seed, std::size_t cell, std::size_t trial);

// Executes every cell's trials with seeds TrialSeed(master, cell, trial). The
// result is a pure function of (cells, options) minus wall times.
SweepResult RunSweep(const std::vector<SweepCell>& cells,
                     const SweepOptions& options);

SweepSummary Summarize(const SweepCell& cell,
                       std::span<const TrialReport> reports,
                       double failure_target);

// Linear-interpolated quantile of unsorted values, q in [0, 1].
double Quantile(std::vector<double> values, double q);

// A permuted-AboveThreshold instance with `good` coordinates at T + w,
// `bad` coordinates at T (inside (T - w, T + w)), and zeros elsewhere. Good
// coordinates come first, so zero-mode runs select index 0.
struct SelectionInstance {
  std::size_t k = 100000;
  std::size_t good = 1000;
  std::size_t bad = 500;
  double gamma = 0.01;
  double epsilon = 1.0;
  double threshold = 100.0;
  double w = 0.0;  // 0 selects (8 / epsilon) ln(400 / gamma).

  double EffectiveW() const;
  std::vector<double> Gaps() const;
};

struct SelectionConditions {
  bool enough_good = false;  // good >= gamma k
  bool wide_gap = false;     // w >= (8 / epsilon) ln(400 / gamma)
  bool few_bad = false;      // good >= 2 bad
  bool all() const { return enough_good && wide_gap && few_bad; }
};

SelectionConditions CheckSelectionConditions(const SelectionInstance& spec);

struct SelectionResult {
  std::size_t trials = 0;
  std::size_t successes = 0;
  std::size_t no_selection = 0;
  double rate = 0;
  double wilson_low = 0;
  double wilson_high = 0;
};

// 95% Wilson score interval for successes / trials.
std::pair<double, double> WilsonInterval(std::size_t successes,
                                         std::size_t trials, double z = 1.96);

// Trial t uses NoiseSource(TrialSeed(seed, 0, t), 0, mode).
SelectionResult RunSelectionExperiment(const SelectionInstance& spec, std::size_t trials,
                       uint64_t seed, int parallelism,
                       NoiseMode mode = NoiseMode::kRandom);

// CSV wire formats.
extern const char kResultHeader[];
extern const char kSummaryHeader[];
std::string FormatNumber(double v);
std::string FormatTrace(std::span<const int64_t> trace);
std::string FormatResultRow(const TrialReport& report);
std::string FormatSummaryRow(const SweepSummary& summary);

}  // namespace isvc

#endif  // ISVC_HARNESS_H_
