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

#include "isvc/harness.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "isvc/errors.h"
#include "isvc/sparse_vector.h"

namespace isvc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Tags that keep workload and calibration seeds apart from trial seeds.
constexpr uint64_t kWorkloadTag = 0x776f726b6c6f6164ULL;
constexpr uint64_t kCalibrationTag = 0x63616c6962726174ULL;

double LinfError(std::span<const double> truth, std::span<const double> answers) {
  double worst = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double err = std::fabs(truth[i] - answers[i]);
    if (std::isnan(err)) return kInf;
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace

WorkloadSpec ParseWorkloadSpec(const std::string& text) {
  WorkloadSpec spec;
  if (text == "zeros") return spec;
  if (text == "spread") {
    spec.kind = WorkloadKind::kAdversarialSpread;
    return spec;
  }
  if (text == "uniform") {
    spec.kind = WorkloadKind::kUniform;
    return spec;
  }
  if (text.rfind("uniform:", 0) == 0) {
    spec.kind = WorkloadKind::kUniform;
    const std::string range = text.substr(8);
    const auto colon = range.find(':');
    try {
      if (colon == std::string::npos) throw std::invalid_argument("range");
      spec.low = std::stod(range.substr(0, colon));
      spec.high = std::stod(range.substr(colon + 1));
    } catch (const std::exception&) {
      throw InvalidParameterError("malformed workload range '" + text + "'");
    }
    if (!(spec.low < spec.high) || !std::isfinite(spec.low) ||
        !std::isfinite(spec.high)) {
      throw InvalidParameterError("workload range needs LO < HI, finite");
    }
    return spec;
  }
  throw InvalidParameterError("unknown workload kind '" + text +
                              "' (expected zeros, uniform[:LO:HI], spread)");
}

Workload MakeWorkload(const WorkloadSpec& spec, std::size_t k, uint64_t seed) {
  if (k < 2) throw InvalidParameterError("a workload needs k >= 2");
  std::vector<double> values(k, 0.0);
  switch (spec.kind) {
    case WorkloadKind::kZeros:
      break;
    case WorkloadKind::kUniform: {
      NoiseSource source(seed, 0);
      for (double& v : values) {
        v = spec.low + (spec.high - spec.low) * source.Uniform();
      }
      break;
    }
    case WorkloadKind::kAdversarialSpread:
      // Coordinate i answers 1000 i, so an answer's owner is readable from
      // its value in traces.
      for (std::size_t i = 0; i < k; ++i) values[i] = 1000.0 * static_cast<double>(i);
      break;
  }
  return Workload(std::move(values));
}

std::string MechanismName(MechanismId id) {
  switch (id) {
    case MechanismId::kIterative: return "iterative";
    case MechanismId::kHighProb: return "high_prob";
    case MechanismId::kExpected: return "expected";
    case MechanismId::kGaussian: return "gaussian";
    case MechanismId::kLaplaceSplit: return "laplace_split";
  }
  return "unknown";
}

MechanismId ParseMechanism(const std::string& name) {
  for (auto id : {MechanismId::kIterative, MechanismId::kHighProb,
                  MechanismId::kExpected, MechanismId::kGaussian,
                  MechanismId::kLaplaceSplit}) {
    if (MechanismName(id) == name) return id;
  }
  throw InvalidParameterError(
      "unknown mechanism '" + name +
      "' (expected iterative, high_prob, expected, gaussian, laplace_split)");
}

std::vector<int64_t> MeasureISets(std::span<const double> true_answers,
                                  std::span<const double> answers,
                                  const Schedule& schedule) {
  const int L = schedule.effective_stages();
  std::vector<double> errors(true_answers.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const double err = std::fabs(true_answers[i] - answers[i]);
    errors[i] = std::isnan(err) ? kInf : err;
  }
  std::sort(errors.begin(), errors.end());
  std::vector<int64_t> counts(L + 1);
  for (int t = 0; t <= L; ++t) {
    const auto first =
        std::lower_bound(errors.begin(), errors.end(), schedule.Tau(t));
    counts[t] = errors.end() - first;
  }
  return counts;
}

TrialReport RunTrial(const MechanismSpec& mechanism, const Workload& workload,
                     const PrivacyBudget& budget, uint64_t seed,
                     NoiseMode mode, uint64_t trial) {
  TrialReport report;
  report.mechanism = MechanismName(mechanism.id);
  report.k = static_cast<int64_t>(workload.k());
  report.epsilon = budget.epsilon();
  report.delta = budget.delta();
  report.trial = trial;
  report.seed = seed;

  const auto start = std::chrono::steady_clock::now();
  try {
    NoiseSource source(seed, 0, mode);
    AnswerVector result;
    switch (mechanism.id) {
      case MechanismId::kIterative: {
        const Schedule schedule =
            BuildSchedule(report.k, budget, mechanism.config.constants);
        const auto truth = workload.true_answers();
        auto observer = [&](int stage, std::span<const double> answers) {
          const double tau = schedule.Tau(stage);
          int64_t count = 0;
          for (std::size_t i = 0; i < truth.size(); ++i) {
            if (!(std::fabs(truth[i] - answers[i]) < tau)) ++count;
          }
          report.stage_trace.push_back(count);
        };
        result = IterativeSvc(workload, schedule, source, observer);
        const auto counts =
            MeasureISets(truth, result.answers, schedule);
        for (std::size_t t = 0; t < counts.size(); ++t) {
          report.violation_counts["tau_" + std::to_string(t)] = counts[t];
        }
        break;
      }
      case MechanismId::kHighProb:
        result = HighProbAnswer(workload, budget, mechanism.config, source);
        break;
      case MechanismId::kExpected:
        result = ExpectedErrorAnswer(workload, budget, mechanism.config, source);
        break;
      case MechanismId::kGaussian:
        result = GaussianMechanism(workload, budget, source);
        break;
      case MechanismId::kLaplaceSplit:
        result = LaplaceSplitBaseline(workload, budget, source);
        break;
    }
    report.linf_error = LinfError(workload.true_answers(), result.answers);
    report.budget_spent = result.budget_spent;
  } catch (const InfeasibleScheduleError& e) {
    throw InfeasibleScheduleError(
        report.mechanism + " trial " + std::to_string(trial) + " (k=" +
            std::to_string(report.k) + "): " + e.what(),
        e.stage(), e.overshoot());
  } catch (const InvalidParameterError& e) {
    throw InvalidParameterError(report.mechanism + " trial " +
                                std::to_string(trial) + " (k=" +
                                std::to_string(report.k) + "): " + e.what());
  }
  report.ratio_to_bound =
      report.linf_error / Bound(report.k, budget.epsilon(), budget.delta());
  report.wall_seconds = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
  return report;
}

void ParallelFor(std::size_t n, int parallelism,
                 const std::function<void(std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, parallelism)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto work = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) threads.emplace_back(work);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

uint64_t TrialSeed(uint64_t master_seed, std::size_t cell, std::size_t trial) {
  return DeriveSeed(master_seed, cell, trial);
}

double Quantile(std::vector<double> values, double q) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  if (lo == hi || values[lo] == values[hi]) return values[lo];
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

SweepSummary Summarize(const SweepCell& cell,
                       std::span<const TrialReport> reports,
                       double failure_target) {
  SweepSummary s;
  s.mechanism = MechanismName(cell.mechanism.id);
  s.k = cell.k;
  s.epsilon = cell.epsilon;
  s.delta = cell.delta;
  s.trials = reports.size();
  s.failure_target = failure_target;
  if (reports.empty()) return s;
  std::vector<double> linf;
  linf.reserve(reports.size());
  double ratio_sum = 0.0;
  std::size_t failures = 0;
  // Trial order, so the floating sums do not depend on scheduling.
  for (const auto& r : reports) {
    linf.push_back(r.linf_error);
    ratio_sum += r.ratio_to_bound;
    if (r.ratio_to_bound > failure_target) ++failures;
  }
  double linf_sum = 0.0;
  for (double v : linf) linf_sum += v;
  const double n = static_cast<double>(reports.size());
  s.mean_linf = linf_sum / n;
  s.median_linf = Quantile(linf, 0.5);
  s.p95_linf = Quantile(linf, 0.95);
  s.mean_ratio = ratio_sum / n;
  s.fail_freq = static_cast<double>(failures) / n;
  return s;
}

SweepResult RunSweep(const std::vector<SweepCell>& cells,
                     const SweepOptions& options) {
  if (cells.empty()) throw InvalidParameterError("sweep grid is empty");
  if (options.trials == 0) throw InvalidParameterError("trials must be >= 1");

  const std::size_t trials = options.trials;
  std::vector<Workload> workloads;
  std::vector<PrivacyBudget> budgets;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    workloads.push_back(MakeWorkload(options.workload,
                                     static_cast<std::size_t>(cells[c].k),
                                     DeriveSeed(options.master_seed, c, kWorkloadTag)));
    budgets.emplace_back(cells[c].epsilon, cells[c].delta);
  }

  const std::size_t jobs = cells.size() * trials;
  std::vector<std::optional<TrialReport>> slots(jobs);
  std::vector<std::string> errors(jobs);
  ParallelFor(jobs, options.parallelism, [&](std::size_t job) {
    const std::size_t c = job / trials;
    const std::size_t t = job % trials;
    try {
      slots[job] = RunTrial(cells[c].mechanism, workloads[c], budgets[c],
                            TrialSeed(options.master_seed, c, t), options.mode,
                            t);
    } catch (const std::exception& e) {
      errors[job] = e.what();
    }
  });

  SweepResult result;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<TrialReport> cell_reports;
    std::size_t failed = 0;
    std::string first_error;
    for (std::size_t t = 0; t < trials; ++t) {
      auto& slot = slots[c * trials + t];
      if (slot) {
        cell_reports.push_back(*slot);
      } else {
        if (failed++ == 0) first_error = errors[c * trials + t];
      }
    }

    double target = 0.0;
    if (options.failure_target) {
      target = *options.failure_target;
    } else {
      const MechanismSpec gaussian{MechanismId::kGaussian, {}};
      std::vector<double> ratios(trials);
      ParallelFor(trials, options.parallelism, [&](std::size_t t) {
        ratios[t] = RunTrial(gaussian, workloads[c], budgets[c],
                             DeriveSeed(options.master_seed ^ kCalibrationTag, c, t),
                             options.mode, t)
                        .ratio_to_bound;
      });
      target = Quantile(ratios, 0.99);
    }

    SweepSummary summary = Summarize(cells[c], cell_reports, target);
    summary.failed_trials = failed;
    summary.first_error = first_error;
    result.summaries.push_back(summary);
    for (auto& r : cell_reports) result.reports.push_back(std::move(r));
  }
  return result;
}

double SelectionInstance::EffectiveW() const {
  if (w > 0.0) return w;
  return (8.0 / epsilon) * std::log(400.0 / gamma);
}

std::vector<double> SelectionInstance::Gaps() const {
  if (k == 0 || good + bad > k) {
    throw InvalidParameterError("instance shape needs good + bad <= k, k >= 1");
  }
  if (!(epsilon > 0.0) || !(gamma > 0.0 && gamma <= 1.0)) {
    throw InvalidParameterError("instance needs epsilon > 0, gamma in (0, 1]");
  }
  std::vector<double> gaps(k, 0.0);
  const double width = EffectiveW();
  for (std::size_t i = 0; i < good; ++i) gaps[i] = threshold + width;
  for (std::size_t i = good; i < good + bad; ++i) gaps[i] = threshold;
  return gaps;
}

SelectionConditions CheckSelectionConditions(const SelectionInstance& spec) {
  SelectionConditions c;
  c.enough_good =
      static_cast<double>(spec.good) >= spec.gamma * static_cast<double>(spec.k);
  c.wide_gap =
      spec.EffectiveW() >= (8.0 / spec.epsilon) * std::log(400.0 / spec.gamma);
  c.few_bad = spec.good >= 2 * spec.bad;
  return c;
}

std::pair<double, double> WilsonInterval(std::size_t successes,
                                         std::size_t trials, double z) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double center = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half =
      z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

SelectionResult RunSelectionExperiment(const SelectionInstance& spec, std::size_t trials,
                       uint64_t seed, int parallelism, NoiseMode mode) {
  const std::vector<double> gaps = spec.Gaps();
  const GapView view(gaps);
  // 0 = good, 1 = other, 2 = no selection.
  std::vector<int> outcome(trials, 1);
  ParallelFor(trials, parallelism, [&](std::size_t t) {
    NoiseSource source(TrialSeed(seed, 0, t), 0, mode);
    const SelectorOutcome pick =
        PermutedAboveThreshold(view, spec.threshold, spec.epsilon, source);
    outcome[t] = !pick ? 2 : (*pick < spec.good ? 0 : 1);
  });
  SelectionResult r;
  r.trials = trials;
  for (int o : outcome) {
    if (o == 0) ++r.successes;
    if (o == 2) ++r.no_selection;
  }
  r.rate = trials ? static_cast<double>(r.successes) / static_cast<double>(trials)
                  : 0.0;
  std::tie(r.wilson_low, r.wilson_high) = WilsonInterval(r.successes, trials);
  return r;
}

const char kResultHeader[] =
    "mechanism,k,epsilon,delta,trial,seed,linf,ratio_to_bound,stage_trace_json,"
    "wall_ms";
const char kSummaryHeader[] =
    "mechanism,k,epsilon,delta,trials,mean_linf,median_linf,p95_linf,"
    "mean_ratio,fail_freq";

std::string FormatNumber(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string FormatTrace(std::span<const int64_t> trace) {
  std::string out = "[";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(trace[i]);
  }
  return out + "]";
}

std::string FormatResultRow(const TrialReport& r) {
  std::ostringstream out;
  // The trace holds commas, so it is quoted to keep the row parseable.
  out << r.mechanism << ',' << r.k << ',' << FormatNumber(r.epsilon) << ','
      << FormatNumber(r.delta) << ',' << r.trial << ',' << r.seed << ','
      << FormatNumber(r.linf_error) << ',' << FormatNumber(r.ratio_to_bound)
      << ",\"" << FormatTrace(r.stage_trace) << "\","
      << FormatNumber(r.wall_seconds * 1000.0);
  return out.str();
}

std::string FormatSummaryRow(const SweepSummary& s) {
  std::ostringstream out;
  out << s.mechanism << ',' << s.k << ',' << FormatNumber(s.epsilon) << ','
      << FormatNumber(s.delta) << ',' << s.trials << ','
      << FormatNumber(s.mean_linf) << ',' << FormatNumber(s.median_linf) << ','
      << FormatNumber(s.p95_linf) << ',' << FormatNumber(s.mean_ratio) << ','
      << FormatNumber(s.fail_freq);
  return out.str();
}

}  // namespace isvc
