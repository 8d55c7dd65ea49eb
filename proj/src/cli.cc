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

#include "isvc/cli.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "isvc/accounting.h"
#include "isvc/errors.h"
#include "isvc/harness.h"

namespace isvc {
namespace {

constexpr char kOverrideHelp[] =
    "Override a named constant, NAME=VALUE. Names: eps0_divisor (divides "
    "epsilon in epsilon_0), w_multiplier and w_log_factor (gap width "
    "w_l = w_multiplier ln(w_log_factor k / m_l) / eps_l), m_min (smallest "
    "stage size kept), c_frac (final correction count multiplier), "
    "alpha_mult (final correction error in units of B(k, eps, delta))";

// Options shared by run and sweep.
struct ExperimentFlags {
  std::string profile = "practical";
  std::vector<std::string> overrides;
  std::size_t trials = 100;
  uint64_t seed = 1;
  int threads = 0;
  std::string out_path;
  std::string format = "table";
  std::string workload = "zeros";
  bool zero_noise = false;
};

double ParseNumber(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw InvalidParameterError(std::string("malformed ") + what + " '" +
                                text + "'");
  }
}

int DefaultThreads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv(kThreadsEnv)) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

HighProbConfig MakeConfig(const std::string& profile,
                          const std::vector<std::string>& overrides) {
  HighProbConfig config;
  config.constants = ScheduleConstants::ForProfile(profile);
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw InvalidParameterError("override '" + item + "' is not NAME=VALUE");
    }
    const std::string name = item.substr(0, eq);
    const double value = ParseNumber(item.substr(eq + 1), "override value");
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw InvalidParameterError("override " + name + " must be positive");
    }
    if (name == "eps0_divisor") {
      config.constants.eps0_divisor = value;
    } else if (name == "w_multiplier") {
      config.constants.w_multiplier = value;
    } else if (name == "w_log_factor") {
      config.constants.w_log_factor = value;
    } else if (name == "m_min") {
      config.constants.m_min = value;
    } else if (name == "c_frac") {
      config.c_frac = value;
    } else if (name == "alpha_mult") {
      config.alpha_mult = value;
    } else {
      throw InvalidParameterError("unknown override '" + name + "'");
    }
  }
  return config;
}

std::string Describe(const std::string& profile,
                     const std::vector<std::string>& overrides) {
  std::string text = "profile=" + profile;
  for (const auto& o : overrides) text += " " + o;
  return text;
}

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

void PrintSummaries(const std::vector<SweepSummary>& summaries,
                    const std::string& format, std::ostream& out) {
  if (format == "csv") {
    out << kSummaryHeader << '\n';
    for (const auto& s : summaries) out << FormatSummaryRow(s) << '\n';
    return;
  }
  char line[256];
  std::snprintf(line, sizeof(line), "%-14s %8s %8s %10s %7s %12s %12s %12s %10s %9s\n",
                "mechanism", "k", "epsilon", "delta", "trials", "mean_linf",
                "median_linf", "p95_linf", "mean_ratio", "fail_freq");
  out << line;
  for (const auto& s : summaries) {
    std::snprintf(line, sizeof(line),
                  "%-14s %8lld %8.4g %10.4g %7zu %12.5g %12.5g %12.5g %10.4f %9.4f\n",
                  s.mechanism.c_str(), static_cast<long long>(s.k), s.epsilon,
                  s.delta, s.trials, s.mean_linf, s.median_linf, s.p95_linf,
                  s.mean_ratio, s.fail_freq);
    out << line;
  }
  for (const auto& s : summaries) {
    if (s.failed_trials > 0) {
      out << "# " << s.mechanism << " k=" << s.k << ": " << s.failed_trials
          << " trials failed; first error: " << s.first_error << '\n';
    }
  }
}

// Returns false if the file could not be written.
bool WriteResults(const std::string& path, const std::string& provenance,
                  const SweepResult& result) {
  std::ofstream file(path);
  if (!file) return false;
  file << "# " << provenance << '\n' << kResultHeader << '\n';
  for (const auto& r : result.reports) file << FormatResultRow(r) << '\n';
  file.flush();
  return static_cast<bool>(file);
}

void AddExperimentFlags(CLI::App* cmd, ExperimentFlags& f) {
  cmd->add_option("--trials", f.trials, "Monte Carlo trials per cell (count)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed,
                  "Master seed; trial seeds are derived from it (64-bit)");
  cmd->add_option("--profile", f.profile,
                  "Schedule constants: 'paper' (analysis constants) or "
                  "'practical' (desk-scale constants)")
      ->check(CLI::IsMember({"paper", "practical"}));
  cmd->add_option("--set", f.overrides, kOverrideHelp);
  cmd->add_option("--threads", f.threads,
                  std::string("Worker threads (count); default from ") +
                      kThreadsEnv + " or 1");
  cmd->add_option("--out", f.out_path,
                  "Write one CSV result row per trial to this path");
  cmd->add_option("--format", f.format, "Summary format: table or csv")
      ->check(CLI::IsMember({"table", "csv"}));
  cmd->add_option("--workload", f.workload,
                  "True answers: zeros, uniform[:LO:HI], or spread");
  cmd->add_flag("--zero-noise", f.zero_noise,
                "Replace every noise draw with 0 and every permutation with "
                "the identity");
}

int RunExperiment(const std::vector<SweepCell>& cells, const ExperimentFlags& f,
                  std::ostream& out,
                  std::ostream& err) {
  SweepOptions options;
  options.trials = f.trials;
  options.master_seed = f.seed;
  options.parallelism = DefaultThreads(f.threads);
  options.workload = ParseWorkloadSpec(f.workload);
  options.mode = f.zero_noise ? NoiseMode::kZero : NoiseMode::kRandom;
  const SweepResult result = RunSweep(cells, options);
  std::string provenance = Describe(f.profile, f.overrides) +
                           " seed=" + std::to_string(f.seed) +
                           " workload=" + f.workload +
                           (f.zero_noise ? " noise=zero" : "");
  if (!f.out_path.empty() && !WriteResults(f.out_path, provenance, result)) {
    err << "error: cannot write results to '" << f.out_path << "'\n";
    return kExitIo;
  }
  out << "# " << provenance << '\n';
  PrintSummaries(result.summaries, f.format, out);
  return kExitOk;
}

}  // namespace

double ParseDelta(const std::string& text) {
  auto exponent = [&](const std::string& tail) {
    const double n = ParseNumber(tail, "delta exponent");
    if (!(n >= 0.0) || !std::isfinite(n)) {
      throw InvalidParameterError("delta exponent must be non-negative");
    }
    return n;
  };
  if (text.rfind("2^-", 0) == 0) {
    const double n = exponent(text.substr(3));
    if (n == std::floor(n) && n < 1074) {
      return std::ldexp(1.0, -static_cast<int>(n));
    }
    return std::exp2(-n);
  }
  if (text.rfind("e^-", 0) == 0) return std::exp(-exponent(text.substr(3)));
  return ParseNumber(text, "delta");
}

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"isvc: answer k sensitivity-1 queries under (epsilon, delta)-DP "
               "with iterative sparse-vector correction, plus baselines and "
               "a Monte Carlo harness"};
  app.require_subcommand(1);

  // schedule
  auto* schedule_cmd = app.add_subcommand(
      "schedule", "Print the stage table and its privacy budget chain");
  int64_t sched_k = 0;
  std::string sched_eps, sched_delta, sched_profile = "paper",
                                      sched_format = "table";
  std::vector<std::string> sched_overrides;
  schedule_cmd->add_option("k", sched_k, "Number of queries (k >= 2)")->required();
  schedule_cmd->add_option("epsilon", sched_eps, "Privacy loss epsilon in (0, 1]")
      ->required();
  schedule_cmd
      ->add_option("delta", sched_delta,
                   "Failure probability delta in (0, 0.5]; decimal, 2^-N or e^-N")
      ->required();
  schedule_cmd->add_option("--profile", sched_profile, "paper or practical")
      ->check(CLI::IsMember({"paper", "practical"}));
  schedule_cmd->add_option("--format", sched_format, "table or csv")
      ->check(CLI::IsMember({"table", "csv"}));
  schedule_cmd->add_option("--set", sched_overrides, kOverrideHelp);

  // compose
  auto* compose_cmd = app.add_subcommand(
      "compose", "Composition calculator: 'basic E1 D1 E2 D2 ...' or "
                 "'advanced M EPS DELTA_PRIME'");
  std::string compose_kind;
  std::vector<std::string> compose_args;
  compose_cmd->add_option("kind", compose_kind, "basic or advanced")
      ->required()
      ->check(CLI::IsMember({"basic", "advanced"}));
  compose_cmd->add_option("values", compose_args,
                          "basic: (epsilon, delta) pairs; advanced: runs m, "
                          "per-run epsilon, delta' in (0, 1)");

  // run
  auto* run_cmd = app.add_subcommand(
      "run", "Monte Carlo trials of one mechanism at one (k, epsilon, delta)");
  std::string run_mech, run_eps, run_delta;
  int64_t run_k = 0;
  ExperimentFlags run_flags;
  run_cmd->add_option("mechanism", run_mech,
                      "iterative, high_prob, expected, gaussian, laplace_split")
      ->required();
  run_cmd->add_option("k", run_k, "Number of queries (k >= 2)")->required();
  run_cmd->add_option("epsilon", run_eps, "Privacy loss epsilon in (0, 1]")
      ->required();
  run_cmd->add_option("delta", run_delta,
                      "delta in (0, 0.5]; decimal, 2^-N or e^-N")
      ->required();
  AddExperimentFlags(run_cmd, run_flags);

  // sweep
  auto* sweep_cmd = app.add_subcommand(
      "sweep", "Monte Carlo grid over mechanisms x k x epsilon x delta");
  std::string sweep_mechs = "gaussian,laplace_split,expected",
              sweep_ks = "1024,4096", sweep_eps = "1", sweep_deltas = "2^-20";
  ExperimentFlags sweep_flags;
  sweep_cmd->add_option("--mechanisms", sweep_mechs, "Comma-separated mechanisms");
  sweep_cmd->add_option("--k", sweep_ks, "Comma-separated query counts");
  sweep_cmd->add_option("--epsilon", sweep_eps, "Comma-separated epsilons");
  sweep_cmd->add_option("--delta", sweep_deltas,
                        "Comma-separated deltas (decimal, 2^-N or e^-N)");
  AddExperimentFlags(sweep_cmd, sweep_flags);

  auto* select_cmd = app.add_subcommand(
      "lemma1",
      "Measure how often permuted AboveThreshold lands in the good set");
  SelectionInstance instance;
  std::size_t select_trials = 2000;
  uint64_t select_seed = 1;
  int select_threads = 0;
  double select_slack = 0.02;
  bool select_zero = false;
  select_cmd->add_option("--k", instance.k, "Number of queries (count)");
  select_cmd->add_option("--gamma", instance.gamma,
                        "Required good fraction gamma in (0, 1]");
  select_cmd->add_option("--good", instance.good,
                        "Coordinates at T + w (count)");
  select_cmd->add_option("--bad", instance.bad,
                        "Coordinates at T, inside (T - w, T + w) (count)");
  select_cmd->add_option("--epsilon", instance.epsilon,
                        "Selector privacy loss epsilon (> 0)");
  select_cmd->add_option("--threshold", instance.threshold,
                        "Threshold T (query units)");
  select_cmd->add_option("--w", instance.w,
                        "Gap width w (query units); 0 = (8/epsilon) ln(400/gamma)");
  select_cmd->add_option("--trials", select_trials, "Trials (count)")
      ->check(CLI::PositiveNumber);
  select_cmd->add_option("--seed", select_seed, "Master seed (64-bit)");
  select_cmd->add_option("--threads", select_threads, "Worker threads (count)");
  select_cmd->add_option("--slack", select_slack,
                        "Allowed shortfall below 0.6 for the Wilson lower "
                        "bound before exiting with status 3");
  select_cmd->add_flag("--zero-noise", select_zero,
                      "Zero noise and identity permutation");

  std::vector<std::string> argv_storage;
  argv_storage.push_back("isvc");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    // Help requests exit 0; everything else is a usage error.
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (schedule_cmd->parsed()) {
      const PrivacyBudget budget(ParseNumber(sched_eps, "epsilon"),
                                 ParseDelta(sched_delta));
      if (sched_k < 2) {
        err << "usage error: schedule requires k >= 2\n";
        return kExitUsage;
      }
      const HighProbConfig config = MakeConfig(sched_profile, sched_overrides);
      Schedule schedule;
      try {
        schedule = BuildSchedule(sched_k, budget, config.constants);
      } catch (const InfeasibleScheduleError& e) {
        err << "infeasible schedule: " << e.what() << '\n';
        return kExitInfeasible;
      }
      const auto chain = ScheduleBudgetChain(schedule);
      const BudgetPair total = BasicCompose(chain);
      char buf[256];
      out << "# " << Describe(sched_profile, sched_overrides) << " k=" << sched_k
          << " epsilon=" << FormatNumber(budget.epsilon())
          << " delta=" << FormatNumber(budget.delta()) << '\n';
      std::snprintf(buf, sizeof(buf), "eps0 %.4e\n", schedule.epsilon0);
      out << buf;
      out << "nominal_L " << schedule.nominal_stages << '\n';
      out << "effective_L " << schedule.effective_stages() << '\n';
      out << (sched_format == "csv" ? FormatScheduleCsv(schedule)
                                    : FormatScheduleTable(schedule));
      std::snprintf(buf, sizeof(buf), "sum eps' = %.10g <= epsilon = %.10g\n",
                    total.epsilon, budget.epsilon());
      out << buf;
      std::snprintf(buf, sizeof(buf), "sum delta' = %.10g <= delta = %.10g\n",
                    total.delta, budget.delta());
      out << buf;
      return kExitOk;
    }

    if (compose_cmd->parsed()) {
      if (compose_kind == "basic") {
        if (compose_args.size() % 2 != 0) {
          err << "usage error: basic composition takes (epsilon, delta) pairs\n";
          return kExitUsage;
        }
        std::vector<BudgetPair> pairs;
        for (std::size_t i = 0; i < compose_args.size(); i += 2) {
          pairs.push_back({ParseNumber(compose_args[i], "epsilon"),
                           ParseDelta(compose_args[i + 1])});
        }
        const BudgetPair total = BasicCompose(pairs);
        out << FormatNumber(total.epsilon) << ' ' << FormatNumber(total.delta)
            << '\n';
        return kExitOk;
      }
      if (compose_args.size() != 3) {
        err << "usage error: advanced composition takes M EPS DELTA_PRIME\n";
        return kExitUsage;
      }
      const double m = ParseNumber(compose_args[0], "m");
      if (m < 1 || m != std::floor(m)) {
        err << "usage error: m must be a positive integer\n";
        return kExitUsage;
      }
      out << FormatNumber(AdvancedCompose(static_cast<int64_t>(m),
                                          ParseNumber(compose_args[1], "epsilon"),
                                          ParseDelta(compose_args[2])))
          << '\n';
      return kExitOk;
    }

    if (run_cmd->parsed()) {
      const HighProbConfig config =
          MakeConfig(run_flags.profile, run_flags.overrides);
      SweepCell cell;
      cell.mechanism = {ParseMechanism(run_mech), config};
      cell.k = run_k;
      cell.epsilon = ParseNumber(run_eps, "epsilon");
      cell.delta = ParseDelta(run_delta);
      (void)PrivacyBudget(cell.epsilon, cell.delta);
      if (run_k < 2) {
        err << "usage error: k must be >= 2\n";
        return kExitUsage;
      }
      return RunExperiment({cell}, run_flags, out, err);
    }

    if (sweep_cmd->parsed()) {
      const HighProbConfig config =
          MakeConfig(sweep_flags.profile, sweep_flags.overrides);
      std::vector<SweepCell> cells;
      for (const auto& mech : SplitList(sweep_mechs)) {
        for (const auto& k_text : SplitList(sweep_ks)) {
          for (const auto& eps_text : SplitList(sweep_eps)) {
            for (const auto& delta_text : SplitList(sweep_deltas)) {
              SweepCell cell;
              cell.mechanism = {ParseMechanism(mech), config};
              const double k = ParseNumber(k_text, "k");
              if (k < 2 || k != std::floor(k)) {
                err << "usage error: k must be an integer >= 2\n";
                return kExitUsage;
              }
              cell.k = static_cast<int64_t>(k);
              cell.epsilon = ParseNumber(eps_text, "epsilon");
              cell.delta = ParseDelta(delta_text);
              (void)PrivacyBudget(cell.epsilon, cell.delta);
              cells.push_back(cell);
            }
          }
        }
      }
      if (cells.empty()) {
        err << "usage error: empty sweep grid\n";
        return kExitUsage;
      }
      return RunExperiment(cells, sweep_flags, out, err);
    }

    if (select_cmd->parsed()) {
      const std::vector<double> probe = instance.Gaps();  // validates the shape
      (void)probe;
      const SelectionConditions cond = CheckSelectionConditions(instance);
      if (!cond.enough_good) {
        err << "warning: condition (i) fails: good = " << instance.good
            << " < gamma k = " << instance.gamma * static_cast<double>(instance.k)
            << '\n';
      }
      if (!cond.wide_gap) {
        err << "warning: condition (ii) fails: w = " << instance.EffectiveW()
            << " < (8/epsilon) ln(400/gamma)\n";
      }
      if (!cond.few_bad) {
        err << "warning: condition (iii) fails: good = " << instance.good
            << " < 2 bad = " << 2 * instance.bad << '\n';
      }
      const SelectionResult r =
          RunSelectionExperiment(instance, select_trials, select_seed,
                    DefaultThreads(select_threads),
                    select_zero ? NoiseMode::kZero : NoiseMode::kRandom);
      char buf[256];
      std::snprintf(buf, sizeof(buf),
                    "k=%zu good=%zu bad=%zu gamma=%g epsilon=%g T=%g w=%.6g "
                    "trials=%zu\n",
                    instance.k, instance.good, instance.bad, instance.gamma,
                    instance.epsilon, instance.threshold, instance.EffectiveW(),
                    r.trials);
      out << buf;
      std::snprintf(buf, sizeof(buf),
                    "success_rate %.6f wilson95 [%.6f, %.6f] no_selection %zu\n",
                    r.rate, r.wilson_low, r.wilson_high, r.no_selection);
      out << buf;
      out << "conditions " << (cond.all() ? "satisfied" : "violated") << '\n';
      if (cond.all() && r.wilson_low < 0.6 - select_slack) {
        err << "property check failed: Wilson lower bound " << r.wilson_low
            << " < " << 0.6 - select_slack << '\n';
        return kExitPropertyFailure;
      }
      return kExitOk;
    }
  } catch (const InfeasibleScheduleError& e) {
    err << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const InvalidParameterError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace isvc
