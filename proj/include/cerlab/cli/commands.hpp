// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "cerlab/cli/config.hpp"
#include "cerlab/oracle.hpp"
#include "cerlab/reward.hpp"

namespace cerlab::cli {

/// Process exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // a check failed or a run aborted
  kExitUsage = 2,    // configuration or input-domain error
};

/// Runs the property sweep over `config.verify.policies` random policies and
/// writes `verify_reports.jsonl`. `cer` replaces exact_cer inside the checks
/// (used to confirm that a broken implementation is caught).
int cmd_verify(const RunConfig& config, std::ostream& log, const CerFunction& cer = {});

/// Trains and writes `metrics.csv`, `checkpoint.json` and `task.json`.
int cmd_train(const RunConfig& config, std::ostream& log);

/// Writes `mc_study.csv` with columns M,mean_abs_error,std_error,millis.
int cmd_mc_study(const RunConfig& config, std::ostream& log);

/// Samples one batch for `config.explain.question` and writes `explain.csv`.
int cmd_explain(const RunConfig& config, std::ostream& log);

/// Calls `body` and maps library exceptions onto exit codes, printing the
/// diagnostic to `log`.
int run_guarded(const std::function<int()>& body, std::ostream& log);

/// Theorem reports produced by the verify sweep, in output order.
std::vector<TheoremReport> verify_sweep(const RunConfig& config, const TaskSpec& task,
                                        const CerFunction& cer = {});

/// Per-call batch_cer wall time in milliseconds for each M of the ladder.
std::vector<double> time_batch_cer(const PolicyParams& params, QuestionId q, AnswerId a_ref,
                                   const McStudySection& study, std::uint64_t seed);

}  // namespace cerlab::cli
