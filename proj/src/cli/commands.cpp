// SPDX-License-Identifier: Apache-2.0

#include "cerlab/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "cerlab/error.hpp"
#include "cerlab/parallel.hpp"
#include "cerlab/serialization.hpp"
#include "cerlab/trainer.hpp"

namespace cerlab::cli {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw InputDomainError("cannot write " + path.string());
  }
  out << text;
}

std::string describe(std::size_t policy, std::size_t q, std::size_t a_ref) {
  return "policy=" + std::to_string(policy) + " q=" + std::to_string(q) + " a_ref=" + std::to_string(a_ref);
}

}  // namespace

int run_guarded(const std::function<int()>& body, std::ostream& log) {
  try {
    return body();
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const EnumerationTooLarge& e) {
    log << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InputDomainError& e) {
    log << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const TrainingAborted& e) {
    log << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    log << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

std::vector<TheoremReport> verify_sweep(const RunConfig& config, const TaskSpec& task,
                                        const CerFunction& cer) {
  const std::size_t policies = config.verify.policies;
  std::vector<std::vector<TheoremReport>> per_policy(policies);
  parallel_for(policies, config.jobs, [&](std::size_t i) {
    const std::uint64_t seed = stream_seed(StreamKey{config.seed, 0, i, StreamRole::VerifyPolicy, 0});
    const PolicyParams params = init_policy(task, InitSpec{InitKind::Gaussian, config.verify.sigma}, seed);
    std::vector<TheoremReport>& out = per_policy[i];
    out.push_back(check_bounds(params, task, "policy=" + std::to_string(i), cer));
    for (std::size_t q = 0; q < task.shape.questions; ++q) {
      const AnswerId a_ref = task.reference[q];
      out.push_back(check_theorem1(params, QuestionId(q), a_ref, describe(i, q, a_ref.value), cer));
      out.push_back(check_theorem2(params, QuestionId(q), a_ref, describe(i, q, a_ref.value), cer));
    }
    out.push_back(check_theorem2_dataset(params, task, "policy=" + std::to_string(i), cer));
  });
  std::vector<TheoremReport> reports;
  for (auto& block : per_policy) {
    std::move(block.begin(), block.end(), std::back_inserter(reports));
  }
  return reports;
}

int cmd_verify(const RunConfig& config, std::ostream& log, const CerFunction& cer) {
  config.validate();
  const TaskSpec task = build_task(config);
  task.validate(kDefaultEnumerationCap);
  const std::vector<TheoremReport> reports = verify_sweep(config, task, cer);
  if (config.verify.policies == 0) {
    log << "warning: verify sweep is empty (0 policies); nothing was checked\n";
  }
  std::ostringstream jsonl;
  std::size_t failed = 0;
  for (const TheoremReport& r : reports) {
    jsonl << r.to_json().dump() << '\n';
    failed += r.pass ? 0 : 1;
  }
  write_text(config.output_dir / "verify_reports.jsonl", jsonl.str());
  log << "verify: " << reports.size() << " reports, " << failed << " failed\n";
  return failed == 0 ? kExitOk : kExitFailure;
}

int cmd_train(const RunConfig& config, std::ostream& log) {
  config.validate();
  const TaskSpec task = build_task(config);
  TrainConfig train = config.train;
  train.seed = config.seed;
  train.jobs = config.jobs;
  const TrainingRun run = run_training(task, train);
  write_text(config.output_dir / "metrics.csv", metrics_csv(run.metrics, config.record_timing));
  save_policy(config.output_dir / "checkpoint.json", run.params);
  save_task(config.output_dir / "task.json", task);
  log << "train: " << run.metrics.size() << " steps, reward=" << to_string(train.reward_kind);
  if (!run.metrics.empty() && run.metrics.back().pass1) {
    log << ", final pass@1=" << format_double(*run.metrics.back().pass1);
  }
  log << '\n';
  return kExitOk;
}

std::vector<double> time_batch_cer(const PolicyParams& params, QuestionId q, AnswerId a_ref,
                                   const McStudySection& study, std::uint64_t seed) {
  const std::size_t largest = *std::max_element(study.ladder.begin(), study.ladder.end());
  const std::size_t n = study.timing_rollouts == 0 ? largest : study.timing_rollouts;
  RngStream rollout_rng(StreamKey{seed, q.value, 0, StreamRole::McStudy, 1});
  std::vector<Rollout> rollouts;
  for (std::size_t i = 0; i < n; ++i) {
    rollouts.push_back(sample_rollout(params, q, rollout_rng));
  }
  std::vector<double> millis;
  for (std::size_t M : study.ladder) {
    if (M < 1 || M > n) {
      throw ConfigError("mc_study: ladder entry " + std::to_string(M) + " exceeds timing_rollouts");
    }
    RngStream rng(StreamKey{seed, q.value, M, StreamRole::McStudy, 2});
    // Fastest block is the least disturbed by the rest of the machine.
    double best = std::numeric_limits<double>::infinity();
    double sink = 0.0;
    for (std::size_t block = 0; block < study.timing_blocks; ++block) {
      const auto start = std::chrono::steady_clock::now();
      for (std::size_t r = 0; r < study.timing_repeats; ++r) {
        sink += batch_cer(params, q, rollouts, a_ref, M, rng).R.front();
      }
      const double elapsed =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      best = std::min(best, elapsed / static_cast<double>(study.timing_repeats));
    }
    if (sink < 0.0) {
      throw Error("unreachable: negative reward");
    }
    millis.push_back(best);
  }
  return millis;
}

int cmd_mc_study(const RunConfig& config, std::ostream& log) {
  config.validate();
  const McStudySection& study = config.mc_study;
  const TaskSpec task = build_task(config);
  if (study.question >= task.shape.questions) {
    throw InputDomainError("mc_study: question " + std::to_string(study.question) + " out of range");
  }
  const QuestionId q(study.question);
  const AnswerId a_ref = task.reference_for(q);
  const AnswerId a = study.answer ? AnswerId(*study.answer) : a_ref;
  const PolicyParams params =
      build_policy(task, study.checkpoint, study.sigma,
                   stream_seed(StreamKey{config.seed, 0, 0, StreamRole::McStudy, 0}));

  RngStream rng(StreamKey{config.seed, q.value, 0, StreamRole::McStudy, 0});
  const std::vector<McErrorRow> rows = mc_error_study(params, q, a, a_ref, study.ladder, study.trials, rng);
  std::vector<double> millis(rows.size(), 0.0);
  if (config.record_timing) {
    millis = time_batch_cer(params, q, a_ref, study, config.seed);
  }

  std::ostringstream csv;
  csv << "M,mean_abs_error,std_error,millis\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    csv << rows[k].M << ',' << format_double(rows[k].mean_abs_error) << ','
        << format_double(rows[k].std_error) << ',' << format_double(millis[k]) << '\n';
  }
  write_text(config.output_dir / "mc_study.csv", csv.str());
  log << "mc-study: " << rows.size() << " rows, exact CER=" << format_double(exact_cer(params, q, a, a_ref))
      << '\n';
  return kExitOk;
}

int cmd_explain(const RunConfig& config, std::ostream& log) {
  config.validate();
  const ExplainSection& ex = config.explain;
  const TaskSpec task = build_task(config);
  if (ex.question >= task.shape.questions) {
    throw InputDomainError("explain: question " + std::to_string(ex.question) + " out of range");
  }
  const QuestionId q(ex.question);
  const PolicyParams params =
      build_policy(task, ex.checkpoint, ex.sigma,
                   stream_seed(StreamKey{config.seed, 0, 0, StreamRole::Explain, 0}));
  RngStream rollout_rng(StreamKey{config.seed, q.value, 0, StreamRole::Explain, 1});
  std::vector<Rollout> rollouts;
  for (std::size_t i = 0; i < ex.rollouts; ++i) {
    rollouts.push_back(sample_rollout(params, q, rollout_rng));
  }
  RngStream subset_rng(StreamKey{config.seed, q.value, 0, StreamRole::Explain, 2});
  const RewardBatch batch = batch_cer(params, q, rollouts, task.reference_for(q), ex.subset, subset_rng);
  write_text(config.output_dir / "explain.csv", explain_batch(batch));
  log << "explain: " << batch.rows() << " rows x " << batch.columns() << " solutions, "
      << batch.degenerate_rows.size() << " degenerate\n";
  return kExitOk;
}

}  // namespace cerlab::cli
