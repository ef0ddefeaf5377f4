// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cerlab/policy.hpp"
#include "cerlab/tasks.hpp"
#include "cerlab/trainer.hpp"

namespace cerlab::cli {

struct TaskSection {
  /// Task document to load instead of generating one.
  std::optional<std::filesystem::path> file;
  std::size_t questions = 8;
  std::size_t vocab = 4;
  std::size_t length = 2;
  std::size_t answers = 8;
  /// Contiguous alias groups of this size; 0 means none.
  std::size_t alias_group_size = 0;
};

struct VerifySection {
  std::size_t policies = 100;
  double sigma = 1.0;
};

struct McStudySection {
  std::optional<std::filesystem::path> checkpoint;
  double sigma = 1.0;
  std::size_t question = 0;
  /// Scored answer; defaults to the question's reference answer.
  std::optional<std::size_t> answer;
  std::size_t trials = 10000;
  std::vector<std::size_t> ladder{1, 2, 4, 8, 16, 32, 64};
  /// Rollouts per timed batch_cer call; 0 means the largest M.
  std::size_t timing_rollouts = 0;
  std::size_t timing_repeats = 200;
  std::size_t timing_blocks = 5;
};

struct ExplainSection {
  std::optional<std::filesystem::path> checkpoint;
  double sigma = 1.0;
  std::size_t question = 0;
  std::size_t rollouts = 16;
  std::size_t subset = 16;
};

/// Everything a subcommand needs. Built from defaults, then a config file,
/// then the CERLAB_SEED environment variable (seed only), then flags.
struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "cerlab-out";
  std::size_t jobs = 1;
  /// When false, timing columns are written as 0 so outputs are byte-stable.
  bool record_timing = true;
  TaskSection task;
  TrainConfig train;
  VerifySection verify;
  McStudySection mc_study;
  ExplainSection explain;

  /// Throws ConfigError when a section is inconsistent or a referenced file is missing.
  void validate() const;
};

/// Overlays the keys present in `doc` onto `config`. Unknown keys are errors.
void merge_config(RunConfig& config, const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
/// Fully defaulted configuration, as JSON, for documentation and round trips.
nlohmann::json config_to_json(const RunConfig& config);

/// Loads the task file or generates a task from the seed and sizes.
TaskSpec build_task(const RunConfig& config);

/// Checkpoint if given, otherwise a Gaussian policy drawn from the seed.
PolicyParams build_policy(const TaskSpec& task, const std::optional<std::filesystem::path>& checkpoint,
                          double sigma, std::uint64_t seed);

}  // namespace cerlab::cli
