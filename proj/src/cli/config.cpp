// SPDX-License-Identifier: Apache-2.0

#include "cerlab/cli/config.hpp"

#include <cmath>
#include <set>
#include <string>

#include "cerlab/error.hpp"
#include "cerlab/reward.hpp"
#include "cerlab/serialization.hpp"

namespace cerlab::cli {

using nlohmann::json;

namespace {

void reject_unknown(const json& section, const std::set<std::string>& allowed, const std::string& where) {
  if (!section.is_object()) {
    throw ConfigError("config: '" + where + "' must be an object");
  }
  for (const auto& [key, value] : section.items()) {
    if (!allowed.contains(key)) {
      throw ConfigError("config: unknown key '" + where + "." + key + "'");
    }
  }
}

template <class T>
void read(const json& section, const char* key, T& out) {
  if (section.contains(key)) {
    out = section.at(key).get<T>();
  }
}

void read_path(const json& section, const char* key, std::optional<std::filesystem::path>& out) {
  if (section.contains(key)) {
    const json& v = section.at(key);
    out = v.is_null() ? std::nullopt : std::optional<std::filesystem::path>(v.get<std::string>());
  }
}

std::string_view eval_mode_name(EvalMode mode) { return mode == EvalMode::Greedy ? "greedy" : "sampled"; }

EvalMode parse_eval_mode(const std::string& name) {
  if (name == "greedy") return EvalMode::Greedy;
  if (name == "sampled") return EvalMode::Sampled;
  throw ConfigError("config: eval_mode must be 'greedy' or 'sampled'");
}

RewardSamples parse_reward_samples(const std::string& name) {
  if (name == "reuse") return RewardSamples::Reuse;
  if (name == "fresh") return RewardSamples::Fresh;
  throw ConfigError("config: reward_samples must be 'reuse' or 'fresh'");
}

QuestionOrder parse_order(const std::string& name) {
  if (name == "iid") return QuestionOrder::Iid;
  if (name == "epoch") return QuestionOrder::Epoch;
  throw ConfigError("config: question_order must be 'iid' or 'epoch'");
}

InitKind parse_init_kind(const std::string& name) {
  if (name == "zero") return InitKind::Zero;
  if (name == "gaussian") return InitKind::Gaussian;
  throw ConfigError("config: init must be 'zero' or 'gaussian'");
}

void merge_train(TrainConfig& train, const json& doc) {
  reject_unknown(doc,
                 {"batch_size", "rollouts", "subset", "learning_rate", "steps", "reward", "eval_every",
                  "eval_mode", "eval_samples", "reward_samples", "question_order", "dedup", "init",
                  "init_sigma"},
                 "train");
  read(doc, "batch_size", train.batch_size);
  read(doc, "rollouts", train.rollouts);
  read(doc, "subset", train.subset);
  read(doc, "learning_rate", train.learning_rate);
  read(doc, "steps", train.steps);
  read(doc, "eval_every", train.eval_every);
  read(doc, "eval_samples", train.eval.samples);
  read(doc, "dedup", train.dedup);
  read(doc, "init_sigma", train.init.sigma);
  if (doc.contains("reward")) train.reward_kind = parse_reward_kind(doc["reward"].get<std::string>());
  if (doc.contains("eval_mode")) train.eval.mode = parse_eval_mode(doc["eval_mode"].get<std::string>());
  if (doc.contains("reward_samples")) {
    train.reward_samples = parse_reward_samples(doc["reward_samples"].get<std::string>());
  }
  if (doc.contains("question_order")) train.order = parse_order(doc["question_order"].get<std::string>());
  if (doc.contains("init")) train.init.kind = parse_init_kind(doc["init"].get<std::string>());
}

void require_file(const std::optional<std::filesystem::path>& path, const char* what) {
  if (path && !std::filesystem::is_regular_file(*path)) {
    throw ConfigError(std::string("config: ") + what + " '" + path->string() + "' does not exist");
  }
}

}  // namespace

void merge_config(RunConfig& config, const json& doc) {
  try {
    reject_unknown(doc,
                   {"seed", "output_dir", "jobs", "record_timing", "task", "train", "verify", "mc_study",
                    "explain"},
                   "<root>");
    read(doc, "seed", config.seed);
    if (doc.contains("output_dir")) config.output_dir = doc["output_dir"].get<std::string>();
    read(doc, "jobs", config.jobs);
    read(doc, "record_timing", config.record_timing);
    if (doc.contains("task")) {
      const json& t = doc["task"];
      reject_unknown(t, {"file", "questions", "vocab", "length", "answers", "alias_group_size"}, "task");
      read_path(t, "file", config.task.file);
      read(t, "questions", config.task.questions);
      read(t, "vocab", config.task.vocab);
      read(t, "length", config.task.length);
      read(t, "answers", config.task.answers);
      read(t, "alias_group_size", config.task.alias_group_size);
    }
    if (doc.contains("train")) merge_train(config.train, doc["train"]);
    if (doc.contains("verify")) {
      const json& v = doc["verify"];
      reject_unknown(v, {"policies", "sigma"}, "verify");
      read(v, "policies", config.verify.policies);
      read(v, "sigma", config.verify.sigma);
    }
    if (doc.contains("mc_study")) {
      const json& m = doc["mc_study"];
      reject_unknown(m,
                     {"checkpoint", "sigma", "question", "answer", "trials", "ladder", "timing_rollouts",
                      "timing_repeats", "timing_blocks"},
                     "mc_study");
      read_path(m, "checkpoint", config.mc_study.checkpoint);
      read(m, "sigma", config.mc_study.sigma);
      read(m, "question", config.mc_study.question);
      if (m.contains("answer")) {
        config.mc_study.answer =
            m["answer"].is_null() ? std::nullopt : std::optional<std::size_t>(m["answer"].get<std::size_t>());
      }
      read(m, "trials", config.mc_study.trials);
      read(m, "ladder", config.mc_study.ladder);
      read(m, "timing_rollouts", config.mc_study.timing_rollouts);
      read(m, "timing_repeats", config.mc_study.timing_repeats);
      read(m, "timing_blocks", config.mc_study.timing_blocks);
    }
    if (doc.contains("explain")) {
      const json& e = doc["explain"];
      reject_unknown(e, {"checkpoint", "sigma", "question", "rollouts", "subset"}, "explain");
      read_path(e, "checkpoint", config.explain.checkpoint);
      read(e, "sigma", config.explain.sigma);
      read(e, "question", config.explain.question);
      read(e, "rollouts", config.explain.rollouts);
      read(e, "subset", config.explain.subset);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig config;
  json doc;
  try {
    doc = load_json(path);
  } catch (const InputDomainError& e) {
    throw ConfigError(e.what());
  }
  merge_config(config, doc);
  return config;
}

json config_to_json(const RunConfig& c) {
  const auto path_or_null = [](const std::optional<std::filesystem::path>& p) {
    return p ? json(p->string()) : json(nullptr);
  };
  return json{
      {"seed", c.seed},
      {"output_dir", c.output_dir.string()},
      {"jobs", c.jobs},
      {"record_timing", c.record_timing},
      {"task",
       {{"file", path_or_null(c.task.file)},
        {"questions", c.task.questions},
        {"vocab", c.task.vocab},
        {"length", c.task.length},
        {"answers", c.task.answers},
        {"alias_group_size", c.task.alias_group_size}}},
      {"train",
       {{"batch_size", c.train.batch_size},
        {"rollouts", c.train.rollouts},
        {"subset", c.train.subset},
        {"learning_rate", c.train.learning_rate},
        {"steps", c.train.steps},
        {"reward", std::string(to_string(c.train.reward_kind))},
        {"eval_every", c.train.eval_every},
        {"eval_mode", std::string(eval_mode_name(c.train.eval.mode))},
        {"eval_samples", c.train.eval.samples},
        {"reward_samples", c.train.reward_samples == RewardSamples::Reuse ? "reuse" : "fresh"},
        {"question_order", c.train.order == QuestionOrder::Iid ? "iid" : "epoch"},
        {"dedup", c.train.dedup},
        {"init", c.train.init.kind == InitKind::Zero ? "zero" : "gaussian"},
        {"init_sigma", c.train.init.sigma}}},
      {"verify", {{"policies", c.verify.policies}, {"sigma", c.verify.sigma}}},
      {"mc_study",
       {{"checkpoint", path_or_null(c.mc_study.checkpoint)},
        {"sigma", c.mc_study.sigma},
        {"question", c.mc_study.question},
        {"answer", c.mc_study.answer ? json(*c.mc_study.answer) : json(nullptr)},
        {"trials", c.mc_study.trials},
        {"ladder", c.mc_study.ladder},
        {"timing_rollouts", c.mc_study.timing_rollouts},
        {"timing_repeats", c.mc_study.timing_repeats},
        {"timing_blocks", c.mc_study.timing_blocks}}},
      {"explain",
       {{"checkpoint", path_or_null(c.explain.checkpoint)},
        {"sigma", c.explain.sigma},
        {"question", c.explain.question},
        {"rollouts", c.explain.rollouts},
        {"subset", c.explain.subset}}},
  };
}

void RunConfig::validate() const {
  if (jobs < 1) {
    throw ConfigError("config: jobs must be at least 1");
  }
  require_file(task.file, "task file");
  require_file(mc_study.checkpoint, "mc_study checkpoint");
  require_file(explain.checkpoint, "explain checkpoint");
  for (double sigma : {verify.sigma, mc_study.sigma, explain.sigma}) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
      throw ConfigError("config: sigma values must be finite and non-negative");
    }
  }
  train.validate();
  if (mc_study.ladder.empty()) {
    throw ConfigError("config: mc_study.ladder must not be empty");
  }
  if (mc_study.timing_repeats < 1 || mc_study.timing_blocks < 1) {
    throw ConfigError("config: mc_study timing repeats and blocks must be positive");
  }
  if (explain.rollouts < 1 || explain.subset < 1 || explain.subset > explain.rollouts) {
    throw ConfigError("config: explain needs 1 <= subset <= rollouts");
  }
}

TaskSpec build_task(const RunConfig& config) {
  TaskSpec task;
  if (config.task.file) {
    task = load_task(*config.task.file);
  } else {
    task = generate_task(config.seed, config.task.questions, config.task.vocab, config.task.length,
                         config.task.answers);
  }
  if (config.task.alias_group_size > 0) {
    task.alias_groups = contiguous_alias_groups(task.shape.answers, config.task.alias_group_size);
  }
  task.validate();
  return task;
}

PolicyParams build_policy(const TaskSpec& task, const std::optional<std::filesystem::path>& checkpoint,
                          double sigma, std::uint64_t seed) {
  if (checkpoint) {
    PolicyParams params = load_policy(*checkpoint);
    if (params.shape() != task.shape) {
      throw ConfigError("checkpoint shape does not match the task");
    }
    return params;
  }
  return init_policy(task, InitSpec{InitKind::Gaussian, sigma}, seed);
}

}  // namespace cerlab::cli
