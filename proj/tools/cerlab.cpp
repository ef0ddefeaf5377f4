// SPDX-License-Identifier: Apache-2.0
//
// cerlab: verify | train | mc-study | explain
//
// Settings come from built-in defaults, then --config, then CERLAB_SEED (seed
// only), then flags.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "cerlab/cli/commands.hpp"
#include "cerlab/cli/config.hpp"
#include "cerlab/error.hpp"

namespace {

using namespace cerlab::cli;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> jobs;
  bool no_timing = false;
  std::optional<std::string> checkpoint;
  std::optional<std::size_t> question;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("-c,--config", f.config, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("-s,--seed", f.seed, "Master seed (overrides file and CERLAB_SEED)");
  sub->add_option("-o,--out", f.out, "Output directory");
  sub->add_option("-j,--jobs", f.jobs, "Worker threads");
  sub->add_flag("--no-timing", f.no_timing, "Write 0 in timing columns");
}

void add_target(CLI::App* sub, Flags& f) {
  sub->add_option("--checkpoint", f.checkpoint, "Policy checkpoint (default: random policy)");
  sub->add_option("-q,--question", f.question, "Question index");
}

RunConfig resolve(const Flags& f, const std::string& command) {
  RunConfig config;
  if (!f.config.empty()) {
    config = load_run_config(f.config);
  }
  if (const char* env = std::getenv("CERLAB_SEED"); env != nullptr && *env != '\0') {
    try {
      std::size_t used = 0;
      config.seed = std::stoull(env, &used);
      if (env[used] != '\0') throw std::invalid_argument(env);
    } catch (const std::logic_error&) {
      throw cerlab::ConfigError(std::string("CERLAB_SEED is not an unsigned integer: ") + env);
    }
  }
  if (f.seed) config.seed = *f.seed;
  if (f.out) config.output_dir = *f.out;
  if (f.jobs) config.jobs = *f.jobs;
  if (f.no_timing) config.record_timing = false;
  if (command == "mc-study") {
    if (f.checkpoint) config.mc_study.checkpoint = *f.checkpoint;
    if (f.question) config.mc_study.question = *f.question;
  } else if (command == "explain") {
    if (f.checkpoint) config.explain.checkpoint = *f.checkpoint;
    if (f.question) config.explain.question = *f.question;
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular lab for conditional-expectation rewards"};
  Flags flags;

  auto* verify = app.add_subcommand("verify", "Check reward identities on a sweep of random policies");
  auto* train = app.add_subcommand("train", "Train a tabular policy and write metrics and a checkpoint");
  auto* mc = app.add_subcommand("mc-study", "Empirical-vs-exact reward error and timing across subset sizes");
  auto* explain = app.add_subcommand("explain", "Dump the reward matrix of one sampled batch");
  for (auto* sub : {verify, train, mc, explain}) add_common(sub, flags);
  add_target(mc, flags);
  add_target(explain, flags);

  bool dump_config = false;
  app.add_flag("--print-defaults", dump_config, "Print the fully defaulted config and exit");
  app.require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  if (dump_config) {
    std::cout << config_to_json(RunConfig{}).dump(2) << '\n';
    return kExitOk;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  return run_guarded(
      [&] {
        const RunConfig config = resolve(flags, command);
        if (command == "verify") return cmd_verify(config, std::cerr);
        if (command == "train") return cmd_train(config, std::cerr);
        if (command == "mc-study") return cmd_mc_study(config, std::cerr);
        return cmd_explain(config, std::cerr);
      },
      std::cerr);
}
