#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "zsca/config.hpp"
#include "zsca/error.hpp"
#include "zsca/pipeline.hpp"
#include "zsca/split.hpp"
#include "zsca/synth.hpp"

namespace {

using namespace zsca;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string protocol;
  std::string topk;
  std::vector<std::string> overrides;
  bool resume = false;
};

void add_common(CLI::App* cmd, Common& c, bool resumable) {
  cmd->add_option("--config", c.config, "config file (see the key list below)");
  cmd->add_option("--seed", c.seed, "overrides `seed`");
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_option("--protocol", c.protocol, "close | open | macro-open | all (overrides `protocol`)");
  cmd->add_option("--topk", c.topk, "comma list, e.g. 1,2,3 (overrides `topk`)");
  cmd->add_option("--set", c.overrides, "KEY=VALUE override; repeatable");
  if (resumable) cmd->add_flag("--resume", c.resume, "skip stages whose checkpoints match the config");
}

Config build_config(const Common& c) {
  Config cfg = c.config.empty() ? Config() : Config::load(c.config);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) fail(ErrorCode::InvalidConfigValue, "--set expects KEY=VALUE, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) cfg.set("seed", std::to_string(*c.seed));
  if (!c.protocol.empty()) cfg.set("protocol", c.protocol);
  if (!c.topk.empty()) cfg.set("topk", c.topk);
  cfg.check_paths();
  return cfg;
}

int exit_code(ErrorCategory cat) {
  switch (cat) {
    case ErrorCategory::Config: return 2;
    case ErrorCategory::Data: return 3;
    case ErrorCategory::Numeric: return 4;
  }
  return 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot compositional action recognition toolkit"};
  app.footer(config_help() + "\nExit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.");
  app.require_subcommand(1);

  Common common;
  std::optional<Stage> stage;
  std::string action;

  auto* split_cmd = app.add_subcommand("make-split", "split frequency tables into seen/unseen (writes OUT/split.tsv)");
  auto* synth_cmd = app.add_subcommand("make-synth", "write a planted synthetic benchmark into OUT");
  add_common(split_cmd, common, false);
  add_common(synth_cmd, common, false);
  split_cmd->callback([&] { action = "make-split"; });
  synth_cmd->callback([&] { action = "make-synth"; });
  for (auto s : all_stages()) {
    auto* cmd = app.add_subcommand(std::string(stage_name(s)), "run the " + std::string(stage_name(s)) + " stage");
    add_common(cmd, common, true);
    cmd->callback([&stage, &action, s] {
      stage = s;
      action = "stage";
    });
  }
  auto* all_cmd = app.add_subcommand("run-all", "run every stage in order, then evaluate");
  add_common(all_cmd, common, true);
  all_cmd->callback([&] { action = "run-all"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const Config cfg = build_config(common);
    const fs::path out(common.out);
    if (action == "make-split") {
      const auto split = make_split(split_spec(cfg));
      fs::create_directories(out);
      write_split(out / "split.tsv", split);
      std::cerr << "verbs " << split.verbs_seen.size() << " seen / " << split.verbs_unseen.size() << " unseen, nouns "
                << split.nouns_seen.size() << " seen / " << split.nouns_unseen.size() << " unseen\n";
      return 0;
    }
    if (action == "make-synth") {
      std::cerr << "wrote " << make_synth(synth_spec(cfg), out).string() << "\n";
      return 0;
    }
    const auto experiment = experiment_config(cfg);
    RunOptions options{out, common.resume, &std::cerr};
    if (action == "run-all") {
      run_all(experiment, options);
    } else {
      run_stage(*stage, experiment, options);
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(error_category(e.code()));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
