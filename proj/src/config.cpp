#include "zsca/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "zsca/error.hpp"
#include "zsca/text_util.hpp"

namespace zsca {

namespace {

using K = KeyType;

std::vector<ConfigKey> make_keys() {
  return {
      {"seed", K::Count, "0", "global seed; every stage derives its own stream from it"},
      {"protocol", K::Text, "all", "close | open | macro_open | all, or a comma list"},
      {"topk", K::Text, "1,2,3", "comma list of k for top-k precision and AUC"},

      {"data.verb_features", K::Path, "", "verb-branch feature matrix (.bin, with .meta.tsv sidecar)"},
      {"data.noun_features", K::Path, "", "noun-branch feature matrix (.bin, with .meta.tsv sidecar)"},
      {"data.split", K::Path, "", "vocabulary split TSV: verb|noun, token, seen|unseen"},
      {"data.verb_embeddings", K::Path, "", "verb word embeddings, one `token v1 .. vd` per line"},
      {"data.noun_embeddings", K::Path, "", "noun word embeddings, one `token v1 .. vd` per line"},
      {"data.noun_edges", K::Path, "", "noun relation edge list: src, dst, hypernym|synonym"},
      {"data.noun_augment", K::Path, "", "optional token list of extra nouns for the noun graph"},
      {"data.verb_similarity", K::Path, "", "verb similarity table (graph.verb_kind = wn_dis)"},
      {"data.verb_classes", K::Path, "", "verb class membership (graph.verb_kind = vn_group | vn_tree)"},
      {"data.pair_corpus", K::Path, "", "verb-noun pair counts for the affordance scorer"},
      {"data.phrases", K::Path, "", "optional phrase embeddings for context_scoring"},

      {"graph.verb_kind", K::Text, "vn_tree", "verb graph: wn_dis | vn_group | vn_tree"},
      {"graph.wn_threshold", K::Real, "2.0", "edge threshold on the wn_dis similarity"},
      {"graph.mode", K::Text, "one_way", "one_way | two_way propagation"},
      {"graph.norm", K::Text, "symmetric", "adjacency normalization: symmetric | row"},

      {"heads.adversarial", K::Flag, "false", "train verb/noun heads against opposite-label discriminators"},
      {"heads.layers", K::Count, "2", "affine layers in each projection stack"},
      {"heads.hidden", K::Count, "256", "projection hidden width"},
      {"heads.out_dim", K::Count, "64", "projected feature dim (= classifier weight dim)"},
      {"heads.epochs", K::Count, "30", "head training epochs"},
      {"heads.batch_size", K::Count, "64", "head minibatch size"},
      {"heads.lr", K::Real, "0.001", "head learning rate"},
      {"heads.lambda", K::Real, "1.0", "adversarial weight"},
      {"heads.disc_lr", K::Real, "0.005", "discriminator learning rate (0: use heads.lr)"},
      {"heads.disc_steps", K::Count, "20", "discriminator updates per feature update"},

      {"gcn.layers", K::Count, "2", "graph convolution layers"},
      {"gcn.hidden", K::Count, "512", "hidden width"},
      {"gcn.slope", K::Real, "0.2", "leaky rectifier slope"},
      {"gcn.epochs", K::Count, "300", "full-batch epochs"},
      {"gcn.lr", K::Real, "0.001", "learning rate"},
      {"gcn.normalize", K::Flag, "true", "regress L2-normalized weight rows"},

      {"zero_shot.verb_head", K::Text, "kg", "unseen verb scores: kg (graph regression) | ses (embedding match)"},
      {"zero_shot.noun_head", K::Text, "kg", "unseen noun scores: kg | ses"},
      {"ses.layers", K::Count, "1", "embedding-match projection layers"},
      {"ses.hidden", K::Count, "256", "embedding-match hidden width"},
      {"ses.epochs", K::Count, "60", "embedding-match epochs"},
      {"ses.batch_size", K::Count, "64", "embedding-match minibatch size"},
      {"ses.lr", K::Real, "0.001", "embedding-match learning rate"},

      {"affordance.variant", K::Text, "proj_cosine",
       "proj_cosine | concat_scoring | context_scoring | lookup | ground_truth | uniform"},
      {"affordance.neg_ratio", K::Count, "3", "negatives sampled per positive"},
      {"affordance.min_count", K::Count, "1", "minimum corpus count for a positive pair"},
      {"affordance.epochs", K::Count, "200", "scorer epochs"},
      {"affordance.batch_size", K::Count, "64", "scorer minibatch size"},
      {"affordance.lr", K::Real, "0.01", "scorer learning rate"},
      {"affordance.hidden", K::Count, "64", "scoring MLP width (concat/context)"},
      {"affordance.holdout", K::Real, "0.2", "fraction of labelled pairs held out for accuracy"},
      {"affordance.scale_init", K::Real, "5.0", "initial cosine scale (proj_cosine)"},
      {"affordance.offset_init", K::Real, "0.0", "initial cosine offset (proj_cosine)"},
      {"affordance.learn_scale", K::Flag, "true", "train scale and offset"},

      {"mapper.hidden", K::Count, "0", "mapper hidden width (0: single affine map)"},
      {"mapper.epochs", K::Count, "300", "mapper epochs"},
      {"mapper.batch_size", K::Count, "64", "mapper minibatch size"},
      {"mapper.lr", K::Real, "0.01", "mapper learning rate"},

      {"eval.grid", K::Count, "201", "bias grid points on [-R, R]"},
      {"eval.chance_trials", K::Count, "20", "Monte-Carlo trials for the chance AUC (0: skip)"},

      {"split.verb_counts", K::Path, "", "verb frequency table for make-split"},
      {"split.noun_counts", K::Path, "", "noun frequency table for make-split"},
      {"split.protected_verbs", K::Path, "", "optional token list of verbs kept seen"},
      {"split.protected_nouns", K::Path, "", "optional token list of nouns kept seen"},
      {"split.unseen_fraction", K::Real, "0.2", "fraction of unprotected classes marked unseen"},
      {"split.min_count", K::Count, "10", "classes below this count are dropped"},

      {"synth.verbs_seen", K::Count, "8", "seen verbs"},
      {"synth.verbs_unseen", K::Count, "4", "unseen verbs"},
      {"synth.nouns_seen", K::Count, "10", "seen nouns"},
      {"synth.nouns_unseen", K::Count, "5", "unseen nouns"},
      {"synth.samples_per_class", K::Count, "30", "samples per compatible composition"},
      {"synth.noise", K::Real, "0.5", "feature noise standard deviation"},
      {"synth.graph_density", K::Real, "0.2", "probability of a second parent/class per token"},
      {"synth.groups", K::Count, "4", "hypernyms / verb classes in the planted graphs"},
      {"synth.compat_types", K::Count, "2", "latent types; a pair is compatible iff types agree"},
      {"synth.embedding_dim", K::Count, "16", "word embedding dim"},
      {"synth.weight_dim", K::Count, "16", "planted classifier weight dim"},
      {"synth.feature_dim", K::Count, "32", "feature dim per branch"},
      {"synth.test_fraction", K::Real, "0.3", "fraction of seen-composition samples put in test"},
  };
}

const ConfigKey& key_info(const std::string& key) {
  const auto& keys = config_keys();
  auto it = std::ranges::find(keys, key, &ConfigKey::name);
  if (it == keys.end()) fail(ErrorCode::UnknownConfigKey, "'" + key + "'");
  return *it;
}

void check_value(const ConfigKey& k, const std::string& value) {
  auto bad = [&](const char* what) {
    fail(ErrorCode::InvalidConfigValue, k.name + " = '" + value + "': expected " + what);
  };
  switch (k.type) {
    case K::Count:
      if (!parse_size(value)) bad("a non-negative integer");
      break;
    case K::Real: {
      const auto v = parse_double(value);
      if (!v || !std::isfinite(*v)) bad("a finite number");
      break;
    }
    case K::Flag:
      if (value != "true" && value != "false") bad("true or false");
      break;
    default:
      break;
  }
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = make_keys();
  return keys;
}

std::string config_help() {
  std::ostringstream out;
  out << "Config file: one `key = value` per line, `#` starts a comment.\n"
         "Relative paths resolve against the config file's directory.\n\n";
  std::size_t width = 0;
  for (const auto& k : config_keys()) width = std::max(width, k.name.size());
  for (const auto& k : config_keys()) {
    out << "  " << k.name << std::string(width + 2 - k.name.size(), ' ') << k.help;
    if (!k.fallback.empty()) out << " [" << k.fallback << "]";
    out << "\n";
  }
  return out.str();
}

Config::Config() {
  for (const auto& k : config_keys()) values_[k.name] = k.fallback;
}

Config Config::parse(std::istream& in, const fs::path& base_dir, std::string_view source) {
  Config c;
  std::map<std::string, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    if (eq == std::string::npos) fail(ErrorCode::InvalidConfigValue, where + ": expected `key = value`");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (auto it = seen.find(key); it != seen.end())
      fail(ErrorCode::InvalidConfigValue, where + ": '" + key + "' already set on line " + std::to_string(it->second));
    seen[key] = line_no;
    try {
      c.set(key, value, base_dir);
    } catch (const Error& e) {
      fail(e.code(), where + ": " + e.message());
    }
  }
  return c;
}

Config Config::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::MissingPath, "config " + path.string());
  return parse(in, fs::absolute(path).parent_path(), path.string());
}

void Config::set(const std::string& key, const std::string& value, const fs::path& base_dir) {
  const auto& info = key_info(key);
  check_value(info, value);
  if (info.type == K::Path && !value.empty()) {
    fs::path p(value);
    values_[key] = (p.is_absolute() ? p : base_dir / p).lexically_normal().string();
  } else {
    values_[key] = value;
  }
}

const std::string& Config::text(const std::string& key) const {
  key_info(key);
  return values_.at(key);
}

double Config::real(const std::string& key) const { return *parse_double(text(key)); }
std::size_t Config::count(const std::string& key) const { return *parse_size(text(key)); }
bool Config::flag(const std::string& key) const { return text(key) == "true"; }
fs::path Config::path(const std::string& key) const { return fs::path(text(key)); }

fs::path Config::required_path(const std::string& key) const {
  auto p = path(key);
  if (p.empty()) fail(ErrorCode::MissingConfigKey, key + " is required here");
  return p;
}

void Config::check_paths() const {
  for (const auto& k : config_keys()) {
    if (k.type != K::Path) continue;
    const auto& v = values_.at(k.name);
    if (!v.empty() && !fs::exists(v)) fail(ErrorCode::MissingPath, k.name + " = " + v);
  }
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::vector<Protocol> parse_protocols(std::string_view text) {
  if (text == "all") return {Protocol::Close, Protocol::Open, Protocol::MacroOpen};
  std::vector<Protocol> out;
  for (const auto& part : split_on(text, ',')) {
    const auto p = parse_protocol(trim(part));
    if (std::ranges::find(out, p) == out.end()) out.push_back(p);
  }
  if (out.empty()) fail(ErrorCode::InvalidConfigValue, "empty protocol list");
  return out;
}

std::vector<std::size_t> parse_topk(std::string_view text) {
  std::vector<std::size_t> out;
  for (const auto& part : split_on(text, ',')) {
    const auto k = parse_size(trim(part));
    if (!k || *k == 0) fail(ErrorCode::InvalidConfigValue, "topk entry '" + part + "'");
    if (std::ranges::find(out, *k) == out.end()) out.push_back(*k);
  }
  if (out.empty()) fail(ErrorCode::InvalidConfigValue, "empty topk list");
  return out;
}

namespace {

PropagationMode parse_mode(const std::string& v) {
  if (v == "one_way") return PropagationMode::OneWay;
  if (v == "two_way") return PropagationMode::TwoWay;
  fail(ErrorCode::InvalidConfigValue, "graph.mode = '" + v + "'");
}

NormScheme parse_norm(const std::string& v) {
  if (v == "symmetric") return NormScheme::Symmetric;
  if (v == "row") return NormScheme::Row;
  fail(ErrorCode::InvalidConfigValue, "graph.norm = '" + v + "'");
}

ZeroShotHead parse_head(const std::string& key, const std::string& v) {
  if (v == "kg") return ZeroShotHead::Graph;
  if (v == "ses") return ZeroShotHead::Embedding;
  fail(ErrorCode::InvalidConfigValue, key + " = '" + v + "'");
}

std::size_t positive(const Config& c, const std::string& key) {
  const auto v = c.count(key);
  if (v == 0) fail(ErrorCode::InvalidConfigValue, key + " must be positive");
  return v;
}

double positive_real(const Config& c, const std::string& key) {
  const double v = c.real(key);
  if (!(v > 0.0)) fail(ErrorCode::InvalidConfigValue, key + " must be positive");
  return v;
}

}  // namespace

ExperimentConfig experiment_config(const Config& c) {
  ExperimentConfig e;
  e.seed = c.count("seed");
  e.protocols = parse_protocols(c.text("protocol"));
  e.ks = parse_topk(c.text("topk"));

  auto& d = e.data;
  d.verb_features = c.path("data.verb_features");
  d.noun_features = c.path("data.noun_features");
  d.split = c.path("data.split");
  d.verb_embeddings = c.path("data.verb_embeddings");
  d.noun_embeddings = c.path("data.noun_embeddings");
  d.noun_edges = c.path("data.noun_edges");
  d.noun_augment = c.path("data.noun_augment");
  d.verb_similarity = c.path("data.verb_similarity");
  d.verb_classes = c.path("data.verb_classes");
  d.pair_corpus = c.path("data.pair_corpus");
  d.phrases = c.path("data.phrases");

  e.verb_graph = parse_graph_kind(c.text("graph.verb_kind"));
  if (e.verb_graph == GraphKind::NounHypernym)
    fail(ErrorCode::InvalidConfigValue, "graph.verb_kind must be a verb graph");
  e.wn_threshold = c.real("graph.wn_threshold");
  e.mode = parse_mode(c.text("graph.mode"));
  e.norm = parse_norm(c.text("graph.norm"));

  e.adversarial = c.flag("heads.adversarial");
  auto& h = e.heads;
  h.layers = positive(c, "heads.layers");
  h.hidden = positive(c, "heads.hidden");
  h.out_dim = positive(c, "heads.out_dim");
  h.epochs = positive(c, "heads.epochs");
  h.batch_size = positive(c, "heads.batch_size");
  h.lr = positive_real(c, "heads.lr");
  h.lambda = c.real("heads.lambda");
  if (h.lambda < 0) fail(ErrorCode::InvalidConfigValue, "heads.lambda must be non-negative");
  h.disc_lr = c.real("heads.disc_lr");
  if (h.disc_lr < 0) fail(ErrorCode::InvalidConfigValue, "heads.disc_lr must be non-negative");
  h.disc_steps = positive(c, "heads.disc_steps");

  auto& g = e.gcn;
  g.layers = positive(c, "gcn.layers");
  g.hidden = positive(c, "gcn.hidden");
  g.slope = c.real("gcn.slope");
  g.epochs = positive(c, "gcn.epochs");
  g.lr = positive_real(c, "gcn.lr");
  g.normalize = c.flag("gcn.normalize");

  e.verb_head = parse_head("zero_shot.verb_head", c.text("zero_shot.verb_head"));
  e.noun_head = parse_head("zero_shot.noun_head", c.text("zero_shot.noun_head"));
  e.ses.layers = positive(c, "ses.layers");
  e.ses.hidden = positive(c, "ses.hidden");
  e.ses.epochs = positive(c, "ses.epochs");
  e.ses.batch_size = positive(c, "ses.batch_size");
  e.ses.lr = positive_real(c, "ses.lr");

  e.affordance_variant = parse_affordance_variant(c.text("affordance.variant"));
  auto& a = e.affordance;
  a.neg_ratio = c.count("affordance.neg_ratio");
  a.min_count = c.count("affordance.min_count");
  a.epochs = positive(c, "affordance.epochs");
  a.batch_size = positive(c, "affordance.batch_size");
  a.lr = positive_real(c, "affordance.lr");
  a.hidden = positive(c, "affordance.hidden");
  a.holdout = c.real("affordance.holdout");
  if (a.holdout < 0 || a.holdout >= 1) fail(ErrorCode::InvalidConfigValue, "affordance.holdout must be in [0, 1)");
  a.scale_init = c.real("affordance.scale_init");
  a.offset_init = c.real("affordance.offset_init");
  a.learn_scale = c.flag("affordance.learn_scale");

  e.mapper.hidden = c.count("mapper.hidden");
  e.mapper.epochs = positive(c, "mapper.epochs");
  e.mapper.batch_size = positive(c, "mapper.batch_size");
  e.mapper.lr = positive_real(c, "mapper.lr");

  e.grid = positive(c, "eval.grid");
  e.chance_trials = c.count("eval.chance_trials");
  e.canonical = c.canonical();
  return e;
}

}  // namespace zsca
