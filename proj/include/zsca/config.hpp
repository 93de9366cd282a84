#pragma once

// Flat `section.key = value` experiment configuration. Every key is declared
// with a default and a help line; unknown keys are rejected on load.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "zsca/affordance.hpp"
#include "zsca/eval.hpp"
#include "zsca/gcn.hpp"
#include "zsca/heads.hpp"
#include "zsca/vocab_graph.hpp"

namespace zsca {

namespace fs = std::filesystem;

enum class KeyType { Text, Path, Count, Real, Flag };

struct ConfigKey {
  std::string name;
  KeyType type = KeyType::Text;
  std::string fallback;  // default value; empty path means "not set"
  std::string help;
};

const std::vector<ConfigKey>& config_keys();
std::string config_help();

class Config {
 public:
  // All keys at their defaults.
  Config();

  // Relative paths resolve against `base_dir`.
  static Config parse(std::istream& in, const fs::path& base_dir, std::string_view source = "<stream>");
  static Config load(const fs::path& path);

  void set(const std::string& key, const std::string& value, const fs::path& base_dir = fs::current_path());
  const std::string& text(const std::string& key) const;
  double real(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  bool flag(const std::string& key) const;
  // Empty path when unset.
  fs::path path(const std::string& key) const;
  // MissingConfigKey when unset.
  fs::path required_path(const std::string& key) const;

  // Every set path must exist; MissingPath otherwise.
  void check_paths() const;
  // `key = value` lines in key order; used for fingerprints and copies.
  std::string canonical() const;

 private:
  std::map<std::string, std::string> values_;
};

enum class ZeroShotHead { Graph, Embedding };  // "kg" / "ses"

struct DataPaths {
  fs::path verb_features, noun_features, split;
  fs::path verb_embeddings, noun_embeddings;
  fs::path noun_edges, noun_augment;
  fs::path verb_similarity, verb_classes;
  fs::path pair_corpus, phrases;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::vector<Protocol> protocols;
  std::vector<std::size_t> ks;
  DataPaths data;

  GraphKind verb_graph = GraphKind::VnTree;
  double wn_threshold = 2.0;
  PropagationMode mode = PropagationMode::OneWay;
  NormScheme norm = NormScheme::Symmetric;

  bool adversarial = false;
  HeadsConfig heads;
  GcnConfig gcn;
  ZeroShotHead verb_head = ZeroShotHead::Graph;
  ZeroShotHead noun_head = ZeroShotHead::Graph;
  SesConfig ses;

  AffordanceVariant affordance_variant = AffordanceVariant::ProjCosine;
  AffordanceConfig affordance;
  MapperConfig mapper;

  std::size_t grid = 201;
  std::size_t chance_trials = 20;

  std::string canonical;
};

// Typed view with value checks (InvalidConfigValue).
ExperimentConfig experiment_config(const Config& config);

std::vector<Protocol> parse_protocols(std::string_view text);  // "all" or a comma list
std::vector<std::size_t> parse_topk(std::string_view text);     // "1,2,3"

}  // namespace zsca
