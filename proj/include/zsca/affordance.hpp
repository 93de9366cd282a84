#pragma once

// Verb-noun compatibility scoring and the map from projected verb features
// into the verb embedding space.

#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "zsca/corpora_io.hpp"
#include "zsca/mlp.hpp"
#include "zsca/numerics.hpp"

namespace zsca {

enum class AffordanceVariant { ProjCosine, ConcatScoring, ContextScoring, Lookup, GroundTruth, Uniform };
std::string_view affordance_variant_name(AffordanceVariant v);
AffordanceVariant parse_affordance_variant(std::string_view text);
bool is_trainable(AffordanceVariant v);

using TokenPair = std::pair<std::string, std::string>;  // (verb, noun)

struct AffordanceConfig {
  std::size_t neg_ratio = 3;
  std::size_t min_count = 1;
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  double lr = 1e-2;
  std::size_t hidden = 64;  // scoring MLP width (concat/context)
  double holdout = 0.2;
  double scale_init = 5.0;
  double offset_init = 0.0;
  bool learn_scale = true;
};

class AffordanceScorer {
 public:
  AffordanceVariant variant = AffordanceVariant::Uniform;
  Matrix projection;  // noun dim x verb dim (proj_cosine)
  double scale = 5.0;
  double offset = 0.0;
  Mlp mlp;  // scoring MLP (concat/context)
  EmbeddingTable verb_embeddings;
  EmbeddingTable noun_embeddings;
  std::set<TokenPair> table;  // lookup / ground_truth
  PhraseEmbeddings phrases;   // context_scoring override

  // Score for a query already in verb-embedding space against a noun token.
  double score(std::span<const double> verb_query, std::string_view noun) const;
  // Score for a verb token; lookup tables apply here, and context_scoring uses
  // a phrase embedding for the pair when one is available.
  double score_words(std::string_view verb, std::string_view noun) const;
  // Pre-sigmoid value for the trainable variants.
  double logit(std::span<const double> verb_query, std::span<const double> noun_vector) const;

  void store(Checkpoint& ckpt, const std::string& prefix) const;
  static AffordanceScorer load(const Checkpoint& ckpt, const std::string& prefix);
};

AffordanceScorer make_uniform_scorer();
// Indicator scorer: 1 for listed pairs, 0 otherwise.
AffordanceScorer build_lookup(const std::set<TokenPair>& pairs,
                              AffordanceVariant variant = AffordanceVariant::Lookup);
AffordanceScorer init_scorer(AffordanceVariant variant, std::size_t verb_dim, std::size_t noun_dim,
                             const AffordanceConfig& config, Rng& rng);

// Labelled batch: query rows, noun rows, phrase-override rows (context only,
// empty rows mean "no override"), labels in {0,1}.
struct PairBatch {
  Matrix queries;
  Matrix nouns;
  std::vector<std::vector<double>> phrases;
  std::vector<double> labels;
};

struct AffordanceGradients {
  double loss = 0.0;
  Matrix projection;
  double scale = 0.0;
  double offset = 0.0;
  std::vector<AffineLayer> mlp;
};
// Mean BCE of sigmoid(logit) against the batch labels.
AffordanceGradients affordance_loss(const AffordanceScorer& scorer, const PairBatch& batch);

struct ScorerTraining {
  AffordanceScorer scorer;
  double heldout_accuracy = 0.0;  // on the held-out pairs (train pairs when none are held out)
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t dropped_oov = 0;
  bool degenerate = false;        // no negatives were available
  std::vector<double> loss_trace;
};

// Positives: corpus pairs with count >= min_count plus `extra_positives`,
// restricted to the verb/noun universe; pairs with tokens lacking embeddings
// are dropped and counted.
ScorerTraining train_scorer(const PairCorpus& corpus, const std::vector<TokenPair>& extra_positives,
                            const std::vector<std::string>& verbs,
                            const std::vector<std::string>& nouns, const EmbeddingTable& verb_emb,
                            const EmbeddingTable& noun_emb, AffordanceVariant variant,
                            const AffordanceConfig& config, std::uint64_t seed,
                            const PhraseEmbeddings& phrases = {});

struct MapperConfig {
  std::size_t hidden = 0;  // 0 -> single affine map
  std::size_t epochs = 300;
  std::size_t batch_size = 64;
  double lr = 1e-2;
};

struct VisualMapper {
  Mlp mlp;
  double final_loss = 0.0;
  std::vector<double> loss_trace;

  Matrix map(const Matrix& projected_features) const { return mlp.forward(projected_features); }

  void store(Checkpoint& ckpt, const std::string& prefix) const;
  static VisualMapper load(const Checkpoint& ckpt, const std::string& prefix);
};

// MSE between mlp(features) and targets, with gradients.
struct MapperGradients {
  double loss = 0.0;
  std::vector<AffineLayer> mlp;
};
MapperGradients mapper_loss(const Mlp& mlp, const Matrix& features, const Matrix& targets);

VisualMapper train_mapper(const Matrix& features, std::span<const std::size_t> labels,
                          const std::vector<std::string>& label_tokens,
                          const EmbeddingTable& verb_emb, const MapperConfig& config,
                          std::uint64_t seed);

double test_time_score(const AffordanceScorer& scorer, const VisualMapper& mapper,
                       std::span<const double> projected_feature, std::string_view noun);

}  // namespace zsca
