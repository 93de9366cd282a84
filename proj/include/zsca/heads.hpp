#pragma once

// Factorized verb/noun heads: a projection stack over fixed features plus a
// bias-free seen-class classifier, optionally trained against a
// discriminator that tries to read the opposite label.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zsca/corpora_io.hpp"
#include "zsca/mlp.hpp"
#include "zsca/numerics.hpp"
#include "zsca/vocab_graph.hpp"

namespace zsca {

enum class Branch { Verb, Noun };
std::string_view branch_name(Branch b);

struct HeadsConfig {
  std::size_t layers = 2;    // affine layers in the projection stack
  std::size_t hidden = 256;
  std::size_t out_dim = 64;  // must equal the GCN output dim
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  double lambda = 1.0;       // adversarial weight
  // The discriminator must stay near its optimum or the feature step learns
  // to fool it while keeping the information.
  double disc_lr = 5e-3;  // 0 means use lr
  std::size_t disc_steps = 20;  // discriminator updates per feature update
};

struct BranchModel {
  Branch branch = Branch::Verb;
  Mlp projection;
  Matrix classifier;                 // seen classes x out_dim, no bias
  std::vector<std::string> classes;  // seen tokens in classifier row order
  std::vector<double> loss_trace;    // mean train loss per epoch

  std::size_t input_dim() const { return projection.input_dim(); }
  std::size_t output_dim() const { return projection.output_dim(); }
  Matrix project(const Matrix& features) const;

  void store(Checkpoint& ckpt, const std::string& prefix) const;
  static BranchModel load(const Checkpoint& ckpt, const std::string& prefix);
};

struct Discriminator {
  Matrix weights;  // opposite-branch seen classes x out_dim
  Matrix bias;     // 1 x opposite-branch seen classes
  Matrix logits(const Matrix& features) const;
};

// Seen-class index per train row; throws UnseenLabelInTrain / EmptyTrainSet /
// TooFewClasses.
struct BranchLabels {
  std::vector<std::size_t> rows;    // train rows of the feature table
  std::vector<std::size_t> labels;  // seen-class index per row
  Vocabulary classes;               // seen vocabulary
};
BranchLabels branch_train_labels(const FeatureTable& features, const VocabularySplit& split,
                                 Branch branch);

BranchModel init_branch(std::size_t input_dim, std::size_t num_classes, Branch branch,
                        const HeadsConfig& config, Rng& rng);

// Mean CE of classifier(projection(x)) against labels, with parameter gradients.
struct BranchGradients {
  double loss = 0.0;
  std::vector<AffineLayer> projection;
  Matrix classifier;
  Matrix features_grad;  // d loss / d projected features (before adding any adversarial term)
};
BranchGradients branch_loss(const BranchModel& model, const Matrix& x,
                            std::span<const std::size_t> labels);

// Feature-step objective: CE_cls - lambda * CE(D(F(x)), opposite labels).
BranchGradients adversarial_feature_loss(const BranchModel& model, const Discriminator& disc,
                                         const Matrix& x, std::span<const std::size_t> labels,
                                         std::span<const std::size_t> opposite_labels,
                                         double lambda);

struct DiscriminatorGradients {
  double loss = 0.0;
  Matrix weights;
  Matrix bias;
};
DiscriminatorGradients discriminator_loss(const Discriminator& disc, const Matrix& features,
                                          std::span<const std::size_t> labels);

BranchModel train_branch(const FeatureTable& features, const VocabularySplit& split,
                         Branch branch, const HeadsConfig& config, std::uint64_t seed);

struct AdversarialResult {
  BranchModel verb;
  BranchModel noun;
  Discriminator verb_disc;  // reads noun labels from verb features
  Discriminator noun_disc;  // reads verb labels from noun features
  std::vector<double> verb_disc_accuracy;  // per epoch, on train rows
  std::vector<double> noun_disc_accuracy;
};

AdversarialResult train_branch_adversarial(const FeatureTable& verb_features,
                                           const FeatureTable& noun_features,
                                           const VocabularySplit& split, const HeadsConfig& config,
                                           std::uint64_t seed);

// sigma(F(x) * W^T); `weights_override` replaces the seen classifier (e.g. a
// full-vocabulary bank).
Matrix predict_scores(const BranchModel& model, const Matrix& features,
                      const std::optional<Matrix>& weights_override = std::nullopt);

// Accuracy of a freshly trained linear softmax probe reading `labels` from
// frozen `features`, fitted on `train_rows` and scored on `test_rows`.
double probe_accuracy(const Matrix& features, std::span<const std::size_t> labels,
                      std::size_t num_classes, std::span<const std::size_t> train_rows,
                      std::span<const std::size_t> test_rows, std::size_t epochs, double lr,
                      std::uint64_t seed);

}  // namespace zsca
