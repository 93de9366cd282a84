#include "zsca/heads.hpp"

#include <algorithm>
#include <cmath>

#include "zsca/error.hpp"

namespace zsca {

namespace {

std::size_t argmax_row(const Matrix& m, std::size_t r) {
  const auto row = m.row(r);
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

double accuracy(const Matrix& logits, std::span<const std::size_t> labels) {
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) hits += argmax_row(logits, r) == labels[r];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::vector<std::size_t> gather(std::span<const std::size_t> values,
                                std::span<const std::size_t> positions) {
  std::vector<std::size_t> out;
  out.reserve(positions.size());
  for (auto p : positions) out.push_back(values[p]);
  return out;
}

void check_loss(double loss, std::string_view where) {
  if (!std::isfinite(loss)) fail(ErrorCode::NonFiniteLoss, std::string(where));
}

}  // namespace

std::string_view branch_name(Branch b) { return b == Branch::Verb ? "verb" : "noun"; }

Matrix BranchModel::project(const Matrix& features) const { return projection.forward(features); }

void BranchModel::store(Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.put_text(prefix + ".branch", std::string(branch_name(branch)));
  projection.store(ckpt, prefix + ".projection");
  ckpt.put(prefix + ".classifier", classifier);
  ckpt.put_tokens(prefix + ".classes", classes);
  ckpt.put(prefix + ".loss_trace", Matrix::column(loss_trace));
}

BranchModel BranchModel::load(const Checkpoint& ckpt, const std::string& prefix) {
  BranchModel m;
  m.branch = ckpt.text(prefix + ".branch") == "noun" ? Branch::Noun : Branch::Verb;
  m.projection = Mlp::load(ckpt, prefix + ".projection");
  m.classifier = ckpt.matrix(prefix + ".classifier");
  m.classes = ckpt.tokens(prefix + ".classes");
  const auto& trace = ckpt.matrix(prefix + ".loss_trace");
  m.loss_trace.assign(trace.values().begin(), trace.values().end());
  if (m.classifier.rows() != m.classes.size() || m.classifier.cols() != m.output_dim())
    fail(ErrorCode::MetadataMismatch, prefix + ": classifier shape disagrees with projection");
  return m;
}

Matrix Discriminator::logits(const Matrix& features) const {
  return add_row_vector(matmul_nt(features, weights), bias);
}

BranchLabels branch_train_labels(const FeatureTable& features, const VocabularySplit& split,
                                 Branch branch) {
  BranchLabels out;
  const bool verb = branch == Branch::Verb;
  const Vocabulary full = verb ? split.verbs() : split.nouns();
  out.classes = verb ? split.verbs_seen : split.nouns_seen;
  if (out.classes.size() < 2) {
    fail(ErrorCode::TooFewClasses, std::string(branch_name(branch)) + " branch has " +
                                       std::to_string(out.classes.size()) + " seen classes");
  }
  const auto& labels = verb ? features.verb_labels : features.noun_labels;
  for (std::size_t r = 0; r < features.samples(); ++r) {
    if (features.split_tags[r] != SplitTag::Train) continue;
    if (labels[r] >= full.size()) fail(ErrorCode::LabelOutOfRange, "row " + std::to_string(r));
    const auto& token = full[labels[r]];
    auto idx = vocab_index(out.classes, token);
    if (!idx) {
      fail(ErrorCode::UnseenLabelInTrain, "train sample " + features.sample_ids[r] + " has unseen " +
                                              std::string(branch_name(branch)) + " " + token);
    }
    out.rows.push_back(r);
    out.labels.push_back(*idx);
  }
  if (out.rows.empty()) fail(ErrorCode::EmptyTrainSet, std::string(branch_name(branch)));
  return out;
}

BranchModel init_branch(std::size_t input_dim, std::size_t num_classes, Branch branch,
                        const HeadsConfig& config, Rng& rng) {
  if (config.layers == 0 || config.out_dim == 0)
    fail(ErrorCode::InvalidConfigValue, "heads.layers and heads.out_dim must be positive");
  std::vector<std::size_t> sizes{input_dim};
  for (std::size_t i = 1; i < config.layers; ++i) sizes.push_back(config.hidden);
  sizes.push_back(config.out_dim);
  BranchModel m;
  m.branch = branch;
  m.projection = Mlp::create(sizes, rng);
  m.classifier = glorot(num_classes, config.out_dim, rng);
  return m;
}

BranchGradients branch_loss(const BranchModel& model, const Matrix& x,
                            std::span<const std::size_t> labels) {
  Mlp::Cache cache;
  const Matrix h = model.projection.forward(x, cache);
  const auto ce = cross_entropy(matmul_nt(h, model.classifier), labels);
  BranchGradients g;
  g.loss = ce.value;
  g.classifier = matmul_tn(ce.gradient, h);
  g.features_grad = matmul(ce.gradient, model.classifier);
  model.projection.backward(cache, g.features_grad, g.projection);
  return g;
}

BranchGradients adversarial_feature_loss(const BranchModel& model, const Discriminator& disc,
                                         const Matrix& x, std::span<const std::size_t> labels,
                                         std::span<const std::size_t> opposite_labels,
                                         double lambda) {
  Mlp::Cache cache;
  const Matrix h = model.projection.forward(x, cache);
  const auto cls = cross_entropy(matmul_nt(h, model.classifier), labels);
  const auto dis = cross_entropy(disc.logits(h), opposite_labels);
  BranchGradients g;
  g.loss = cls.value - lambda * dis.value;
  g.classifier = matmul_tn(cls.gradient, h);
  g.features_grad = matmul(cls.gradient, model.classifier);
  add_in_place(g.features_grad, matmul(dis.gradient, disc.weights), -lambda);
  model.projection.backward(cache, g.features_grad, g.projection);
  return g;
}

DiscriminatorGradients discriminator_loss(const Discriminator& disc, const Matrix& features,
                                          std::span<const std::size_t> labels) {
  const auto ce = cross_entropy(disc.logits(features), labels);
  return {ce.value, matmul_tn(ce.gradient, features), column_sums(ce.gradient)};
}

namespace {

struct BranchTrainer {
  BranchModel model;
  MlpOptimizer projection_opt;
  OptimizerState classifier_opt;

  BranchTrainer(BranchModel m, const AdamConfig& adam)
      : model(std::move(m)),
        projection_opt(model.projection, adam),
        classifier_opt(model.classifier.rows(), model.classifier.cols(), adam) {}

  void apply(const BranchGradients& g) {
    projection_opt.apply(model.projection, g.projection);
    classifier_opt.apply(model.classifier, g.classifier);
  }
};

struct DiscTrainer {
  Discriminator disc;
  OptimizerState w_opt;
  OptimizerState b_opt;

  DiscTrainer(std::size_t classes, std::size_t dim, const AdamConfig& adam, Rng& rng)
      : disc{glorot(classes, dim, rng), Matrix(1, classes)},
        w_opt(classes, dim, adam),
        b_opt(1, classes, adam) {}

  void step(const Matrix& features, std::span<const std::size_t> labels) {
    const auto g = discriminator_loss(disc, features, labels);
    check_loss(g.loss, "discriminator");
    w_opt.apply(disc.weights, g.weights);
    b_opt.apply(disc.bias, g.bias);
  }
};

AdamConfig adam_for(const HeadsConfig& config) {
  AdamConfig adam;
  adam.learning_rate = config.lr;
  return adam;
}

}  // namespace

BranchModel train_branch(const FeatureTable& features, const VocabularySplit& split,
                         Branch branch, const HeadsConfig& config, std::uint64_t seed) {
  const auto bl = branch_train_labels(features, split, branch);
  Rng base(seed);
  Rng init = base.fork(branch_name(branch));
  Rng batch_rng = base.fork("batches");
  BranchTrainer trainer(init_branch(features.features.cols(), bl.classes.size(), branch, config, init),
                        adam_for(config));
  trainer.model.classes = bl.classes;

  std::vector<std::size_t> positions(bl.rows.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& batch : make_batches(positions, config.batch_size, batch_rng)) {
      const auto rows = gather(bl.rows, batch);
      const auto labels = gather(bl.labels, batch);
      const auto g = branch_loss(trainer.model, select_rows(features.features, rows), labels);
      check_loss(g.loss, std::string(branch_name(branch)) + " head");
      trainer.apply(g);
      total += g.loss * static_cast<double>(batch.size());
    }
    trainer.model.loss_trace.push_back(total / static_cast<double>(positions.size()));
  }
  return std::move(trainer.model);
}

AdversarialResult train_branch_adversarial(const FeatureTable& verb_features,
                                           const FeatureTable& noun_features,
                                           const VocabularySplit& split, const HeadsConfig& config,
                                           std::uint64_t seed) {
  if (verb_features.samples() != noun_features.samples() ||
      verb_features.sample_ids != noun_features.sample_ids ||
      verb_features.verb_labels != noun_features.verb_labels ||
      verb_features.noun_labels != noun_features.noun_labels ||
      verb_features.split_tags != noun_features.split_tags) {
    fail(ErrorCode::SampleAlignmentMismatch, "verb and noun feature tables are not row-aligned");
  }
  const auto vl = branch_train_labels(verb_features, split, Branch::Verb);
  const auto nl = branch_train_labels(noun_features, split, Branch::Noun);

  Rng base(seed);
  Rng verb_init = base.fork("verb");
  Rng noun_init = base.fork("noun");
  Rng disc_init = base.fork("discriminators");
  Rng batch_rng = base.fork("batches");
  const AdamConfig adam = adam_for(config);
  BranchTrainer verb(init_branch(verb_features.features.cols(), vl.classes.size(), Branch::Verb,
                                 config, verb_init),
                     adam);
  BranchTrainer noun(init_branch(noun_features.features.cols(), nl.classes.size(), Branch::Noun,
                                 config, noun_init),
                     adam);
  verb.model.classes = vl.classes;
  noun.model.classes = nl.classes;
  AdamConfig disc_adam = adam;
  if (config.disc_lr > 0.0) disc_adam.learning_rate = config.disc_lr;
  DiscTrainer verb_disc(nl.classes.size(), config.out_dim, disc_adam, disc_init);
  DiscTrainer noun_disc(vl.classes.size(), config.out_dim, disc_adam, disc_init);

  AdversarialResult result;
  std::vector<std::size_t> positions(vl.rows.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double verb_total = 0.0;
    double noun_total = 0.0;
    for (const auto& batch : make_batches(positions, config.batch_size, batch_rng)) {
      const auto rows = gather(vl.rows, batch);
      const auto yv = gather(vl.labels, batch);
      const auto yn = gather(nl.labels, batch);
      const Matrix xv = select_rows(verb_features.features, rows);
      const Matrix xn = select_rows(noun_features.features, rows);

      const Matrix hv = verb.model.project(xv);
      const Matrix hn = noun.model.project(xn);
      for (std::size_t k = 0; k < std::max<std::size_t>(config.disc_steps, 1); ++k) {
        verb_disc.step(hv, yn);
        noun_disc.step(hn, yv);
      }

      const auto gv = config.lambda == 0.0
                          ? branch_loss(verb.model, xv, yv)
                          : adversarial_feature_loss(verb.model, verb_disc.disc, xv, yv, yn, config.lambda);
      const auto gn = config.lambda == 0.0
                          ? branch_loss(noun.model, xn, yn)
                          : adversarial_feature_loss(noun.model, noun_disc.disc, xn, yn, yv, config.lambda);
      check_loss(gv.loss, "verb head");
      check_loss(gn.loss, "noun head");
      verb.apply(gv);
      noun.apply(gn);
      verb_total += gv.loss * static_cast<double>(batch.size());
      noun_total += gn.loss * static_cast<double>(batch.size());
    }
    const double n = static_cast<double>(positions.size());
    verb.model.loss_trace.push_back(verb_total / n);
    noun.model.loss_trace.push_back(noun_total / n);
    const Matrix fv = verb.model.project(select_rows(verb_features.features, vl.rows));
    const Matrix fn = noun.model.project(select_rows(noun_features.features, nl.rows));
    result.verb_disc_accuracy.push_back(accuracy(verb_disc.disc.logits(fv), nl.labels));
    result.noun_disc_accuracy.push_back(accuracy(noun_disc.disc.logits(fn), vl.labels));
  }
  result.verb = std::move(verb.model);
  result.noun = std::move(noun.model);
  result.verb_disc = std::move(verb_disc.disc);
  result.noun_disc = std::move(noun_disc.disc);
  return result;
}

Matrix predict_scores(const BranchModel& model, const Matrix& features,
                      const std::optional<Matrix>& weights_override) {
  const Matrix& weights = weights_override ? *weights_override : model.classifier;
  if (weights.cols() != model.output_dim()) {
    fail(ErrorCode::ShapeMismatch, "classifier width " + std::to_string(weights.cols()) +
                                       " != projected dim " + std::to_string(model.output_dim()));
  }
  return sigmoid(matmul_nt(model.project(features), weights));
}

double probe_accuracy(const Matrix& features, std::span<const std::size_t> labels,
                      std::size_t num_classes, std::span<const std::size_t> train_rows,
                      std::span<const std::size_t> test_rows, std::size_t epochs, double lr,
                      std::uint64_t seed) {
  Rng rng(seed);
  Discriminator probe{Matrix(num_classes, features.cols()), Matrix(1, num_classes)};
  AdamConfig adam;
  adam.learning_rate = lr;
  OptimizerState w_opt(num_classes, features.cols(), adam);
  OptimizerState b_opt(1, num_classes, adam);
  const std::vector<std::size_t> train(train_rows.begin(), train_rows.end());
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    for (const auto& batch : make_batches(train, 64, rng)) {
      const auto g = discriminator_loss(probe, select_rows(features, batch), gather(labels, batch));
      w_opt.apply(probe.weights, g.weights);
      b_opt.apply(probe.bias, g.bias);
    }
  }
  const auto test_labels = gather(labels, test_rows);
  return accuracy(probe.logits(select_rows(features, test_rows)), test_labels);
}

}  // namespace zsca
