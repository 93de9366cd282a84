#pragma once

// Graph convolution that regresses classifier weights from word embeddings,
// plus the embedding-matching head used as an alternative zero-shot branch.

#include <span>
#include <string>
#include <vector>

#include "zsca/corpora_io.hpp"
#include "zsca/mlp.hpp"
#include "zsca/numerics.hpp"
#include "zsca/vocab_graph.hpp"

namespace zsca {

struct GcnConfig {
  std::size_t layers = 2;
  std::size_t hidden = 512;
  double slope = 0.2;
  std::size_t epochs = 300;
  double lr = 1e-3;
  bool normalize = true;
};

struct GcnLayer {
  Matrix weight;  // in x out
  Activation activation = Activation::LeakyRelu;
};

struct GcnModel {
  std::vector<GcnLayer> layers;
  PropagationOperator op;
  double slope = 0.2;
  bool normalize = true;
  double target_norm = 1.0;  // mean L2 norm of the raw supervision rows
  std::vector<double> loss_trace;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().weight.rows(); }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().weight.cols(); }

  void store(Checkpoint& ckpt, const std::string& prefix) const;
  static GcnModel load(const Checkpoint& ckpt, const std::string& prefix);
};

// Hidden layers leaky-rectified, last layer linear.
GcnModel init_gcn(PropagationOperator op, std::size_t input_dim, std::size_t output_dim,
                  const GcnConfig& config, Rng& rng);

Matrix gcn_forward(const GcnModel& model, const Matrix& node_features);

// MSE between (optionally row-normalized) predictions at `seen_nodes` and
// `targets`, with gradients for every layer weight.
struct GcnGradients {
  double loss = 0.0;
  std::vector<Matrix> weights;
};
GcnGradients gcn_loss(const GcnModel& model, const Matrix& node_features,
                      std::span<const std::size_t> seen_nodes, const Matrix& targets);

GcnModel train_gcn(const PropagationOperator& op, const Matrix& node_features,
                   const Matrix& seen_weights, std::span<const std::size_t> seen_nodes,
                   const GcnConfig& config, std::uint64_t seed);
GcnModel train_gcn(const LexicalGraph& graph, const PropagationOperator& op,
                   const EmbeddingTable& embeddings, const Matrix& seen_weights,
                   std::span<const std::size_t> seen_nodes, const GcnConfig& config,
                   std::uint64_t seed);

// Output rows at `nodes`; with normalization on they are rescaled to the
// model's mean seen-weight norm.
Matrix predict_unseen_weights(const GcnModel& model, const Matrix& node_features,
                              std::span<const std::size_t> nodes);

Matrix normalize_rows(const Matrix& m);

struct SesConfig {
  std::size_t layers = 1;
  std::size_t hidden = 256;
  std::size_t epochs = 60;
  std::size_t batch_size = 64;
  double lr = 1e-3;
};

struct SesModel {
  Mlp projection;  // features -> embedding space

  void store(Checkpoint& ckpt, const std::string& prefix) const;
  static SesModel load(const Checkpoint& ckpt, const std::string& prefix);
};

// Fits the projection with squared L2 loss against each label's embedding.
SesModel train_ses(const Matrix& features, std::span<const std::size_t> labels,
                   const std::vector<std::string>& label_tokens, const EmbeddingTable& embeddings,
                   const SesConfig& config, std::uint64_t seed);

// sigma(-||proj(x) - s_c||^2) per class token.
Matrix ses_predict(const SesModel& model, const Matrix& features, const EmbeddingTable& embeddings,
                   const std::vector<std::string>& class_tokens);

}  // namespace zsca
