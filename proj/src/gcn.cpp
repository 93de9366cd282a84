#include "zsca/gcn.hpp"

#include <algorithm>
#include <cmath>

#include "zsca/error.hpp"

namespace zsca {

namespace {

void check_nodes(std::span<const std::size_t> nodes, std::size_t count) {
  for (auto n : nodes) {
    if (n >= count) {
      fail(ErrorCode::IndexOutOfRange, "node " + std::to_string(n) + " of " + std::to_string(count));
    }
  }
}

struct ForwardCache {
  std::vector<Matrix> propagated;  // prop(H_l)
  std::vector<Matrix> pre;         // prop(H_l) W_l
};

Matrix forward_cached(const GcnModel& model, const Matrix& x, ForwardCache& cache) {
  if (x.rows() != model.op.size()) {
    fail(ErrorCode::ShapeMismatch, "node features have " + std::to_string(x.rows()) +
                                       " rows, operator has " + std::to_string(model.op.size()));
  }
  if (x.cols() != model.input_dim()) {
    fail(ErrorCode::ShapeMismatch, "node features have " + std::to_string(x.cols()) +
                                       " columns, model expects " + std::to_string(model.input_dim()));
  }
  Matrix h = x;
  for (const auto& layer : model.layers) {
    Matrix p = model.op.propagate(h);
    Matrix pre = matmul(p, layer.weight);
    h = activate(pre, layer.activation, model.slope);
    cache.propagated.push_back(std::move(p));
    cache.pre.push_back(std::move(pre));
  }
  return h;
}

}  // namespace

Matrix normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double n = l2_norm(row);
    if (n > 0.0) {
      for (double& v : row) v /= n;
    }
  }
  return out;
}

void GcnModel::store(Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.put_scalar(prefix + ".depth", static_cast<double>(layers.size()));
  for (std::size_t i = 0; i < layers.size(); ++i) {
    ckpt.put(prefix + ".w" + std::to_string(i), layers[i].weight);
    ckpt.put_text(prefix + ".act" + std::to_string(i),
                  layers[i].activation == Activation::Linear ? "linear" : "leaky");
  }
  op.store(ckpt, prefix + ".op");
  ckpt.put_scalar(prefix + ".slope", slope);
  ckpt.put_scalar(prefix + ".normalize", normalize ? 1.0 : 0.0);
  ckpt.put_scalar(prefix + ".target_norm", target_norm);
  ckpt.put(prefix + ".loss_trace", Matrix::column(loss_trace));
}

GcnModel GcnModel::load(const Checkpoint& ckpt, const std::string& prefix) {
  GcnModel m;
  const auto depth = static_cast<std::size_t>(ckpt.scalar(prefix + ".depth"));
  for (std::size_t i = 0; i < depth; ++i) {
    m.layers.push_back({ckpt.matrix(prefix + ".w" + std::to_string(i)),
                        ckpt.text(prefix + ".act" + std::to_string(i)) == "linear"
                            ? Activation::Linear
                            : Activation::LeakyRelu});
  }
  m.op = PropagationOperator::load(ckpt, prefix + ".op");
  m.slope = ckpt.scalar(prefix + ".slope");
  m.normalize = ckpt.scalar(prefix + ".normalize") != 0.0;
  m.target_norm = ckpt.scalar(prefix + ".target_norm");
  const auto& trace = ckpt.matrix(prefix + ".loss_trace");
  m.loss_trace.assign(trace.values().begin(), trace.values().end());
  return m;
}

GcnModel init_gcn(PropagationOperator op, std::size_t input_dim, std::size_t output_dim,
                  const GcnConfig& config, Rng& rng) {
  if (config.layers == 0) fail(ErrorCode::InvalidConfigValue, "gcn.layers must be positive");
  GcnModel m;
  m.op = std::move(op);
  m.slope = config.slope;
  m.normalize = config.normalize;
  std::size_t in = input_dim;
  for (std::size_t i = 0; i < config.layers; ++i) {
    const bool last = i + 1 == config.layers;
    const std::size_t out = last ? output_dim : config.hidden;
    m.layers.push_back({glorot(in, out, rng), last ? Activation::Linear : Activation::LeakyRelu});
    in = out;
  }
  return m;
}

Matrix gcn_forward(const GcnModel& model, const Matrix& node_features) {
  ForwardCache cache;
  return forward_cached(model, node_features, cache);
}

GcnGradients gcn_loss(const GcnModel& model, const Matrix& node_features,
                      std::span<const std::size_t> seen_nodes, const Matrix& targets) {
  check_nodes(seen_nodes, model.op.size());
  ForwardCache cache;
  const Matrix out = forward_cached(model, node_features, cache);
  const Matrix picked = select_rows(out, seen_nodes);
  require_same_shape(picked, targets, "gcn supervision");

  GcnGradients g;
  Matrix grad_picked;
  if (model.normalize) {
    const Matrix unit = normalize_rows(picked);
    const auto loss = mse(unit, normalize_rows(targets));
    g.loss = loss.value;
    grad_picked = Matrix(picked.rows(), picked.cols());
    for (std::size_t r = 0; r < picked.rows(); ++r) {
      const double norm = l2_norm(picked.row(r));
      if (norm == 0.0) continue;
      const double proj = dot(unit.row(r), loss.gradient.row(r));
      for (std::size_t c = 0; c < picked.cols(); ++c) {
        grad_picked(r, c) = (loss.gradient(r, c) - unit(r, c) * proj) / norm;
      }
    }
  } else {
    auto loss = mse(picked, targets);
    g.loss = loss.value;
    grad_picked = std::move(loss.gradient);
  }

  Matrix grad_h(out.rows(), out.cols());
  for (std::size_t i = 0; i < seen_nodes.size(); ++i) {
    auto dst = grad_h.row(seen_nodes[i]);
    const auto src = grad_picked.row(i);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
  }
  g.weights.resize(model.layers.size());
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const Matrix grad_pre =
        activate_backward(cache.pre[l], grad_h, model.layers[l].activation, model.slope);
    g.weights[l] = matmul_tn(cache.propagated[l], grad_pre);
    if (l > 0) grad_h = model.op.propagate_transposed(matmul_nt(grad_pre, model.layers[l].weight));
  }
  return g;
}

GcnModel train_gcn(const PropagationOperator& op, const Matrix& node_features,
                   const Matrix& seen_weights, std::span<const std::size_t> seen_nodes,
                   const GcnConfig& config, std::uint64_t seed) {
  if (seen_nodes.empty()) fail(ErrorCode::NoSeenNodes, "no supervised rows");
  check_nodes(seen_nodes, op.size());
  if (seen_weights.rows() != seen_nodes.size()) {
    fail(ErrorCode::ShapeMismatch, std::to_string(seen_weights.rows()) + " target rows for " +
                                       std::to_string(seen_nodes.size()) + " seen nodes");
  }
  Rng rng = Rng(seed).fork("gcn");
  GcnModel model = init_gcn(op, node_features.cols(), seen_weights.cols(), config, rng);
  double norm_sum = 0.0;
  for (std::size_t r = 0; r < seen_weights.rows(); ++r) norm_sum += l2_norm(seen_weights.row(r));
  model.target_norm = norm_sum / static_cast<double>(seen_weights.rows());

  AdamConfig adam;
  adam.learning_rate = config.lr;
  std::vector<OptimizerState> opts;
  for (const auto& l : model.layers) opts.emplace_back(l.weight.rows(), l.weight.cols(), adam);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto g = gcn_loss(model, node_features, seen_nodes, seen_weights);
    if (!std::isfinite(g.loss)) fail(ErrorCode::NonFiniteLoss, "gcn epoch " + std::to_string(epoch));
    model.loss_trace.push_back(g.loss);
    for (std::size_t l = 0; l < model.layers.size(); ++l) opts[l].apply(model.layers[l].weight, g.weights[l]);
  }
  return model;
}

GcnModel train_gcn(const LexicalGraph& graph, const PropagationOperator& op,
                   const EmbeddingTable& embeddings, const Matrix& seen_weights,
                   std::span<const std::size_t> seen_nodes, const GcnConfig& config,
                   std::uint64_t seed) {
  return train_gcn(op, node_embeddings(graph, embeddings), seen_weights, seen_nodes, config, seed);
}

Matrix predict_unseen_weights(const GcnModel& model, const Matrix& node_features,
                              std::span<const std::size_t> nodes) {
  check_nodes(nodes, model.op.size());
  Matrix out = select_rows(gcn_forward(model, node_features), nodes);
  if (!model.normalize) return out;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double n = l2_norm(row);
    if (n == 0.0) continue;
    const double factor = model.target_norm / n;
    for (double& v : row) v *= factor;
  }
  return out;
}

void SesModel::store(Checkpoint& ckpt, const std::string& prefix) const {
  projection.store(ckpt, prefix + ".projection");
}

SesModel SesModel::load(const Checkpoint& ckpt, const std::string& prefix) {
  return {Mlp::load(ckpt, prefix + ".projection")};
}

SesModel train_ses(const Matrix& features, std::span<const std::size_t> labels,
                   const std::vector<std::string>& label_tokens, const EmbeddingTable& embeddings,
                   const SesConfig& config, std::uint64_t seed) {
  if (labels.size() != features.rows()) fail(ErrorCode::ShapeMismatch, "one label per feature row");
  if (labels.empty()) fail(ErrorCode::EmptyTrainSet, "ses head");
  Matrix targets(labels.size(), embeddings.dim());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] >= label_tokens.size()) fail(ErrorCode::LabelOutOfRange, "ses label");
    const auto e = embeddings.at(label_tokens[labels[r]]);
    std::ranges::copy(e, targets.row(r).begin());
  }
  Rng rng = Rng(seed).fork("ses");
  std::vector<std::size_t> sizes{features.cols()};
  for (std::size_t i = 1; i < config.layers; ++i) sizes.push_back(config.hidden);
  sizes.push_back(embeddings.dim());
  SesModel model{Mlp::create(sizes, rng)};
  AdamConfig adam;
  adam.learning_rate = config.lr;
  MlpOptimizer opt(model.projection, adam);
  std::vector<std::size_t> rows(labels.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& batch : make_batches(rows, config.batch_size, rng)) {
      Mlp::Cache cache;
      const Matrix pred = model.projection.forward(select_rows(features, batch), cache);
      const auto loss = mse(pred, select_rows(targets, batch));
      if (!std::isfinite(loss.value)) fail(ErrorCode::NonFiniteLoss, "ses head");
      std::vector<AffineLayer> grads;
      model.projection.backward(cache, loss.gradient, grads);
      opt.apply(model.projection, grads);
    }
  }
  return model;
}

Matrix ses_predict(const SesModel& model, const Matrix& features, const EmbeddingTable& embeddings,
                   const std::vector<std::string>& class_tokens) {
  const Matrix proj = model.projection.forward(features);
  Matrix scores(features.rows(), class_tokens.size());
  for (std::size_t c = 0; c < class_tokens.size(); ++c) {
    const auto e = embeddings.at(class_tokens[c]);
    if (e.size() != proj.cols()) fail(ErrorCode::ShapeMismatch, "ses embedding width");
    for (std::size_t r = 0; r < proj.rows(); ++r) {
      double d2 = 0.0;
      const auto p = proj.row(r);
      for (std::size_t j = 0; j < p.size(); ++j) d2 += (p[j] - e[j]) * (p[j] - e[j]);
      scores(r, c) = sigmoid(-d2);
    }
  }
  return scores;
}

}  // namespace zsca
