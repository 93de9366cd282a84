#include "zsca/mlp.hpp"

#include <algorithm>

#include "zsca/error.hpp"

namespace zsca {

Mlp::Mlp(std::vector<AffineLayer> layers, Activation hidden, double slope)
    : layers_(std::move(layers)), hidden_(hidden), slope_(slope) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.bias.rows() != 1 || l.bias.cols() != l.weight.cols())
      fail(ErrorCode::ShapeMismatch, "bias does not match layer width");
    if (i > 0 && layers_[i - 1].weight.cols() != l.weight.rows())
      fail(ErrorCode::ShapeMismatch, "layer dimensions do not chain");
  }
}

Mlp Mlp::create(const std::vector<std::size_t>& sizes, Rng& rng, Activation hidden,
                double slope) {
  if (sizes.size() < 2) fail(ErrorCode::InvalidConfigValue, "an affine stack needs >= 1 layer");
  std::vector<AffineLayer> layers;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    if (sizes[i] == 0 || sizes[i + 1] == 0) fail(ErrorCode::InvalidConfigValue, "zero layer width");
    layers.push_back({glorot(sizes[i], sizes[i + 1], rng), Matrix(1, sizes[i + 1])});
  }
  return Mlp(std::move(layers), hidden, slope);
}

std::size_t Mlp::input_dim() const { return layers_.empty() ? 0 : layers_.front().weight.rows(); }
std::size_t Mlp::output_dim() const { return layers_.empty() ? 0 : layers_.back().weight.cols(); }

Matrix Mlp::forward(const Matrix& x) const {
  Cache unused;
  return forward(x, unused);
}

Matrix Mlp::forward(const Matrix& x, Cache& cache) const {
  if (x.cols() != input_dim()) {
    fail(ErrorCode::ShapeMismatch, "input has " + std::to_string(x.cols()) + " columns, layer expects " +
                                       std::to_string(input_dim()));
  }
  cache.inputs.clear();
  cache.pre.clear();
  Matrix h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    cache.inputs.push_back(h);
    Matrix pre = add_row_vector(matmul(h, layers_[i].weight), layers_[i].bias);
    const bool last = i + 1 == layers_.size();
    h = last ? pre : activate(pre, hidden_, slope_);
    cache.pre.push_back(std::move(pre));
  }
  return h;
}

Matrix Mlp::backward(const Cache& cache, const Matrix& grad_out,
                     std::vector<AffineLayer>& grads) const {
  if (grads.size() != layers_.size()) {
    grads.clear();
    for (const auto& l : layers_) {
      grads.push_back({Matrix(l.weight.rows(), l.weight.cols()), Matrix(1, l.bias.cols())});
    }
  }
  Matrix g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const bool last = i + 1 == layers_.size();
    if (!last) g = activate_backward(cache.pre[i], g, hidden_, slope_);
    add_in_place(grads[i].weight, matmul_tn(cache.inputs[i], g));
    add_in_place(grads[i].bias, column_sums(g));
    g = matmul_nt(g, layers_[i].weight);
  }
  return g;
}

void Mlp::store(Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.put_scalar(prefix + ".depth", static_cast<double>(layers_.size()));
  ckpt.put_scalar(prefix + ".slope", slope_);
  ckpt.put_text(prefix + ".hidden", hidden_ == Activation::Relu        ? "relu"
                                    : hidden_ == Activation::LeakyRelu ? "leaky"
                                                                       : "linear");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    ckpt.put(prefix + ".w" + std::to_string(i), layers_[i].weight);
    ckpt.put(prefix + ".b" + std::to_string(i), layers_[i].bias);
  }
}

Mlp Mlp::load(const Checkpoint& ckpt, const std::string& prefix) {
  const auto depth = static_cast<std::size_t>(ckpt.scalar(prefix + ".depth"));
  const auto& hidden = ckpt.text(prefix + ".hidden");
  const Activation act = hidden == "relu"    ? Activation::Relu
                         : hidden == "leaky" ? Activation::LeakyRelu
                                             : Activation::Linear;
  std::vector<AffineLayer> layers;
  for (std::size_t i = 0; i < depth; ++i) {
    layers.push_back({ckpt.matrix(prefix + ".w" + std::to_string(i)),
                      ckpt.matrix(prefix + ".b" + std::to_string(i))});
  }
  return Mlp(std::move(layers), act, ckpt.scalar(prefix + ".slope"));
}

bool Mlp::operator==(const Mlp& other) const {
  if (layers_.size() != other.layers_.size() || hidden_ != other.hidden_ || slope_ != other.slope_)
    return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (!(layers_[i].weight == other.layers_[i].weight) || !(layers_[i].bias == other.layers_[i].bias))
      return false;
  }
  return true;
}

MlpOptimizer::MlpOptimizer(const Mlp& mlp, AdamConfig config) {
  for (const auto& l : mlp.layers()) {
    weights_.emplace_back(l.weight.rows(), l.weight.cols(), config);
    biases_.emplace_back(1, l.bias.cols(), config);
  }
}

void MlpOptimizer::apply(Mlp& mlp, const std::vector<AffineLayer>& grads) {
  auto& layers = mlp.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    weights_[i].apply(layers[i].weight, grads[i].weight);
    biases_[i].apply(layers[i].bias, grads[i].bias);
  }
}

std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> rows,
                                                   std::size_t batch_size, Rng& rng) {
  rng.shuffle(rows);
  if (batch_size == 0) batch_size = rows.size();
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < rows.size(); start += batch_size) {
    const std::size_t end = std::min(rows.size(), start + batch_size);
    batches.emplace_back(rows.begin() + static_cast<std::ptrdiff_t>(start),
                         rows.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace zsca
