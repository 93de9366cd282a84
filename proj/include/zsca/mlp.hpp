#pragma once

// Affine stacks with a rectifier between layers and a linear output.

#include <string>
#include <vector>

#include "zsca/corpora_io.hpp"
#include "zsca/numerics.hpp"

namespace zsca {

struct AffineLayer {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out
};

class Mlp {
 public:
  struct Cache {
    std::vector<Matrix> inputs;  // input to each layer
    std::vector<Matrix> pre;     // pre-activation of each layer
  };

  Mlp() = default;
  explicit Mlp(std::vector<AffineLayer> layers, Activation hidden = Activation::Relu,
               double slope = 0.2);
  // sizes = {in, hidden..., out}; glorot weights, zero biases.
  static Mlp create(const std::vector<std::size_t>& sizes, Rng& rng,
                    Activation hidden = Activation::Relu, double slope = 0.2);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t depth() const noexcept { return layers_.size(); }
  const std::vector<AffineLayer>& layers() const noexcept { return layers_; }
  std::vector<AffineLayer>& layers() noexcept { return layers_; }
  Activation hidden_activation() const noexcept { return hidden_; }

  Matrix forward(const Matrix& x) const;
  Matrix forward(const Matrix& x, Cache& cache) const;
  // Accumulates parameter gradients into `grads` (resized on first use) and
  // returns the gradient with respect to the input.
  Matrix backward(const Cache& cache, const Matrix& grad_out,
                  std::vector<AffineLayer>& grads) const;

  void store(Checkpoint& ckpt, const std::string& prefix) const;
  static Mlp load(const Checkpoint& ckpt, const std::string& prefix);

  bool operator==(const Mlp& other) const;

 private:
  std::vector<AffineLayer> layers_;
  Activation hidden_ = Activation::Relu;
  double slope_ = 0.2;
};

class MlpOptimizer {
 public:
  MlpOptimizer() = default;
  MlpOptimizer(const Mlp& mlp, AdamConfig config);
  void apply(Mlp& mlp, const std::vector<AffineLayer>& grads);

 private:
  std::vector<OptimizerState> weights_;
  std::vector<OptimizerState> biases_;
};

// Contiguous mini-batches over a shuffled copy of `rows`.
std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> rows,
                                                   std::size_t batch_size, Rng& rng);

}  // namespace zsca
