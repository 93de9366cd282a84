#pragma once

// Dense row-major float64 kernel with hand-written gradients.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace zsca {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix column(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

void require_same_shape(const Matrix& a, const Matrix& b, std::string_view what);

Matrix matmul(const Matrix& a, const Matrix& b);
// a^T * b and a * b^T without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scaled(const Matrix& a, double factor);
void add_in_place(Matrix& acc, const Matrix& delta, double factor = 1.0);

// Adds a 1 x cols bias row to every row.
Matrix add_row_vector(const Matrix& a, const Matrix& bias);
// Sums over rows, giving 1 x cols.
Matrix column_sums(const Matrix& a);

Matrix select_rows(const Matrix& a, std::span<const std::size_t> indices);
Matrix hstack(const Matrix& left, const Matrix& right);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);
double cosine_similarity(std::span<const double> a, std::span<const double> b);
bool all_finite(const Matrix& a);

double sigmoid(double x);
Matrix sigmoid(const Matrix& x);
Matrix softmax_rows(const Matrix& logits);

enum class Activation { Linear, Relu, LeakyRelu };
Matrix activate(const Matrix& pre, Activation act, double slope = 0.2);
// Backpropagates through the activation given its pre-activation input.
Matrix activate_backward(const Matrix& pre, const Matrix& grad_out, Activation act,
                         double slope = 0.2);

struct LossValue {
  double value = 0.0;
  Matrix gradient;
};

// Mean over rows of -log softmax(logits)[label]; gradient w.r.t. logits.
LossValue cross_entropy(const Matrix& logits, std::span<const std::size_t> labels);
// Mean of squared differences; gradient w.r.t. pred.
LossValue mse(const Matrix& pred, const Matrix& target);
// Mean binary cross-entropy on probabilities in (0,1); gradient w.r.t. scores (n x 1).
LossValue bce(std::span<const double> scores, std::span<const double> labels);
// Same loss evaluated through sigmoid(logits); gradient w.r.t. logits.
LossValue bce_with_logits(std::span<const double> logits, std::span<const double> labels);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class OptimizerState {
 public:
  OptimizerState() = default;
  OptimizerState(std::size_t rows, std::size_t cols, AdamConfig config = {});

  const AdamConfig& config() const noexcept { return config_; }
  std::uint64_t step() const noexcept { return step_; }
  const Matrix& first_moment() const noexcept { return m_; }
  const Matrix& second_moment() const noexcept { return v_; }

  // Applies one bias-corrected adaptive-moment update in place.
  void apply(Matrix& params, const Matrix& grad);

 private:
  AdamConfig config_;
  Matrix m_;
  Matrix v_;
  std::uint64_t step_ = 0;
};

Matrix optimizer_step(const Matrix& params, const Matrix& grad, OptimizerState& state);

// Five-point central differences with the given step; returns the max
// relative error |a - n| / max(|a|, |n|, floor) over all entries.
double grad_check(const std::function<double(const Matrix&)>& f, const Matrix& x,
                  const Matrix& analytic, double step = 1e-4, double floor = 1e-6);

// Seeded generator whose draw sequence is fixed by the seed on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64();
  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  double normal();
  std::size_t below(std::size_t n);
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }
  // Independent stream derived from this generator's seed and a tag.
  Rng fork(std::string_view tag) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

Matrix random_normal(std::size_t rows, std::size_t cols, double stddev, Rng& rng);
// Glorot-style scaled normal init.
Matrix glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng);

std::uint64_t fnv1a64(std::span<const unsigned char> bytes,
                      std::uint64_t seed = 14695981039346656037ULL);
std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed = 14695981039346656037ULL);

}  // namespace zsca
