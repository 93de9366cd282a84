#include "zsca/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "zsca/error.hpp"

namespace zsca {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    fail(ErrorCode::ShapeMismatch, "data length " + std::to_string(data_.size()) +
                                       " != " + std::to_string(rows) + "x" +
                                       std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) fail(ErrorCode::ShapeMismatch, "ragged initializer");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

void require_same_shape(const Matrix& a, const Matrix& b, std::string_view what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorCode::ShapeMismatch,
         std::string(what) + ": " + shape_str(a) + " vs " + shape_str(b));
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorCode::ShapeMismatch, "matmul " + shape_str(a) + " * " + shape_str(b));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    fail(ErrorCode::ShapeMismatch, "matmul_tn " + shape_str(a) + "^T * " + shape_str(b));
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto a_row = a.row(k);
    auto b_row = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a_row[i];
      if (aki == 0.0) continue;
      auto out_row = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    fail(ErrorCode::ShapeMismatch, "matmul_nt " + shape_str(a) + " * " + shape_str(b) + "^T");
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto a_row = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a_row, b.row(j));
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix out = a;
  add_in_place(out, b);
  return out;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "subtract");
  Matrix out = a;
  add_in_place(out, b, -1.0);
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return out;
}

Matrix scaled(const Matrix& a, double factor) {
  Matrix out = a;
  for (double& v : out.values()) v *= factor;
  return out;
}

void add_in_place(Matrix& acc, const Matrix& delta, double factor) {
  require_same_shape(acc, delta, "add_in_place");
  auto a = acc.values();
  auto d = delta.values();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += factor * d[i];
}

Matrix add_row_vector(const Matrix& a, const Matrix& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    fail(ErrorCode::ShapeMismatch, "bias " + shape_str(bias) + " for " + shape_str(a));
  }
  Matrix out = a;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias(0, j);
  }
  return out;
}

Matrix column_sums(const Matrix& a) {
  Matrix out(1, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out(0, j) += r[j];
  }
  return out;
}

Matrix select_rows(const Matrix& a, std::span<const std::size_t> indices) {
  Matrix out(indices.size(), a.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= a.rows()) {
      fail(ErrorCode::IndexOutOfRange, "row " + std::to_string(indices[i]) + " of " +
                                           std::to_string(a.rows()));
    }
    std::ranges::copy(a.row(indices[i]), out.row(i).begin());
  }
  return out;
}

Matrix hstack(const Matrix& left, const Matrix& right) {
  if (left.rows() != right.rows()) {
    fail(ErrorCode::ShapeMismatch, "hstack " + shape_str(left) + " | " + shape_str(right));
  }
  Matrix out(left.rows(), left.cols() + right.cols());
  for (std::size_t i = 0; i < left.rows(); ++i) {
    auto o = out.row(i);
    std::ranges::copy(left.row(i), o.begin());
    std::ranges::copy(right.row(i), o.begin() + static_cast<std::ptrdiff_t>(left.cols()));
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    fail(ErrorCode::ShapeMismatch, "dot of lengths " + std::to_string(a.size()) + " and " +
                                       std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) fail(ErrorCode::ZeroVector, "cosine of a zero vector");
  return dot(a, b) / (na * nb);
}

bool all_finite(const Matrix& a) {
  return std::ranges::all_of(a.values(), [](double v) { return std::isfinite(v); });
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix sigmoid(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.values()) v = sigmoid(v);
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out = logits;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    const double mx = *std::ranges::max_element(r);
    double z = 0.0;
    for (double& v : r) {
      v = std::exp(v - mx);
      z += v;
    }
    for (double& v : r) v /= z;
  }
  return out;
}

Matrix activate(const Matrix& pre, Activation act, double slope) {
  if (act == Activation::Linear) return pre;
  Matrix out = pre;
  const double neg = act == Activation::Relu ? 0.0 : slope;
  for (double& v : out.values())
    if (v < 0.0) v *= neg;
  return out;
}

Matrix activate_backward(const Matrix& pre, const Matrix& grad_out, Activation act,
                         double slope) {
  require_same_shape(pre, grad_out, "activate_backward");
  if (act == Activation::Linear) return grad_out;
  Matrix out = grad_out;
  const double neg = act == Activation::Relu ? 0.0 : slope;
  auto p = pre.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i)
    if (p[i] < 0.0) o[i] *= neg;
  return out;
}

LossValue cross_entropy(const Matrix& logits, std::span<const std::size_t> labels) {
  if (labels.size() != logits.rows()) {
    fail(ErrorCode::ShapeMismatch, "labels " + std::to_string(labels.size()) + " for " +
                                       shape_str(logits) + " logits");
  }
  LossValue out{0.0, Matrix(logits.rows(), logits.cols())};
  if (logits.rows() == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    if (labels[i] >= logits.cols()) {
      fail(ErrorCode::LabelOutOfRange, "label " + std::to_string(labels[i]) + " with " +
                                           std::to_string(logits.cols()) + " classes");
    }
    auto r = logits.row(i);
    const double mx = *std::ranges::max_element(r);
    double z = 0.0;
    for (double v : r) z += std::exp(v - mx);
    const double log_z = mx + std::log(z);
    out.value += (log_z - r[labels[i]]) * inv_n;
    auto g = out.gradient.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) g[j] = std::exp(r[j] - log_z) * inv_n;
    g[labels[i]] -= inv_n;
  }
  return out;
}

LossValue mse(const Matrix& pred, const Matrix& target) {
  require_same_shape(pred, target, "mse");
  LossValue out{0.0, Matrix(pred.rows(), pred.cols())};
  if (pred.size() == 0) return out;
  const double n = static_cast<double>(pred.size());
  auto p = pred.values();
  auto t = target.values();
  auto g = out.gradient.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - t[i];
    out.value += d * d;
    g[i] = 2.0 * d / n;
  }
  out.value /= n;
  return out;
}

LossValue bce(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) {
    fail(ErrorCode::ShapeMismatch, "bce lengths differ");
  }
  LossValue out{0.0, Matrix(scores.size(), 1)};
  if (scores.empty()) return out;
  const double n = static_cast<double>(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = scores[i];
    if (!(s > 0.0 && s < 1.0)) {
      fail(ErrorCode::ProbabilityOutOfRange, "score " + std::to_string(s) + " at " +
                                                 std::to_string(i));
    }
    const double y = labels[i];
    out.value -= (y * std::log(s) + (1.0 - y) * std::log1p(-s)) / n;
    out.gradient(i, 0) = (-y / s + (1.0 - y) / (1.0 - s)) / n;
  }
  return out;
}

LossValue bce_with_logits(std::span<const double> logits, std::span<const double> labels) {
  if (logits.size() != labels.size()) {
    fail(ErrorCode::ShapeMismatch, "bce lengths differ");
  }
  LossValue out{0.0, Matrix(logits.size(), 1)};
  if (logits.empty()) return out;
  const double n = static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double y = labels[i];
    // log(1 + e^z) - y z, written to stay finite for large |z|.
    const double softplus = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    out.value += (softplus - y * z) / n;
    out.gradient(i, 0) = (sigmoid(z) - y) / n;
  }
  return out;
}

OptimizerState::OptimizerState(std::size_t rows, std::size_t cols, AdamConfig config)
    : config_(config), m_(rows, cols), v_(rows, cols) {}

void OptimizerState::apply(Matrix& params, const Matrix& grad) {
  require_same_shape(params, grad, "optimizer params/grad");
  require_same_shape(params, m_, "optimizer params/state");
  ++step_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  auto p = params.values();
  auto g = grad.values();
  auto m = m_.values();
  auto v = v_.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    p[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
  }
}

Matrix optimizer_step(const Matrix& params, const Matrix& grad, OptimizerState& state) {
  Matrix out = params;
  state.apply(out, grad);
  return out;
}

double grad_check(const std::function<double(const Matrix&)>& f, const Matrix& x,
                  const Matrix& analytic, double step, double floor) {
  require_same_shape(x, analytic, "grad_check");
  Matrix probe = x;
  double worst = 0.0;
  auto p = probe.values();
  auto a = analytic.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    auto at = [&](double offset) {
      p[i] = saved + offset;
      const double v = f(probe);
      if (!std::isfinite(v)) fail(ErrorCode::NonFiniteFunction, "f not finite near entry " + std::to_string(i));
      return v;
    };
    // fourth-order central stencil
    const double numeric = (at(-2 * step) - 8.0 * at(-step) + 8.0 * at(step) - at(2 * step)) / (12.0 * step);
    p[i] = saved;
    const double denom = std::max({std::abs(a[i]), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(a[i] - numeric) / denom);
  }
  return worst;
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * 3.14159265358979323846 * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) return 0;
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t bound = n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return static_cast<std::size_t>(x % bound);
}

Rng Rng::fork(std::string_view tag) const {
  return Rng(splitmix64(seed_ ^ fnv1a64(tag)));
}

Matrix random_normal(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = stddev * rng.normal();
  return m;
}

Matrix glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  return random_normal(fan_in, fan_out, stddev, rng);
}

std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed) {
  return fnv1a64(std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()),
                 seed);
}

}  // namespace zsca
