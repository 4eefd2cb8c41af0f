#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "trainopt/optimizers.hpp"

namespace trainopt {

using Index = std::size_t;
using Batch = std::vector<Index>;

struct LossGrad {
  double loss = 0.0;
  Vector grad;
};

/// Loss/gradient oracle for F(w) = (1/N) sum_n f_n(w).
///
/// `loss_grad(w, batch)` returns the mean over `batch` (duplicates count
/// twice) plus any regulariser. Every implementation is pure in (w, batch),
/// so one instance can be shared across threads.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::size_t dim() const = 0;
  virtual std::size_t num_samples() const = 0;
  virtual LossGrad loss_grad(const Vector& w, std::span<const Index> batch) const = 0;

  virtual double full_loss(const Vector& w) const;
  virtual Vector full_grad(const Vector& w) const;
  Vector minibatch_grad(const Vector& w, std::span<const Index> batch) const;

  virtual std::optional<Vector> optimum() const { return std::nullopt; }
  virtual std::optional<double> strong_convexity() const { return std::nullopt; }
  virtual std::optional<double> lipschitz() const { return std::nullopt; }

 protected:
  Batch all_indices() const;
};

/// Upper bound on max_{|B| = batch_size} ||grad F^B(w)||_2 from the triangle
/// inequality: the mean of the `batch_size` largest per-sample gradient norms.
double batch_grad_norm_bound(const Problem& problem, const Vector& w, std::size_t batch_size);

/// Exact max_{|B| = batch_size} ||grad F^B(w)||_2 by enumerating every subset.
/// Only usable for tiny N; throws InvalidArgument above `max_subsets`.
double batch_grad_norm_max(const Problem& problem, const Vector& w, std::size_t batch_size,
                           std::size_t max_subsets = 1'000'000);

// ---------------------------------------------------------------------------

/// f_n(w) = 0.5 (w - w*)^T H (w - w*) - xi_n^T (w - w*), with sum_n xi_n = 0.
struct QuadraticSpec {
  Matrix hessian;  // symmetric positive definite, d x d
  Vector optimum;  // w*
  Matrix noise;    // N x d, row n is xi_n
};

class QuadraticProblem final : public Problem {
 public:
  /// Eigenvalues of H are computed once to expose c and L.
  explicit QuadraticProblem(QuadraticSpec spec);

  std::size_t dim() const override { return static_cast<std::size_t>(spec_.optimum.size()); }
  std::size_t num_samples() const override { return static_cast<std::size_t>(spec_.noise.rows()); }
  LossGrad loss_grad(const Vector& w, std::span<const Index> batch) const override;

  double full_loss(const Vector& w) const override;
  /// H (w - w*), closed form.
  Vector full_grad(const Vector& w) const override;

  std::optional<Vector> optimum() const override { return spec_.optimum; }
  std::optional<double> strong_convexity() const override { return min_eig_; }
  std::optional<double> lipschitz() const override { return max_eig_; }

  const QuadraticSpec& spec() const { return spec_; }

 private:
  QuadraticSpec spec_;
  double min_eig_ = 0.0;
  double max_eig_ = 0.0;
};

Vector quadratic_full_grad(const QuadraticSpec& spec, const Vector& w);

// ---------------------------------------------------------------------------

/// Multiclass logistic regression. w is the K x p weight matrix flattened
/// row-major: w[k * p + j] is the weight of feature j for class k.
struct LogisticSpec {
  Matrix features;          // N x p
  std::vector<int> labels;  // N entries in [0, K)
  int num_classes = 2;
  double l2 = 0.0;          // lambda
};

class LogisticProblem final : public Problem {
 public:
  explicit LogisticProblem(LogisticSpec spec);

  std::size_t dim() const override;
  std::size_t num_samples() const override;
  /// Mean softmax cross-entropy over `batch` plus (lambda/2) ||w||^2.
  LossGrad loss_grad(const Vector& w, std::span<const Index> batch) const override;

  /// lambda when lambda > 0.
  std::optional<double> strong_convexity() const override;
  /// lambda + ||X||_2^2 / (2N).
  std::optional<double> lipschitz() const override { return lipschitz_; }

  const LogisticSpec& spec() const { return spec_; }

 private:
  LogisticSpec spec_;
  double lipschitz_ = 0.0;
};

LossGrad logistic_loss_grad(const LogisticSpec& spec, const Vector& w,
                            std::span<const Index> batch);

// ---------------------------------------------------------------------------

/// Two fully connected layers with a ReLU in between, softmax cross-entropy
/// on top. Parameters are flattened as [W1 (hidden x input, row-major), b1,
/// W2 (output x hidden, row-major), b2].
struct FfnSpec {
  Matrix features;          // N x input
  std::vector<int> labels;  // N entries in [0, output)
  std::size_t hidden = 10;
  int num_classes = 2;
};

class FfnProblem final : public Problem {
 public:
  explicit FfnProblem(FfnSpec spec);

  std::size_t dim() const override;
  std::size_t num_samples() const override;
  LossGrad loss_grad(const Vector& w, std::span<const Index> batch) const override;

  const FfnSpec& spec() const { return spec_; }

 private:
  FfnSpec spec_;
};

std::size_t ffn_param_count(std::size_t input, std::size_t hidden, std::size_t output);

LossGrad ffn_loss_grad(const FfnSpec& spec, const Vector& w, std::span<const Index> batch);

// ---------------------------------------------------------------------------

/// Per-epoch shuffling without replacement. The batches of an epoch are a pure
/// function of (seed, epoch).
struct BatchSampler {
  std::size_t num_samples = 0;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;

  std::vector<Batch> batches(std::uint64_t epoch) const;
};

std::vector<Batch> sample_batches(const BatchSampler& sampler, std::uint64_t epoch);

}  // namespace trainopt
