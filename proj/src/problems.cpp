#include "trainopt/problems.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>

#include "trainopt/errors.hpp"

namespace trainopt {

namespace {

void check_batch(std::span<const Index> batch, std::size_t n, const char* who) {
  if (batch.empty()) {
    throw InvalidArgument(std::string(who) + ": empty batch");
  }
  for (Index i : batch) {
    if (i >= n) {
      throw InvalidArgument(std::string(who) + ": batch index " + std::to_string(i) +
                            " out of range (N=" + std::to_string(n) + ")");
    }
  }
}

void check_labels(const std::vector<int>& labels, Eigen::Index rows, int k, const char* who) {
  if (static_cast<Eigen::Index>(labels.size()) != rows) {
    throw DimensionError(std::string(who) + ": label count does not match feature rows");
  }
  if (k < 2) {
    throw InvalidArgument(std::string(who) + ": need at least two classes");
  }
  for (int y : labels) {
    if (y < 0 || y >= k) {
      throw InvalidArgument(std::string(who) + ": label " + std::to_string(y) +
                            " outside [0, " + std::to_string(k) + ")");
    }
  }
}

// In-place softmax of `logits`; returns log-sum-exp.
double softmax_inplace(Vector& logits) {
  const double mx = logits.maxCoeff();
  logits.array() -= mx;
  logits = logits.array().exp();
  const double sum = logits.sum();
  logits /= sum;
  return mx + std::log(sum);
}

double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------

Batch Problem::all_indices() const {
  Batch idx(num_samples());
  std::iota(idx.begin(), idx.end(), Index{0});
  return idx;
}

double Problem::full_loss(const Vector& w) const {
  const Batch idx = all_indices();
  return loss_grad(w, idx).loss;
}

Vector Problem::full_grad(const Vector& w) const {
  const Batch idx = all_indices();
  return loss_grad(w, idx).grad;
}

Vector Problem::minibatch_grad(const Vector& w, std::span<const Index> batch) const {
  return loss_grad(w, batch).grad;
}

double batch_grad_norm_bound(const Problem& problem, const Vector& w, std::size_t batch_size) {
  const std::size_t n = problem.num_samples();
  if (batch_size == 0 || batch_size > n) {
    throw InvalidArgument("batch_grad_norm_bound: batch size must lie in [1, N]");
  }
  std::vector<double> norms(n);
  for (Index i = 0; i < n; ++i) {
    const Index one[1] = {i};
    norms[i] = problem.minibatch_grad(w, one).norm();
  }
  std::partial_sort(norms.begin(), norms.begin() + static_cast<std::ptrdiff_t>(batch_size),
                    norms.end(), std::greater<>());
  double sum = 0.0;
  for (std::size_t i = 0; i < batch_size; ++i) {
    sum += norms[i];
  }
  return sum / static_cast<double>(batch_size);
}

double batch_grad_norm_max(const Problem& problem, const Vector& w, std::size_t batch_size,
                           std::size_t max_subsets) {
  const std::size_t n = problem.num_samples();
  if (batch_size == 0 || batch_size > n) {
    throw InvalidArgument("batch_grad_norm_max: batch size must lie in [1, N]");
  }
  if (binomial(n, batch_size) > static_cast<double>(max_subsets)) {
    throw InvalidArgument("batch_grad_norm_max: too many subsets to enumerate");
  }
  Batch subset(batch_size);
  std::iota(subset.begin(), subset.end(), Index{0});
  double best = 0.0;
  while (true) {
    best = std::max(best, problem.minibatch_grad(w, subset).norm());
    // next combination in lexicographic order
    std::size_t i = batch_size;
    while (i > 0 && subset[i - 1] == n - batch_size + i - 1) {
      --i;
    }
    if (i == 0) {
      break;
    }
    ++subset[i - 1];
    for (std::size_t j = i; j < batch_size; ++j) {
      subset[j] = subset[j - 1] + 1;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

QuadraticProblem::QuadraticProblem(QuadraticSpec spec) : spec_(std::move(spec)) {
  const auto d = spec_.optimum.size();
  if (d == 0 || spec_.hessian.rows() != d || spec_.hessian.cols() != d) {
    throw DimensionError("quadratic: Hessian must be d x d with d = dim(w*) > 0");
  }
  if (spec_.noise.cols() != d || spec_.noise.rows() < 1) {
    throw DimensionError("quadratic: noise must be N x d with N >= 1");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(spec_.hessian, Eigen::EigenvaluesOnly);
  min_eig_ = eig.eigenvalues().minCoeff();
  max_eig_ = eig.eigenvalues().maxCoeff();
  if (!(min_eig_ > 0.0)) {
    throw InvalidArgument("quadratic: Hessian must be positive definite");
  }
}

LossGrad QuadraticProblem::loss_grad(const Vector& w, std::span<const Index> batch) const {
  check_batch(batch, num_samples(), "quadratic");
  if (w.size() != spec_.optimum.size()) {
    throw DimensionError("quadratic: w has the wrong dimension");
  }
  const Vector e = w - spec_.optimum;
  Vector xi_mean = Vector::Zero(e.size());
  for (Index i : batch) {
    xi_mean += spec_.noise.row(static_cast<Eigen::Index>(i)).transpose();
  }
  xi_mean /= static_cast<double>(batch.size());
  const Vector he = spec_.hessian * e;
  return {0.5 * e.dot(he) - xi_mean.dot(e), he - xi_mean};
}

double QuadraticProblem::full_loss(const Vector& w) const {
  const Vector e = w - spec_.optimum;
  const Vector xi_mean = spec_.noise.colwise().mean().transpose();
  return 0.5 * e.dot(spec_.hessian * e) - xi_mean.dot(e);
}

Vector QuadraticProblem::full_grad(const Vector& w) const {
  return quadratic_full_grad(spec_, w);
}

Vector quadratic_full_grad(const QuadraticSpec& spec, const Vector& w) {
  if (w.size() != spec.optimum.size()) {
    throw DimensionError("quadratic_full_grad: w has the wrong dimension");
  }
  return spec.hessian * (w - spec.optimum);
}

// ---------------------------------------------------------------------------

LogisticProblem::LogisticProblem(LogisticSpec spec) : spec_(std::move(spec)) {
  check_labels(spec_.labels, spec_.features.rows(), spec_.num_classes, "logistic");
  if (!(spec_.l2 >= 0.0)) {
    throw InvalidArgument("logistic: lambda must be >= 0");
  }
  if (spec_.features.rows() < 1 || spec_.features.cols() < 1) {
    throw DimensionError("logistic: empty feature matrix");
  }
  const Matrix gram = spec_.features.transpose() * spec_.features;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double x_norm_sq = std::max(0.0, eig.eigenvalues().maxCoeff());
  lipschitz_ = spec_.l2 + x_norm_sq / (2.0 * static_cast<double>(spec_.features.rows()));
}

std::size_t LogisticProblem::dim() const {
  return static_cast<std::size_t>(spec_.num_classes) *
         static_cast<std::size_t>(spec_.features.cols());
}

std::size_t LogisticProblem::num_samples() const {
  return static_cast<std::size_t>(spec_.features.rows());
}

std::optional<double> LogisticProblem::strong_convexity() const {
  if (spec_.l2 > 0.0) {
    return spec_.l2;
  }
  return std::nullopt;
}

LossGrad LogisticProblem::loss_grad(const Vector& w, std::span<const Index> batch) const {
  return logistic_loss_grad(spec_, w, batch);
}

LossGrad logistic_loss_grad(const LogisticSpec& spec, const Vector& w,
                            std::span<const Index> batch) {
  const auto p = spec.features.cols();
  const auto k = static_cast<Eigen::Index>(spec.num_classes);
  if (w.size() != k * p) {
    throw DimensionError("logistic: w must have K * p entries");
  }
  check_batch(batch, static_cast<std::size_t>(spec.features.rows()), "logistic");

  // Row-major K x p view of w.
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMajor> weights(w.data(), k, p);

  RowMajor grad = RowMajor::Zero(k, p);
  double loss = 0.0;
  Vector probs(k);
  for (Index i : batch) {
    const auto row = static_cast<Eigen::Index>(i);
    const auto x = spec.features.row(row).transpose();
    probs = weights * x;
    const int y = spec.labels[i];
    const double logit_y = probs(y);
    const double lse = softmax_inplace(probs);
    loss += lse - logit_y;
    probs(y) -= 1.0;
    grad.noalias() += probs * x.transpose();
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  LossGrad out;
  out.loss = loss * inv_b + 0.5 * spec.l2 * w.squaredNorm();
  out.grad = Eigen::Map<const Vector>(grad.data(), k * p) * inv_b + spec.l2 * w;
  return out;
}

// ---------------------------------------------------------------------------

std::size_t ffn_param_count(std::size_t input, std::size_t hidden, std::size_t output) {
  return hidden * input + hidden + output * hidden + output;
}

FfnProblem::FfnProblem(FfnSpec spec) : spec_(std::move(spec)) {
  check_labels(spec_.labels, spec_.features.rows(), spec_.num_classes, "ffn");
  if (spec_.hidden == 0 || spec_.features.cols() < 1) {
    throw DimensionError("ffn: hidden and input sizes must be positive");
  }
}

std::size_t FfnProblem::dim() const {
  return ffn_param_count(static_cast<std::size_t>(spec_.features.cols()), spec_.hidden,
                         static_cast<std::size_t>(spec_.num_classes));
}

std::size_t FfnProblem::num_samples() const {
  return static_cast<std::size_t>(spec_.features.rows());
}

LossGrad FfnProblem::loss_grad(const Vector& w, std::span<const Index> batch) const {
  return ffn_loss_grad(spec_, w, batch);
}

LossGrad ffn_loss_grad(const FfnSpec& spec, const Vector& w, std::span<const Index> batch) {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto in = spec.features.cols();
  const auto hid = static_cast<Eigen::Index>(spec.hidden);
  const auto out_dim = static_cast<Eigen::Index>(spec.num_classes);
  const auto n_params = static_cast<Eigen::Index>(
      ffn_param_count(static_cast<std::size_t>(in), spec.hidden,
                      static_cast<std::size_t>(spec.num_classes)));
  if (w.size() != n_params) {
    throw DimensionError("ffn: w has " + std::to_string(w.size()) + " entries, expected " +
                         std::to_string(n_params));
  }
  check_batch(batch, static_cast<std::size_t>(spec.features.rows()), "ffn");

  Eigen::Index off = 0;
  const Eigen::Map<const RowMajor> w1(w.data() + off, hid, in);
  off += hid * in;
  const Eigen::Map<const Vector> b1(w.data() + off, hid);
  off += hid;
  const Eigen::Map<const RowMajor> w2(w.data() + off, out_dim, hid);
  off += out_dim * hid;
  const Eigen::Map<const Vector> b2(w.data() + off, out_dim);

  Vector grad = Vector::Zero(n_params);
  off = 0;
  Eigen::Map<RowMajor> gw1(grad.data() + off, hid, in);
  off += hid * in;
  Eigen::Map<Vector> gb1(grad.data() + off, hid);
  off += hid;
  Eigen::Map<RowMajor> gw2(grad.data() + off, out_dim, hid);
  off += out_dim * hid;
  Eigen::Map<Vector> gb2(grad.data() + off, out_dim);

  double loss = 0.0;
  Vector z1(hid), h(hid), probs(out_dim), dh(hid);
  for (Index i : batch) {
    const auto x = spec.features.row(static_cast<Eigen::Index>(i)).transpose();
    z1 = w1 * x + b1;
    h = z1.cwiseMax(0.0);
    probs = w2 * h + b2;
    const int y = spec.labels[i];
    const double logit_y = probs(y);
    loss += softmax_inplace(probs) - logit_y;
    probs(y) -= 1.0;  // d loss / d logits

    gw2.noalias() += probs * h.transpose();
    gb2 += probs;
    dh.noalias() = w2.transpose() * probs;
    for (Eigen::Index j = 0; j < hid; ++j) {
      if (z1(j) <= 0.0) {
        dh(j) = 0.0;
      }
    }
    gw1.noalias() += dh * x.transpose();
    gb1 += dh;
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  return {loss * inv_b, grad * inv_b};
}

// ---------------------------------------------------------------------------

std::vector<Batch> BatchSampler::batches(std::uint64_t epoch) const {
  if (batch_size == 0) {
    throw InvalidArgument("sampler: batch size must be positive");
  }
  if (num_samples < batch_size) {
    throw InvalidArgument("sampler: need N >= batch size (N=" + std::to_string(num_samples) +
                          ", b=" + std::to_string(batch_size) + ")");
  }
  Batch perm(num_samples);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  std::mt19937_64 rng(seq);
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<Batch> out;
  out.reserve((num_samples + batch_size - 1) / batch_size);
  for (std::size_t start = 0; start < num_samples; start += batch_size) {
    const std::size_t stop = std::min(num_samples, start + batch_size);
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                     perm.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return out;
}

std::vector<Batch> sample_batches(const BatchSampler& sampler, std::uint64_t epoch) {
  return sampler.batches(epoch);
}

}  // namespace trainopt
