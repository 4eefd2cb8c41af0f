#include "trainopt/theory.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "trainopt/errors.hpp"

namespace trainopt {

double Theorem1Config::alpha_at(long long t) const {
  if (alpha == 0.0) {
    return 0.0;
  }
  return Schedule::inverse_t_squared(alpha, mu, 1).value(t, 0);
}

double compute_DG(double lipschitz, double radius, double max_batch_grad_at_opt) {
  if (!(lipschitz >= 0.0) || !(radius >= 0.0) || !(max_batch_grad_at_opt >= 0.0)) {
    throw InvalidArgument("compute_DG: inputs must be non-negative");
  }
  return 2.0 * lipschitz * radius + max_batch_grad_at_opt;
}

std::pair<double, double> compute_DA_Db(double norm_a0, double norm_b0, double alpha_sum,
                                        double radius, double grad_bound) {
  if (!(norm_a0 >= 0.0) || !(norm_b0 >= 0.0) || !(alpha_sum >= 0.0) || !(radius >= 0.0) ||
      !(grad_bound >= 0.0)) {
    throw InvalidArgument("compute_DA_Db: inputs must be non-negative");
  }
  const double contraction = alpha_sum * radius * radius;
  if (!(contraction < 1.0)) {
    throw InfeasibleConstants("compute_DA_Db: S_alpha * D_w^2 = " + std::to_string(contraction) +
                              " must be < 1");
  }
  const double b_bound = std::max(
      norm_b0, (grad_bound * (1.0 + contraction) + norm_a0 * radius) / (1.0 - contraction));
  const double a_bound = norm_a0 + alpha_sum * radius * (b_bound + grad_bound);
  return {a_bound, b_bound};
}

double alpha_series_sum(double alpha, double mu, long long terms) {
  if (alpha == 0.0) {
    return 0.0;
  }
  if (!(alpha > 0.0) || terms < 1) {
    throw InvalidArgument("alpha_series_sum: alpha must be >= 0 and terms >= 1");
  }
  if (!(mu > 0.0)) {
    return std::numeric_limits<double>::infinity();
  }
  // Sum smallest terms first.
  double sum = 0.0;
  for (long long s = terms; s >= 1; --s) {
    const double denom = static_cast<double>(s - 1) + mu;
    sum += 1.0 / (denom * denom);
  }
  // sum_{s > n} 1/(s-1+mu)^2 <= int_n^inf dx/(x-1+mu)^2 = 1/(n-1+mu)
  sum += 1.0 / (static_cast<double>(terms - 1) + mu);
  return alpha * sum;
}

Theorem1Report validate_theorem1(const Theorem1Config& cfg, double c, double lipschitz,
                                 double a_bound, double radius) {
  if (!(c > 0.0)) {
    throw InvalidArgument("validate_theorem1: strong convexity c must be positive");
  }
  if (!(lipschitz >= 0.0) || !(a_bound >= 0.0) || !(radius > 0.0)) {
    throw InvalidArgument("validate_theorem1: need L >= 0, D_A >= 0, D_w > 0");
  }

  Theorem1Report rep;
  auto check = [&rep](bool ok, const char* name) {
    if (!ok) {
      rep.failed_conditions.emplace_back(name);
    }
  };

  const double gamma_c = cfg.gamma * c;
  check(gamma_c > 1.0, condition::kGammaAboveInverseC);

  if (gamma_c > 1.0) {
    const double root = std::sqrt(a_bound * a_bound + lipschitz * lipschitz);
    rep.beta_lower_bound = 1.0 +
                           4.0 * cfg.gamma * cfg.gamma * lipschitz * lipschitz * root /
                               (c * (gamma_c - 1.0)) +
                           2.0 * cfg.gamma * root;
    check(cfg.beta > rep.beta_lower_bound, condition::kBetaLowerBound);
  } else {
    rep.beta_lower_bound = std::numeric_limits<double>::quiet_NaN();
    rep.skipped_conditions.emplace_back(condition::kBetaLowerBound);
  }

  constexpr double kMargin = 1e-9;
  rep.alpha_sum = cfg.alpha < 0.0 ? std::numeric_limits<double>::infinity()
                                  : alpha_series_sum(cfg.alpha, cfg.mu);
  check(rep.alpha_sum + kMargin < 1.0 / (radius * radius), condition::kAlphaSum);

  const double mu = cfg.mu;
  check(cfg.alpha == 0.0 || (mu > 0.0 && cfg.alpha / (mu * mu) < 1.0), condition::kAlpha1);
  check(mu > 0.0 && cfg.beta / mu < 1.0, condition::kBeta1);
  check(cfg.gamma / (1.0 + mu) < 1.0, condition::kGamma1);
  check(mu > 0.0 && cfg.alpha * radius * radius / mu + cfg.beta < mu, condition::kMuLarge);

  rep.valid = rep.failed_conditions.empty() && rep.skipped_conditions.empty();
  return rep;
}

double spectral_norm(const Matrix& m, double rel_tol, int max_iter) {
  if (!m.allFinite()) {
    throw InvalidArgument("spectral_norm: matrix has non-finite entries");
  }
  if (m.size() == 0 || m.isZero(0.0)) {
    return 0.0;
  }
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(m.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v(i) = normal(rng);
  }
  v.normalize();

  double sigma = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const Vector u = m * v;
    const double next = u.norm();
    Vector w = m.transpose() * u;
    const double wn = w.norm();
    if (wn == 0.0) {
      return next;
    }
    v = w / wn;
    if (std::abs(next - sigma) <= rel_tol * next) {
      // One more product with the refined direction.
      return std::max(next, (m * v).norm());
    }
    sigma = next;
  }
  throw ConvergenceError("spectral_norm: power iteration did not converge", sigma);
}

RateFit rate_fit(const std::vector<std::pair<double, double>>& series, double burn_in_fraction) {
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) {
    throw InvalidArgument("rate_fit: burn-in fraction must lie in [0, 1)");
  }
  double t_max = 0.0;
  for (const auto& [t, value] : series) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw InvalidArgument("rate_fit: values must be positive and finite");
    }
    if (!(t > 0.0)) {
      throw InvalidArgument("rate_fit: t must be positive");
    }
    t_max = std::max(t_max, t);
  }
  const double cutoff = burn_in_fraction * t_max;

  std::vector<double> xs, ys;
  for (const auto& [t, value] : series) {
    if (t > cutoff) {
      xs.push_back(std::log(t));
      ys.push_back(std::log(value));
    }
  }
  const std::size_t n = xs.size();
  if (n < 10) {
    throw InvalidArgument("rate_fit: need at least 10 points after burn-in");
  }
  const double nd = static_cast<double>(n);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= nd;
  my /= nd;
  double vxx = 0.0, vxy = 0.0, vyy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    vxx += dx * dx;
    vxy += dx * dy;
    vyy += dy * dy;
  }
  if (!(vxx > 0.0)) {
    throw InvalidArgument("rate_fit: t values after burn-in are all equal");
  }

  RateFit fit;
  fit.slope = vxy / vxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = vyy > 0.0 ? (vxy * vxy) / (vxx * vyy) : 1.0;
  fit.burn_in_fraction = burn_in_fraction;
  fit.points = n;
  return fit;
}

}  // namespace trainopt
