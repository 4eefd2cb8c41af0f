#pragma once

#include <string>
#include <utility>
#include <vector>

#include "trainopt/optimizers.hpp"

namespace trainopt {

/// Uniform bounds along a projected pseudo-linear run.
struct BoundConstants {
  double radius = 0.0;         // D_w
  double grad_bound = 0.0;     // D_G
  double a_bound = 0.0;        // D_A, spectral
  double b_bound = 0.0;        // D_b
  double alpha_sum = 0.0;      // S_alpha
  double lipschitz = 0.0;      // L
  double strong_convexity = 0.0;  // c
};

/// Step-size numerators and offset of the O(1/t) schedule family:
/// gamma_t = gamma/(t+mu), beta_t = beta/(t-1+mu), alpha_t = alpha/(t-1+mu)^2.
struct Theorem1Config {
  double gamma = 0.0;
  double beta = 0.0;
  double alpha = 0.0;
  double mu = 0.0;

  Schedule gamma_schedule() const { return Schedule::inverse_t(gamma, mu, 0); }
  Schedule beta_schedule() const { return Schedule::inverse_t(beta, mu, 1); }
  /// alpha = 0 is allowed and maps to a zero rate.
  double alpha_at(long long t) const;
};

// Condition names reported by validate_theorem1.
namespace condition {
inline constexpr const char* kGammaAboveInverseC = "gamma > 1/c";
inline constexpr const char* kBetaLowerBound =
    "beta > 1 + 4 gamma^2 L^2 sqrt(D_A^2+L^2) / (c (gamma c - 1)) + 2 gamma sqrt(D_A^2+L^2)";
inline constexpr const char* kAlphaSum = "sum_s alpha_s < 1/D_w^2";
inline constexpr const char* kAlpha1 = "alpha_1 < 1";
inline constexpr const char* kBeta1 = "beta_1 < 1";
inline constexpr const char* kGamma1 = "gamma_1 < 1";
inline constexpr const char* kMuLarge = "alpha D_w^2 / mu + beta < mu";
}  // namespace condition

struct Theorem1Report {
  bool valid = false;
  std::vector<std::string> failed_conditions;
  /// Conditions that could not be evaluated (the beta bound is only defined
  /// for gamma c > 1).
  std::vector<std::string> skipped_conditions;
  double beta_lower_bound = 0.0;  // NaN when skipped
  double alpha_sum = 0.0;
};

/// D_G = 2 L D_w + max_B ||grad F^B(w*)||.
double compute_DG(double lipschitz, double radius, double max_batch_grad_at_opt);

/// (D_A, D_b). Throws InfeasibleConstants when S_alpha D_w^2 >= 1.
std::pair<double, double> compute_DA_Db(double norm_a0, double norm_b0, double alpha_sum,
                                        double radius, double grad_bound);

/// sum_{s>=1} alpha/(s-1+mu)^2: 10^6 explicit terms plus the integral tail
/// alpha/(n-1+mu), which bounds the remainder from above.
double alpha_series_sum(double alpha, double mu, long long terms = 1'000'000);

/// Checks each hypothesis of the O(1/t) theorem and names every failure.
Theorem1Report validate_theorem1(const Theorem1Config& cfg, double c, double lipschitz,
                                 double a_bound, double radius);

/// Largest singular value by power iteration on M^T M.
/// Throws ConvergenceError (with the last estimate) after `max_iter`.
double spectral_norm(const Matrix& m, double rel_tol = 1e-10, int max_iter = 1000);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double burn_in_fraction = 0.0;
  std::size_t points = 0;
};

/// OLS of ln(value) on ln(t) over points with t strictly greater than
/// burn_in_fraction * max(t). Needs >= 10 such points and positive values.
RateFit rate_fit(const std::vector<std::pair<double, double>>& series,
                 double burn_in_fraction = 0.1);

}  // namespace trainopt
