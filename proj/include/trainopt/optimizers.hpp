#pragma once

#include <cstddef>
#include <string_view>

#include <Eigen/Dense>

namespace trainopt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Learning-rate schedules
// ---------------------------------------------------------------------------

enum class ScheduleKind { Constant, ExpDecay, InverseT, InverseTSquared };

/// A learning-rate schedule evaluated at step t (1-based) and epoch (0-based).
///
/// InverseT evaluates base / (t - offset + mu) and InverseTSquared evaluates
/// base / (t - offset + mu)^2. The step-size schedule of the convergence
/// analysis uses offset 0; the optimizer-variable rates use offset 1.
/// ExpDecay advances once per epoch.
struct Schedule {
  ScheduleKind kind = ScheduleKind::Constant;
  double base = 1.0;
  double decay_rate = 1.0;
  double mu = 0.0;
  int offset = 0;

  static Schedule constant(double base);
  static Schedule exp_decay(double base, double decay_rate);
  static Schedule inverse_t(double base, double mu, int offset = 0);
  static Schedule inverse_t_squared(double base, double mu, int offset = 1);

  /// Throws InvalidArgument when the schedule violates its invariants.
  void validate() const;

  /// Rate at step t >= 1 during the given epoch. Throws InvalidArgument on
  /// t < 1 or a non-positive denominator.
  double value(long long t, long long epoch) const;
};

std::string_view to_string(ScheduleKind kind);

// ---------------------------------------------------------------------------
// Feasible sets and projection
// ---------------------------------------------------------------------------

enum class FeasibleKind { Unconstrained, L2Ball };

struct FeasibleSet {
  FeasibleKind kind = FeasibleKind::Unconstrained;
  double radius = 0.0;

  static FeasibleSet unconstrained() { return {}; }
  static FeasibleSet l2_ball(double radius);

  bool bounded() const { return kind == FeasibleKind::L2Ball; }
};

/// Euclidean projection onto `set`. Points inside the ball are returned
/// unchanged; points outside are scaled radially onto the sphere.
Vector project(const Vector& w, const FeasibleSet& set);

// ---------------------------------------------------------------------------
// Trainable-optimizer states
// ---------------------------------------------------------------------------

inline constexpr std::size_t kDefaultFullDimCap = 4096;

/// Optimizer variables of the full pseudo-linear estimator ghat = A w + b.
struct FullLinearState {
  Matrix a;
  Vector b;

  /// Zero initialisation. Throws DimensionError when d exceeds `cap`; the
  /// diagonal and rank-one variants are the intended fallback there.
  static FullLinearState zeros(std::size_t d, std::size_t cap = kDefaultFullDimCap);
};

/// A = diag(a).
struct DiagLinearState {
  Vector a;
  Vector b;

  static DiagLinearState zeros(std::size_t d);
};

/// A = a c^T.
struct RankOneState {
  Vector a;
  Vector c;
  Vector b;

  /// a = 0, b = 0, c = ones / sqrt(d). Starting from a = c = 0 would never
  /// leave zero.
  static RankOneState initial(std::size_t d);
};

/// Per-step rates for the trainable optimizers.
struct ToRates {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

template <typename State>
struct StepResult {
  State state;
  Vector w;
  Vector ghat;
};

/// Value and gradients of the approximation loss 0.5 * ||g - A w - b||^2.
struct ApproxLossGrads {
  double loss = 0.0;
  Matrix grad_a;
  Vector grad_b;
};

ApproxLossGrads approx_loss_grads(const Matrix& a, const Vector& b, const Vector& w,
                                  const Vector& g);

/// One step of the full pseudo-linear trainable optimizer.
///
/// With r = g - A w - b (old A, b):  A' = A + alpha r w^T,  b' = b + beta r,
/// ghat = A' w + b',  w' = project(w - gamma ghat).
/// A' and b' are formed as A - alpha * dl/dA and b - beta * dl/db so they are
/// bit-identical to a gradient step on the approximation loss.
StepResult<FullLinearState> step_pseudo_linear(const FullLinearState& state, const Vector& w,
                                               const Vector& g, const ToRates& rates,
                                               const FeasibleSet& set,
                                               std::size_t dim_cap = kDefaultFullDimCap);

/// Diagonal restriction: every product above becomes elementwise.
StepResult<DiagLinearState> step_diagonal(const DiagLinearState& state, const Vector& w,
                                          const Vector& g, const ToRates& rates,
                                          const FeasibleSet& set);

/// Rank-one restriction A = a c^T. a, c and b are all updated from the
/// previous-step values.
StepResult<RankOneState> step_rank_one(const RankOneState& state, const Vector& w,
                                       const Vector& g, const ToRates& rates,
                                       const FeasibleSet& set);

// ---------------------------------------------------------------------------
// Classical baselines
// ---------------------------------------------------------------------------

enum class BaselineKind { SGD, Momentum, Adagrad, RMSProp, Adam };

std::string_view to_string(BaselineKind kind);

struct BaselineState {
  BaselineKind kind = BaselineKind::SGD;
  Vector m;  // first moment / momentum buffer
  Vector v;  // second moment / squared-gradient accumulator
  long long t = 0;

  static BaselineState zeros(BaselineKind kind, std::size_t d);
};

// RMSProp reads its decay from beta2.
struct BaselineHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double gamma = 1e-3;
};

/// Baseline update directions with eps inside the square root and no ADAM
/// bias correction:
///   SGD       ghat = g
///   Momentum  m' = b1 m + (1-b1) g,                ghat = m'
///   Adagrad   v' = v + g*g,                         ghat = g / sqrt(v'/t + eps)
///   RMSProp   v' = b2 v + (1-b2) g*g,               ghat = g / sqrt(v' + eps)
///   ADAM      m', v' as above,                      ghat = m' / sqrt(v' + eps)
StepResult<BaselineState> step_baseline(const BaselineState& state, const Vector& w,
                                        const Vector& g, const BaselineHyper& hyper,
                                        const FeasibleSet& set);

}  // namespace trainopt
