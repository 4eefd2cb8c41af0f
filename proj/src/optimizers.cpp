#include "trainopt/optimizers.hpp"

#include <cmath>
#include <string>

#include "trainopt/errors.hpp"

namespace trainopt {

namespace {

void require_same_dim(const Vector& w, const Vector& g, std::size_t d, const char* who) {
  if (static_cast<std::size_t>(w.size()) != d || static_cast<std::size_t>(g.size()) != d) {
    throw DimensionError(std::string(who) + ": expected dimension " + std::to_string(d) +
                         ", got w=" + std::to_string(w.size()) +
                         " g=" + std::to_string(g.size()));
  }
}

void require_rates(const ToRates& r, const char* who) {
  if (!(r.alpha >= 0.0) || !(r.beta >= 0.0) || !(r.gamma > 0.0)) {
    throw InvalidArgument(std::string(who) + ": need alpha >= 0, beta >= 0, gamma > 0");
  }
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& x, const char* who, const char* what) {
  if (!x.allFinite()) {
    throw NumericalError(std::string(who) + ": non-finite " + what);
  }
}

}  // namespace

// ---------------------------------------------------------------------------

Schedule Schedule::constant(double base) {
  Schedule s;
  s.kind = ScheduleKind::Constant;
  s.base = base;
  s.validate();
  return s;
}

Schedule Schedule::exp_decay(double base, double decay_rate) {
  Schedule s;
  s.kind = ScheduleKind::ExpDecay;
  s.base = base;
  s.decay_rate = decay_rate;
  s.validate();
  return s;
}

Schedule Schedule::inverse_t(double base, double mu, int offset) {
  Schedule s;
  s.kind = ScheduleKind::InverseT;
  s.base = base;
  s.mu = mu;
  s.offset = offset;
  s.validate();
  return s;
}

Schedule Schedule::inverse_t_squared(double base, double mu, int offset) {
  Schedule s;
  s.kind = ScheduleKind::InverseTSquared;
  s.base = base;
  s.mu = mu;
  s.offset = offset;
  s.validate();
  return s;
}

void Schedule::validate() const {
  if (!(base > 0.0) || !std::isfinite(base)) {
    throw InvalidArgument("schedule: base must be positive and finite");
  }
  if (!(decay_rate > 0.0 && decay_rate <= 1.0)) {
    throw InvalidArgument("schedule: decay_rate must lie in (0, 1]");
  }
  if (!(mu >= 0.0) || !std::isfinite(mu)) {
    throw InvalidArgument("schedule: mu must be >= 0");
  }
  if (offset != 0 && offset != 1) {
    throw InvalidArgument("schedule: offset must be 0 or 1");
  }
}

double Schedule::value(long long t, long long epoch) const {
  if (t < 1) {
    throw InvalidArgument("schedule: step index must be >= 1");
  }
  switch (kind) {
    case ScheduleKind::Constant:
      return base;
    case ScheduleKind::ExpDecay:
      return base * std::pow(decay_rate, static_cast<double>(epoch < 0 ? 0 : epoch));
    case ScheduleKind::InverseT:
    case ScheduleKind::InverseTSquared: {
      const double denom = static_cast<double>(t - offset) + mu;
      if (!(denom > 0.0)) {
        throw InvalidArgument("schedule: t - offset + mu must be positive");
      }
      return kind == ScheduleKind::InverseT ? base / denom : base / (denom * denom);
    }
  }
  return base;
}

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::Constant: return "constant";
    case ScheduleKind::ExpDecay: return "exp_decay";
    case ScheduleKind::InverseT: return "inverse_t";
    case ScheduleKind::InverseTSquared: return "inverse_t_squared";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------

FeasibleSet FeasibleSet::l2_ball(double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw InvalidArgument("feasible set: ball radius must be positive and finite");
  }
  return {FeasibleKind::L2Ball, radius};
}

Vector project(const Vector& w, const FeasibleSet& set) {
  if (set.kind == FeasibleKind::Unconstrained) {
    return w;
  }
  const double norm = w.norm();
  if (norm <= set.radius) {
    return w;
  }
  return w * (set.radius / norm);
}

// ---------------------------------------------------------------------------

FullLinearState FullLinearState::zeros(std::size_t d, std::size_t cap) {
  if (d > cap) {
    throw DimensionError("full pseudo-linear state: d=" + std::to_string(d) +
                         " exceeds the dimension cap " + std::to_string(cap) +
                         "; use the diagonal or rank-one variant");
  }
  const auto n = static_cast<Eigen::Index>(d);
  return {Matrix::Zero(n, n), Vector::Zero(n)};
}

DiagLinearState DiagLinearState::zeros(std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  return {Vector::Zero(n), Vector::Zero(n)};
}

RankOneState RankOneState::initial(std::size_t d) {
  if (d == 0) {
    throw DimensionError("rank-one state: d must be positive");
  }
  const auto n = static_cast<Eigen::Index>(d);
  return {Vector::Zero(n), Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(d))),
          Vector::Zero(n)};
}

ApproxLossGrads approx_loss_grads(const Matrix& a, const Vector& b, const Vector& w,
                                  const Vector& g) {
  const auto d = static_cast<std::size_t>(w.size());
  if (a.rows() != w.size() || a.cols() != w.size() || b.size() != w.size()) {
    throw DimensionError("approx_loss_grads: A, b and w disagree on dimension");
  }
  require_same_dim(w, g, d, "approx_loss_grads");

  const Vector r = g - a * w - b;
  ApproxLossGrads out;
  out.loss = 0.5 * r.squaredNorm();
  out.grad_a = -r * w.transpose();
  out.grad_b = -r;
  return out;
}

StepResult<FullLinearState> step_pseudo_linear(const FullLinearState& state, const Vector& w,
                                               const Vector& g, const ToRates& rates,
                                               const FeasibleSet& set, std::size_t dim_cap) {
  const auto d = static_cast<std::size_t>(state.b.size());
  if (d > dim_cap) {
    throw DimensionError("step_pseudo_linear: d=" + std::to_string(d) +
                         " exceeds the dimension cap " + std::to_string(dim_cap));
  }
  require_rates(rates, "step_pseudo_linear");

  const ApproxLossGrads lg = approx_loss_grads(state.a, state.b, w, g);

  StepResult<FullLinearState> out;
  out.state.a = state.a - rates.alpha * lg.grad_a;
  out.state.b = state.b - rates.beta * lg.grad_b;
  out.ghat = out.state.a * w + out.state.b;
  out.w = project(w - rates.gamma * out.ghat, set);

  require_finite(out.state.a, "step_pseudo_linear", "A");
  require_finite(out.state.b, "step_pseudo_linear", "b");
  require_finite(out.w, "step_pseudo_linear", "weights");
  return out;
}

StepResult<DiagLinearState> step_diagonal(const DiagLinearState& state, const Vector& w,
                                          const Vector& g, const ToRates& rates,
                                          const FeasibleSet& set) {
  const auto d = static_cast<std::size_t>(state.b.size());
  if (static_cast<std::size_t>(state.a.size()) != d) {
    throw DimensionError("step_diagonal: a and b disagree on dimension");
  }
  require_same_dim(w, g, d, "step_diagonal");
  require_rates(rates, "step_diagonal");

  const Vector r = g - state.a.cwiseProduct(w) - state.b;

  StepResult<DiagLinearState> out;
  out.state.a = state.a + rates.alpha * r.cwiseProduct(w);
  out.state.b = state.b + rates.beta * r;
  out.ghat = out.state.a.cwiseProduct(w) + out.state.b;
  out.w = project(w - rates.gamma * out.ghat, set);

  require_finite(out.state.a, "step_diagonal", "a");
  require_finite(out.state.b, "step_diagonal", "b");
  require_finite(out.w, "step_diagonal", "weights");
  return out;
}

StepResult<RankOneState> step_rank_one(const RankOneState& state, const Vector& w,
                                       const Vector& g, const ToRates& rates,
                                       const FeasibleSet& set) {
  const auto d = static_cast<std::size_t>(state.b.size());
  if (static_cast<std::size_t>(state.a.size()) != d ||
      static_cast<std::size_t>(state.c.size()) != d) {
    throw DimensionError("step_rank_one: a, c and b disagree on dimension");
  }
  require_same_dim(w, g, d, "step_rank_one");
  require_rates(rates, "step_rank_one");

  const double cw = state.c.dot(w);
  const Vector r = g - state.a * cw - state.b;
  const double ra = r.dot(state.a);

  StepResult<RankOneState> out;
  out.state.a = state.a + (rates.alpha * cw) * r;
  out.state.c = state.c + (rates.alpha * ra) * w;
  out.state.b = state.b + rates.beta * r;
  out.ghat = out.state.a * out.state.c.dot(w) + out.state.b;
  out.w = project(w - rates.gamma * out.ghat, set);

  require_finite(out.state.a, "step_rank_one", "a");
  require_finite(out.state.c, "step_rank_one", "c");
  require_finite(out.state.b, "step_rank_one", "b");
  require_finite(out.w, "step_rank_one", "weights");
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::SGD: return "sgd";
    case BaselineKind::Momentum: return "momentum";
    case BaselineKind::Adagrad: return "adagrad";
    case BaselineKind::RMSProp: return "rmsprop";
    case BaselineKind::Adam: return "adam";
  }
  return "unknown";
}

BaselineState BaselineState::zeros(BaselineKind kind, std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  return {kind, Vector::Zero(n), Vector::Zero(n), 0};
}

StepResult<BaselineState> step_baseline(const BaselineState& state, const Vector& w,
                                        const Vector& g, const BaselineHyper& hyper,
                                        const FeasibleSet& set) {
  const auto d = static_cast<std::size_t>(state.m.size());
  if (static_cast<std::size_t>(state.v.size()) != d) {
    throw DimensionError("step_baseline: m and v disagree on dimension");
  }
  require_same_dim(w, g, d, "step_baseline");
  if (!(hyper.beta1 >= 0.0 && hyper.beta1 < 1.0) || !(hyper.beta2 >= 0.0 && hyper.beta2 < 1.0)) {
    throw InvalidArgument("step_baseline: beta1 and beta2 must lie in [0, 1)");
  }
  if (!(hyper.eps > 0.0) || !(hyper.gamma > 0.0)) {
    throw InvalidArgument("step_baseline: eps and gamma must be positive");
  }

  StepResult<BaselineState> out;
  out.state = state;
  out.state.t = state.t + 1;
  auto& m = out.state.m;
  auto& v = out.state.v;

  switch (state.kind) {
    case BaselineKind::SGD:
      out.ghat = g;
      break;
    case BaselineKind::Momentum:
      m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * g;
      out.ghat = m;
      break;
    case BaselineKind::Adagrad: {
      v = state.v + g.cwiseProduct(g);
      const double inv_t = 1.0 / static_cast<double>(out.state.t);
      out.ghat = g.array() / (v.array() * inv_t + hyper.eps).sqrt();
      break;
    }
    case BaselineKind::RMSProp:
      v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * g.cwiseProduct(g);
      out.ghat = g.array() / (v.array() + hyper.eps).sqrt();
      break;
    case BaselineKind::Adam:
      m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * g;
      v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * g.cwiseProduct(g);
      out.ghat = m.array() / (v.array() + hyper.eps).sqrt();
      break;
  }
  out.w = project(w - hyper.gamma * out.ghat, set);

  require_finite(out.ghat, "step_baseline", "direction");
  require_finite(out.w, "step_baseline", "weights");
  return out;
}

}  // namespace trainopt
