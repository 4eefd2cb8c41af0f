#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "trainopt/optimizers.hpp"

namespace trainopt {

enum class OptimizerKind { FullTO, DiagonalTO, RankOneTO, SGD, Momentum, Adagrad, RMSProp, Adam };

std::string_view to_string(OptimizerKind kind);
std::optional<OptimizerKind> parse_optimizer_kind(std::string_view name);
bool is_trainable(OptimizerKind kind);

/// Everything needed to step one optimizer over a run. An empty alpha/beta
/// schedule means the rate is identically zero.
struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::SGD;
  Schedule gamma = Schedule::constant(1e-3);
  std::optional<Schedule> alpha;
  std::optional<Schedule> beta;
  BaselineHyper hyper;  // beta1, beta2, eps; gamma comes from the schedule
  FeasibleSet feasible;
  std::size_t full_dim_cap = kDefaultFullDimCap;
};

using OptimizerState = std::variant<FullLinearState, DiagLinearState, RankOneState, BaselineState>;

/// Stateful wrapper over the pure step functions: evaluates the schedules at
/// (t, epoch), dispatches on the optimizer kind and keeps the state.
class Optimizer {
 public:
  Optimizer(OptimizerSpec spec, std::size_t dim);

  /// Advances w in place with stochastic gradient g at step t >= 1. Returns
  /// the update direction that was used.
  const Vector& step(Vector& w, const Vector& g, long long t, long long epoch);

  const OptimizerState& state() const { return state_; }
  const OptimizerSpec& spec() const { return spec_; }
  const Vector& last_direction() const { return ghat_; }

  /// Rates that step t of `epoch` would use.
  ToRates rates_at(long long t, long long epoch) const;

 private:
  OptimizerSpec spec_;
  OptimizerState state_;
  Vector ghat_;
};

}  // namespace trainopt
