#include "trainopt/driver.hpp"

#include <array>
#include <utility>

#include "trainopt/errors.hpp"

namespace trainopt {

namespace {

constexpr std::array<std::pair<OptimizerKind, std::string_view>, 8> kNames{{
    {OptimizerKind::FullTO, "full_to"},
    {OptimizerKind::DiagonalTO, "diagonal_to"},
    {OptimizerKind::RankOneTO, "rank_one_to"},
    {OptimizerKind::SGD, "sgd"},
    {OptimizerKind::Momentum, "momentum"},
    {OptimizerKind::Adagrad, "adagrad"},
    {OptimizerKind::RMSProp, "rmsprop"},
    {OptimizerKind::Adam, "adam"},
}};

BaselineKind baseline_kind(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::SGD: return BaselineKind::SGD;
    case OptimizerKind::Momentum: return BaselineKind::Momentum;
    case OptimizerKind::Adagrad: return BaselineKind::Adagrad;
    case OptimizerKind::RMSProp: return BaselineKind::RMSProp;
    case OptimizerKind::Adam: return BaselineKind::Adam;
    default: break;
  }
  throw InvalidArgument("not a baseline optimizer");
}

OptimizerState initial_state(const OptimizerSpec& spec, std::size_t d) {
  switch (spec.kind) {
    case OptimizerKind::FullTO: return FullLinearState::zeros(d, spec.full_dim_cap);
    case OptimizerKind::DiagonalTO: return DiagLinearState::zeros(d);
    case OptimizerKind::RankOneTO: return RankOneState::initial(d);
    default: return BaselineState::zeros(baseline_kind(spec.kind), d);
  }
}

}  // namespace

std::string_view to_string(OptimizerKind kind) {
  for (const auto& [k, name] : kNames) {
    if (k == kind) {
      return name;
    }
  }
  return "unknown";
}

std::optional<OptimizerKind> parse_optimizer_kind(std::string_view name) {
  for (const auto& [k, n] : kNames) {
    if (n == name) {
      return k;
    }
  }
  return std::nullopt;
}

bool is_trainable(OptimizerKind kind) {
  return kind == OptimizerKind::FullTO || kind == OptimizerKind::DiagonalTO ||
         kind == OptimizerKind::RankOneTO;
}

Optimizer::Optimizer(OptimizerSpec spec, std::size_t dim)
    : spec_(std::move(spec)), state_(initial_state(spec_, dim)) {}

ToRates Optimizer::rates_at(long long t, long long epoch) const {
  ToRates r;
  r.gamma = spec_.gamma.value(t, epoch);
  r.alpha = spec_.alpha ? spec_.alpha->value(t, epoch) : 0.0;
  r.beta = spec_.beta ? spec_.beta->value(t, epoch) : 0.0;
  return r;
}

const Vector& Optimizer::step(Vector& w, const Vector& g, long long t, long long epoch) {
  const ToRates rates = rates_at(t, epoch);
  std::visit(
      [&](auto& st) {
        using S = std::decay_t<decltype(st)>;
        if constexpr (std::is_same_v<S, FullLinearState>) {
          auto res = step_pseudo_linear(st, w, g, rates, spec_.feasible, spec_.full_dim_cap);
          st = std::move(res.state);
          w = std::move(res.w);
          ghat_ = std::move(res.ghat);
        } else if constexpr (std::is_same_v<S, DiagLinearState>) {
          auto res = step_diagonal(st, w, g, rates, spec_.feasible);
          st = std::move(res.state);
          w = std::move(res.w);
          ghat_ = std::move(res.ghat);
        } else if constexpr (std::is_same_v<S, RankOneState>) {
          auto res = step_rank_one(st, w, g, rates, spec_.feasible);
          st = std::move(res.state);
          w = std::move(res.w);
          ghat_ = std::move(res.ghat);
        } else {
          BaselineHyper hyper = spec_.hyper;
          hyper.gamma = rates.gamma;
          auto res = step_baseline(st, w, g, hyper, spec_.feasible);
          st = std::move(res.state);
          w = std::move(res.w);
          ghat_ = std::move(res.ghat);
        }
      },
      state_);
  return ghat_;
}

}  // namespace trainopt
