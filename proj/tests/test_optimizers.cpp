#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "trainopt/driver.hpp"
#include "trainopt/errors.hpp"
#include "trainopt/optimizers.hpp"

using namespace trainopt;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Vector scalar(double x) { return Vector::Constant(1, x); }

const FeasibleSet kFree = FeasibleSet::unconstrained();

}  // namespace

TEST_CASE("schedule values") {
  CHECK(Schedule::inverse_t(1.0, 9.0, 0).value(1, 0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(Schedule::inverse_t_squared(2.0, 9.0, 1).value(1, 0) ==
        doctest::Approx(2.0 / 81.0).epsilon(1e-15));
  CHECK(Schedule::exp_decay(0.1, 0.8).value(7, 2) == doctest::Approx(0.064).epsilon(1e-14));
  CHECK(Schedule::constant(0.3).value(123, 9) == 0.3);
  // exp decay ignores t inside an epoch
  CHECK(Schedule::exp_decay(0.1, 0.5).value(1, 1) == Schedule::exp_decay(0.1, 0.5).value(99, 1));

  CHECK_THROWS_AS(Schedule::constant(1.0).value(0, 0), InvalidArgument);
  CHECK_THROWS_AS(Schedule::constant(-1.0).validate(), InvalidArgument);
  CHECK_THROWS_AS(Schedule::exp_decay(1.0, 1.5).validate(), InvalidArgument);
  CHECK_THROWS_AS(Schedule::exp_decay(1.0, 0.0).validate(), InvalidArgument);
  // offset 1 with mu 0 has a zero denominator at t = 1
  CHECK_THROWS_AS(Schedule::inverse_t(1.0, 0.0, 1).value(1, 0), InvalidArgument);
}

TEST_CASE("projection") {
  const auto ball = FeasibleSet::l2_ball(1.0);
  CHECK(project(vec({0.3, 0.4}), ball) == vec({0.3, 0.4}));
  const Vector p = project(vec({3.0, 4.0}), ball);
  CHECK(p[0] == doctest::Approx(0.6));
  CHECK(p[1] == doctest::Approx(0.8));
  CHECK(project(Vector::Zero(4), FeasibleSet::l2_ball(2.5)) == Vector::Zero(4));
  CHECK(project(vec({30.0, 40.0}), kFree) == vec({30.0, 40.0}));
  CHECK_THROWS_AS(FeasibleSet::l2_ball(0.0), InvalidArgument);
  CHECK_THROWS_AS(FeasibleSet::l2_ball(-2.0), InvalidArgument);

  SUBCASE("non-expansive and idempotent") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> radius(0.1, 5.0);
    for (int i = 0; i < 2000; ++i) {
      const auto set = FeasibleSet::l2_ball(radius(rng));
      const Vector u = oracle::random_vector(rng, 6, 3.0);
      const Vector v = oracle::random_vector(rng, 6, 3.0);
      const Vector pu = project(u, set);
      CHECK((pu - project(v, set)).norm() <= (u - v).norm() + 1e-12);
      CHECK(pu.norm() <= set.radius * (1.0 + 1e-15));
      CHECK((project(pu, set) - pu).norm() <= 1e-15 * set.radius);
    }
  }
}

TEST_CASE("approximation loss gradients") {
  const auto r = approx_loss_grads(Matrix::Zero(1, 1), scalar(0.0), scalar(2.0), scalar(3.0));
  CHECK(r.loss == 4.5);
  CHECK(r.grad_a(0, 0) == -6.0);
  CHECK(r.grad_b[0] == -3.0);

  std::mt19937_64 rng(5);
  const Vector w = oracle::random_vector(rng, 4);
  const Vector g = oracle::random_vector(rng, 4);
  const auto fit = approx_loss_grads(Matrix::Zero(4, 4), g, w, g);
  CHECK(fit.loss == 0.0);
  CHECK(fit.grad_a.isZero());
  CHECK(fit.grad_b.isZero());
  CHECK(approx_loss_grads(Matrix::Identity(4, 4), Vector::Zero(4), g, g).loss == 0.0);

  CHECK_THROWS_AS(approx_loss_grads(Matrix::Zero(3, 3), Vector::Zero(4), w, g), DimensionError);
  CHECK_THROWS_AS(approx_loss_grads(Matrix::Zero(4, 4), Vector::Zero(4), w, Vector::Zero(3)),
                  DimensionError);

  SUBCASE("finite differences") {
    const Matrix a = oracle::random_matrix(rng, 3, 3);
    const Vector b = oracle::random_vector(rng, 3);
    const Vector x = oracle::random_vector(rng, 3);
    const Vector y = oracle::random_vector(rng, 3);
    const auto lg = approx_loss_grads(a, b, x, y);
    auto loss_of_a = [&](const Vector& flat) {
      const Matrix m = Eigen::Map<const Matrix>(flat.data(), 3, 3);
      return 0.5 * (y - m * x - b).squaredNorm();
    };
    const Vector flat = Eigen::Map<const Vector>(a.data(), 9);
    const Vector fd_a = oracle::central_difference(loss_of_a, flat);
    const Vector ga = Eigen::Map<const Vector>(lg.grad_a.data(), 9);
    CHECK(oracle::rel_error(ga, fd_a) < 1e-6);
    const Vector fd_b = oracle::central_difference(
        [&](const Vector& bb) { return 0.5 * (y - a * x - bb).squaredNorm(); }, b);
    CHECK(oracle::rel_error(lg.grad_b, fd_b) < 1e-6);
  }
}

TEST_CASE("pseudo-linear step") {
  const ToRates rates{0.1, 0.5, 0.1};
  const auto s = step_pseudo_linear(FullLinearState::zeros(1), scalar(2.0), scalar(3.0), rates,
                                    kFree);
  CHECK(s.state.a(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(s.state.b[0] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(s.ghat[0] == doctest::Approx(2.7).epsilon(1e-15));
  CHECK(s.w[0] == doctest::Approx(1.73).epsilon(1e-15));

  std::mt19937_64 rng(7);
  SUBCASE("first step from zero state") {
    const Vector w = oracle::random_vector(rng, 5);
    const Vector g = oracle::random_vector(rng, 5);
    const auto r = step_pseudo_linear(FullLinearState::zeros(5), w, g, {0.3, 0.2, 0.01}, kFree);
    const Vector expect = (0.3 * w.squaredNorm() + 0.2) * g;
    CHECK(oracle::rel_error(r.ghat, expect) < 1e-14);
  }
  SUBCASE("alpha zero gives the momentum recursion") {
    FullLinearState st = FullLinearState::zeros(3);
    st.b = oracle::random_vector(rng, 3);
    const Vector g = oracle::random_vector(rng, 3);
    const auto r = step_pseudo_linear(st, oracle::random_vector(rng, 3), g, {0.0, 0.25, 0.1},
                                      kFree);
    const Vector expect = 0.75 * st.b + 0.25 * g;
    CHECK(oracle::rel_error(r.state.b, expect) < 1e-15);
    CHECK(r.ghat == r.state.b);
    CHECK(r.state.a.isZero());
  }
  SUBCASE("matches a gradient step on the approximation loss") {
    for (int i = 0; i < 50; ++i) {
      FullLinearState st{oracle::random_matrix(rng, 4, 4), oracle::random_vector(rng, 4)};
      const Vector w = oracle::random_vector(rng, 4);
      const Vector g = oracle::random_vector(rng, 4);
      const ToRates rt{0.05, 0.3, 0.1};
      const auto lg = approx_loss_grads(st.a, st.b, w, g);
      const auto r = step_pseudo_linear(st, w, g, rt, kFree);
      CHECK(r.state.a == Matrix(st.a - rt.alpha * lg.grad_a));
      CHECK(r.state.b == Vector(st.b - rt.beta * lg.grad_b));
    }
  }
  SUBCASE("delta form") {
    for (int i = 0; i < 200; ++i) {
      FullLinearState st{oracle::random_matrix(rng, 5, 5), oracle::random_vector(rng, 5)};
      const Vector w = oracle::random_vector(rng, 5);
      const Vector g = oracle::random_vector(rng, 5);
      const ToRates rt{0.02, 0.4, 0.05};
      const auto r = step_pseudo_linear(st, w, g, rt, kFree);
      const Vector prev = st.a * w + st.b;
      const Vector lhs = r.ghat - prev;
      const Vector rhs = (rt.alpha * w.squaredNorm() + rt.beta) * (g - prev);
      CHECK(oracle::rel_error(lhs, rhs, 1e-300) < 1e-12);
    }
  }
  SUBCASE("projected step length") {
    const auto ball = FeasibleSet::l2_ball(0.5);
    for (int i = 0; i < 200; ++i) {
      FullLinearState st{oracle::random_matrix(rng, 3, 3), oracle::random_vector(rng, 3)};
      const Vector w = project(oracle::random_vector(rng, 3), ball);
      const auto r = step_pseudo_linear(st, w, oracle::random_vector(rng, 3), {0.1, 0.5, 0.3},
                                        ball);
      CHECK((r.w - w).norm() <= 0.3 * r.ghat.norm() + 1e-15);
      CHECK(r.w.norm() <= 0.5 + 1e-15);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(FullLinearState::zeros(10, 8), DimensionError);
    CHECK_THROWS_AS(step_pseudo_linear(FullLinearState::zeros(10), Vector::Zero(10),
                                       Vector::Zero(10), {0.1, 0.1, 0.1}, kFree, 8),
                    DimensionError);
    CHECK_THROWS_AS(step_pseudo_linear(FullLinearState::zeros(2), Vector::Zero(2),
                                       Vector::Zero(2), {-0.1, 0.1, 0.1}, kFree),
                    InvalidArgument);
    CHECK_THROWS_AS(step_pseudo_linear(FullLinearState::zeros(2), Vector::Zero(2),
                                       Vector::Zero(2), {0.1, 0.1, 0.0}, kFree),
                    InvalidArgument);
    CHECK_THROWS_AS(step_pseudo_linear(FullLinearState::zeros(2), Vector::Ones(2),
                                       Vector::Constant(2, 1e308), {1.0, 1e10, 1.0}, kFree),
                    NumericalError);
  }
}

TEST_CASE("diagonal step") {
  const auto s = step_diagonal(DiagLinearState::zeros(2), vec({1.0, 2.0}), vec({1.0, -1.0}),
                               {0.1, 0.5, 0.1}, kFree);
  CHECK(s.state.a[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(s.state.a[1] == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(s.state.b == vec({0.5, -0.5}));
  CHECK(s.ghat[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(s.ghat[1] == doctest::Approx(-0.9).epsilon(1e-15));

  const auto sgd = step_diagonal(DiagLinearState::zeros(3), vec({1.0, 2.0, 3.0}),
                                 vec({0.5, -4.0, 2.0}), {0.0, 1.0, 0.1}, kFree);
  CHECK(sgd.ghat == vec({0.5, -4.0, 2.0}));

  SUBCASE("d = 1 agrees with the full variant") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 100; ++i) {
      const ToRates rt{0.1 * std::abs(u(rng)), std::abs(u(rng)), 0.1};
      const Vector w = scalar(u(rng));
      const Vector g = scalar(u(rng));
      const auto d = step_diagonal(DiagLinearState::zeros(1), w, g, rt, kFree);
      const auto f = step_pseudo_linear(FullLinearState::zeros(1), w, g, rt, kFree);
      const auto r = step_rank_one(RankOneState::initial(1), w, g, rt, kFree);
      const double expect = (rt.alpha * w[0] * w[0] + rt.beta) * g[0];
      CHECK(d.ghat[0] == doctest::Approx(expect).epsilon(1e-14));
      CHECK(f.ghat[0] == doctest::Approx(expect).epsilon(1e-14));
      CHECK(r.ghat[0] == doctest::Approx(expect).epsilon(1e-14));
      CHECK(d.w[0] == f.w[0]);
    }
  }
  SUBCASE("coordinate-wise delta form") {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 200; ++i) {
      DiagLinearState st{oracle::random_vector(rng, 6), oracle::random_vector(rng, 6)};
      const Vector w = oracle::random_vector(rng, 6);
      const Vector g = oracle::random_vector(rng, 6);
      const ToRates rt{0.03, 0.2, 0.05};
      const auto r = step_diagonal(st, w, g, rt, kFree);
      for (Eigen::Index k = 0; k < 6; ++k) {
        const double prev = st.a[k] * w[k] + st.b[k];
        const double lhs = r.ghat[k] - prev;
        const double rhs = (rt.alpha * w[k] * w[k] + rt.beta) * (g[k] - prev);
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(std::abs(rhs), 1e-300));
      }
    }
  }
}

TEST_CASE("rank-one step") {
  const auto init = RankOneState::initial(4);
  CHECK(init.c.norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(init.a.isZero());
  CHECK_THROWS_AS(RankOneState::initial(0), DimensionError);

  SUBCASE("zero initialisation is absorbing") {
    RankOneState z{Vector::Zero(2), Vector::Zero(2), Vector::Zero(2)};
    const Vector g = vec({1.0, -1.0});
    const auto r = step_rank_one(z, vec({1.0, 2.0}), g, {0.1, 0.5, 0.1}, kFree);
    CHECK(r.state.a.isZero());
    CHECK(r.state.c.isZero());
    CHECK(r.state.b == Vector(0.5 * g));
    CHECK(r.ghat == Vector(0.5 * g));
  }
  SUBCASE("worked example") {
    RankOneState st{Vector::Zero(2), vec({1.0, 1.0}), Vector::Zero(2)};
    const auto r = step_rank_one(st, vec({1.0, 2.0}), vec({1.0, -1.0}), {0.1, 0.5, 0.1}, kFree);
    CHECK(r.state.a[0] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(r.state.a[1] == doctest::Approx(-0.3).epsilon(1e-15));
    CHECK(r.state.c == vec({1.0, 1.0}));
    CHECK(r.state.b == vec({0.5, -0.5}));
    CHECK(r.ghat[0] == doctest::Approx(1.4).epsilon(1e-14));
    CHECK(r.ghat[1] == doctest::Approx(-1.4).epsilon(1e-14));
  }
  SUBCASE("alpha zero freezes the factors") {
    std::mt19937_64 rng(2);
    RankOneState st{oracle::random_vector(rng, 3), oracle::random_vector(rng, 3),
                    oracle::random_vector(rng, 3)};
    const Vector w = oracle::random_vector(rng, 3);
    const Vector g = oracle::random_vector(rng, 3);
    const auto r = step_rank_one(st, w, g, {0.0, 0.3, 0.1}, kFree);
    CHECK(r.state.a == st.a);
    CHECK(r.state.c == st.c);
    const Vector resid = g - st.a * st.c.dot(w) - st.b;
    CHECK(oracle::rel_error(r.state.b, st.b + 0.3 * resid) < 1e-15);
  }
  SUBCASE("same as the full step on A = a c^T for the first-order terms") {
    std::mt19937_64 rng(4);
    RankOneState st{oracle::random_vector(rng, 3), oracle::random_vector(rng, 3),
                    oracle::random_vector(rng, 3)};
    const Vector w = oracle::random_vector(rng, 3);
    const Vector g = oracle::random_vector(rng, 3);
    const ToRates rt{0.01, 0.2, 0.1};
    const auto r = step_rank_one(st, w, g, rt, kFree);
    const Vector resid = g - st.a * st.c.dot(w) - st.b;
    CHECK(oracle::rel_error(r.state.a, st.a + rt.alpha * st.c.dot(w) * resid) < 1e-15);
    CHECK(oracle::rel_error(r.state.c, st.c + rt.alpha * resid.dot(st.a) * w) < 1e-15);
  }
}

TEST_CASE("baselines") {
  const Vector g = scalar(1.0);
  const Vector w = scalar(0.0);
  BaselineHyper h;
  h.gamma = 0.1;

  const auto sgd = step_baseline(BaselineState::zeros(BaselineKind::SGD, 1), w, g, h, kFree);
  CHECK(sgd.ghat == g);
  CHECK(sgd.state.m.isZero());
  CHECK(sgd.state.v.isZero());

  const auto mom = step_baseline(BaselineState::zeros(BaselineKind::Momentum, 1), w, g, h, kFree);
  CHECK(mom.ghat[0] == doctest::Approx(0.1).epsilon(1e-15));

  const auto adam = step_baseline(BaselineState::zeros(BaselineKind::Adam, 1), w, g, h, kFree);
  CHECK(adam.ghat[0] == doctest::Approx(3.16226).epsilon(1e-5));
  CHECK(adam.ghat[0] == doctest::Approx(0.1 / std::sqrt(0.001 + 1e-8)).epsilon(1e-14));
  CHECK(adam.state.t == 1);

  SUBCASE("adagrad averages over t") {
    auto st = BaselineState::zeros(BaselineKind::Adagrad, 1);
    auto r1 = step_baseline(st, w, scalar(2.0), h, kFree);
    auto r2 = step_baseline(r1.state, r1.w, scalar(1.0), h, kFree);
    CHECK(r1.ghat[0] == doctest::Approx(2.0 / std::sqrt(4.0 + 1e-8)).epsilon(1e-14));
    CHECK(r2.ghat[0] == doctest::Approx(1.0 / std::sqrt(5.0 / 2.0 + 1e-8)).epsilon(1e-14));
  }
  SUBCASE("rmsprop uses beta2") {
    BaselineHyper hr = h;
    hr.beta2 = 0.9;
    auto r = step_baseline(BaselineState::zeros(BaselineKind::RMSProp, 1), w, scalar(2.0), hr,
                           kFree);
    CHECK(r.state.v[0] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(r.ghat[0] == doctest::Approx(2.0 / std::sqrt(0.4 + 1e-8)).epsilon(1e-14));
    CHECK(r.w[0] == doctest::Approx(-0.1 * r.ghat[0]).epsilon(1e-15));
  }
  SUBCASE("second moments stay non-negative") {
    std::mt19937_64 rng(8);
    for (auto kind : {BaselineKind::Adagrad, BaselineKind::RMSProp, BaselineKind::Adam}) {
      auto st = BaselineState::zeros(kind, 4);
      Vector x = Vector::Zero(4);
      for (int i = 0; i < 50; ++i) {
        auto r = step_baseline(st, x, oracle::random_vector(rng, 4), h, kFree);
        CHECK((r.state.v.array() >= 0.0).all());
        st = r.state;
        x = r.w;
      }
    }
  }
  SUBCASE("bad hyperparameters") {
    BaselineHyper bad = h;
    bad.beta1 = 1.0;
    CHECK_THROWS_AS(step_baseline(BaselineState::zeros(BaselineKind::Adam, 1), w, g, bad, kFree),
                    InvalidArgument);
    bad = h;
    bad.eps = 0.0;
    CHECK_THROWS_AS(step_baseline(BaselineState::zeros(BaselineKind::Adam, 1), w, g, bad, kFree),
                    InvalidArgument);
  }
}

TEST_CASE("pseudo-linear with alpha = 0 reproduces momentum") {
  std::mt19937_64 rng(21);
  for (double beta : {0.1, 0.37, 0.9}) {
    FullLinearState to = FullLinearState::zeros(6);
    BaselineState mom = BaselineState::zeros(BaselineKind::Momentum, 6);
    BaselineHyper h;
    h.beta1 = 1.0 - beta;
    h.gamma = 0.05;
    Vector w_to = oracle::random_vector(rng, 6);
    Vector w_mom = w_to;
    for (int t = 0; t < 300; ++t) {
      const Vector g = oracle::random_vector(rng, 6);
      auto a = step_pseudo_linear(to, w_to, g, {0.0, beta, 0.05}, kFree);
      auto b = step_baseline(mom, w_mom, g, h, kFree);
      to = a.state;
      w_to = a.w;
      mom = b.state;
      w_mom = b.w;
    }
    CHECK((w_to - w_mom).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("steps are deterministic") {
  std::mt19937_64 rng(1);
  const FullLinearState st{oracle::random_matrix(rng, 4, 4), oracle::random_vector(rng, 4)};
  const Vector w = oracle::random_vector(rng, 4);
  const Vector g = oracle::random_vector(rng, 4);
  const auto a = step_pseudo_linear(st, w, g, {0.1, 0.2, 0.3}, kFree);
  const auto b = step_pseudo_linear(st, w, g, {0.1, 0.2, 0.3}, kFree);
  CHECK(a.w == b.w);
  CHECK(a.state.a == b.state.a);
}

TEST_CASE("optimizer driver") {
  CHECK(parse_optimizer_kind("rank_one_to") == OptimizerKind::RankOneTO);
  CHECK(!parse_optimizer_kind("lbfgs"));
  for (auto k : {OptimizerKind::FullTO, OptimizerKind::DiagonalTO, OptimizerKind::RankOneTO,
                 OptimizerKind::SGD, OptimizerKind::Momentum, OptimizerKind::Adagrad,
                 OptimizerKind::RMSProp, OptimizerKind::Adam}) {
    CHECK(parse_optimizer_kind(to_string(k)) == k);
  }
  CHECK(is_trainable(OptimizerKind::DiagonalTO));
  CHECK(!is_trainable(OptimizerKind::Adam));

  SUBCASE("evaluates schedules and matches the step functions") {
    OptimizerSpec spec;
    spec.kind = OptimizerKind::DiagonalTO;
    spec.gamma = Schedule::inverse_t(2.0, 10.0, 0);
    spec.beta = Schedule::inverse_t(5.0, 10.0, 1);
    spec.alpha = Schedule::inverse_t_squared(0.5, 10.0, 1);
    Optimizer opt(spec, 3);
    std::mt19937_64 rng(6);
    Vector w = oracle::random_vector(rng, 3);
    DiagLinearState ref = DiagLinearState::zeros(3);
    Vector w_ref = w;
    for (long long t = 1; t <= 20; ++t) {
      const Vector g = oracle::random_vector(rng, 3);
      const ToRates rt{0.5 / ((t - 1 + 10.0) * (t - 1 + 10.0)), 5.0 / (t - 1 + 10.0),
                       2.0 / (t + 10.0)};
      auto r = step_diagonal(ref, w_ref, g, rt, kFree);
      ref = r.state;
      w_ref = r.w;
      const Vector ghat = opt.step(w, g, t, 0);
      CHECK(ghat == r.ghat);
      CHECK(w == w_ref);
    }
    CHECK(std::get<DiagLinearState>(opt.state()).a == ref.a);
  }
  SUBCASE("missing alpha and beta mean zero rates") {
    OptimizerSpec spec;
    spec.kind = OptimizerKind::FullTO;
    Optimizer opt(spec, 2);
    const auto r = opt.rates_at(5, 0);
    CHECK(r.alpha == 0.0);
    CHECK(r.beta == 0.0);
    CHECK(r.gamma == 1e-3);
  }
  SUBCASE("full dimension cap") {
    OptimizerSpec spec;
    spec.kind = OptimizerKind::FullTO;
    spec.full_dim_cap = 4;
    CHECK_THROWS_AS(Optimizer(spec, 5), DimensionError);
  }
}
