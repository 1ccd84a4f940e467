#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "atacom/controller.hpp"

using namespace atacom;

namespace {

ControlAffineSystem integrator(int dim, double bound = 0.0) {
  ControlAffineSystem sys;
  sys.dim_state = dim;
  sys.dim_control = dim;
  sys.drift = [dim](const Vec&) { return Vec::Zero(dim); };
  sys.input_matrix = [dim](const Vec&) { return Mat::Identity(dim, dim); };
  if (bound > 0.0) {
    sys.control_lower = Vec::Constant(dim, -bound);
    sys.control_upper = Vec::Constant(dim, bound);
  }
  return sys;
}

ConstraintSpec scalar_halfspace() {
  ConstraintSpec spec;
  spec.dim_out = 1;
  spec.eval = [](const Vec& s) { return s.head(1); };
  spec.jacobian = [](const Vec& s) {
    Mat j = Mat::Zero(1, s.size());
    j(0, 0) = 1.0;
    return j;
  };
  return spec;
}

ConstraintSpec disc_keepout(const Vec& center, double radius) {
  ConstraintSpec spec;
  spec.dim_out = 1;
  spec.eval = [=](const Vec& s) {
    Vec v(1);
    v(0) = radius - (s - center).norm();
    return v;
  };
  spec.jacobian = [=](const Vec& s) {
    const Vec d = s - center;
    Mat j(1, s.size());
    j = -d.transpose() / d.norm();
    return j;
  };
  return spec;
}

Vec vec1(double v) {
  Vec out(1);
  out << v;
  return out;
}

}  // namespace

TEST_CASE("drift_clip: elementwise positive part") {
  CHECK(drift_clip(vec1(0.0))(0) == 0.0);
  Vec psi(2);
  psi << -0.5, 0.3;
  const Vec clipped = drift_clip(psi);
  CHECK(clipped(0) == 0.0);
  CHECK(clipped(1) == doctest::Approx(0.3));
}

TEST_CASE("safe_action: all terms vanish on-manifold with zero action") {
  auto sys = integrator(1);
  SlackModel slack{SlackFamily::Exponential, 1.0, 1e-6, std::nullopt};
  AugmentedState state;
  state.s = vec1(-0.7);
  state.mu = vec1(0.7);
  const auto assembly = assemble(Variant::FirstOrder, sys, {scalar_halfspace()}, slack, state);
  ControllerConfig config;
  const SafeAction act = safe_action(assembly, Vec::Zero(1), config);
  CHECK(std::abs(act.u_s(0)) < 1e-14);
  CHECK(std::abs(act.u_mu(0)) < 1e-14);
  CHECK_FALSE(act.saturated);
}

TEST_CASE("safe_action: tangential term of the 1D exponential case") {
  // k(s) = s, s_dot = u, beta = 1, s = -1, mu = 1, lambda = 1, action 1.
  // Closed form magnitude alpha / sqrt(1 + alpha^2); the aligned frame
  // points along +s, verified against the independent evaluation of the
  // controller expression.
  auto sys = integrator(1);
  SlackModel slack{SlackFamily::Exponential, 1.0, 1e-6, std::nullopt};
  AugmentedState state;
  state.s = vec1(-1.0);
  state.mu = vec1(1.0);
  const auto assembly = assemble(Variant::FirstOrder, sys, {scalar_halfspace()}, slack, state);
  ControllerConfig config;
  config.lambda = 1.0;
  const SafeAction act = safe_action(assembly, vec1(1.0), config);

  const double alpha = std::exp(1.0) - 1.0;
  const double expected = alpha / std::sqrt(1.0 + alpha * alpha);  // 0.86428877617...
  CHECK(act.u_s(0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(act.u_mu(0) == doctest::Approx(-1.0 / std::sqrt(1.0 + alpha * alpha)).epsilon(1e-12));
  // executed control is tangent: J_u [u_s; u_mu] = 0
  Vec executed(2);
  executed << act.u_s, act.u_mu;
  CHECK(std::abs((assembly.J_u * executed)(0)) < 1e-12);
}

TEST_CASE("safe_action: pure contraction at the boundary") {
  // c = [0.1], J_u = [1 0], lambda = 2, psi = 0, zero action -> u_s = -0.2
  AugmentedAssembly assembly;
  assembly.J_u = (Mat(1, 2) << 1.0, 0.0).finished();
  assembly.J_u_pinv = pseudoinverse(assembly.J_u);
  assembly.psi = vec1(0.0);
  assembly.c = vec1(0.1);
  assembly.B_u = (Mat(2, 1) << 0.0, 1.0).finished();
  assembly.num_inequality = 1;
  assembly.dim_control = 1;
  ControllerConfig config;
  config.lambda = 2.0;
  const SafeAction act = safe_action(assembly, Vec::Zero(1), config);
  CHECK(act.u_s(0) == doctest::Approx(-0.2).epsilon(1e-12));
}

TEST_CASE("controller config validation") {
  ControllerConfig config;
  config.lambda = 0.0;
  CHECK_THROWS_AS(config.validate(), InvalidInputError);
  config.lambda = 1.0;
  config.reference_frame = (Mat(2, 1) << 1.0, 1.0).finished();  // not orthonormal
  CHECK_THROWS_AS(config.validate(), InvalidInputError);
  config.reference_frame = (Mat(2, 1) << 1.0, 0.0).finished();
  CHECK_NOTHROW(config.validate());
}

TEST_CASE("safe_action: input validation") {
  auto sys = integrator(1);
  SlackModel slack{SlackFamily::Linear, 1.0, 1e-6, std::nullopt};
  AugmentedState state;
  state.s = vec1(-0.5);
  state.mu = vec1(0.5);
  const auto assembly = assemble(Variant::FirstOrder, sys, {scalar_halfspace()}, slack, state);
  ControllerConfig config;
  CHECK_THROWS_AS(safe_action(assembly, vec1(std::nan("")), config), InvalidInputError);
  CHECK_THROWS_AS(safe_action(assembly, vec1(1.5), config), InvalidInputError);
  CHECK_THROWS_AS(safe_action(assembly, Vec::Zero(2), config), InvalidInputError);
}

TEST_CASE("safe_action: saturation flag on clipped control") {
  auto sys = integrator(1, 0.1);  // tight bounds
  SlackModel slack{SlackFamily::Exponential, 5.0, 1e-6, std::nullopt};
  AugmentedState state;
  state.s = vec1(-2.0);
  state.mu = vec1(2.0);
  const auto assembly = assemble(Variant::FirstOrder, sys, {scalar_halfspace()}, slack, state);
  ControllerConfig config;
  const SafeAction act = safe_action(assembly, vec1(1.0), config);
  CHECK(act.saturated);
  CHECK(std::abs(act.u_s(0)) <= 0.1 + 1e-12);
}

TEST_CASE("atacom_step: frame aligns with the control axes far from the boundary") {
  auto sys = integrator(2, 1.0);
  Vec center = Vec::Zero(2);
  std::vector<ConstraintSpec> constraints{disc_keepout(center, 0.15)};
  SlackModel slack{SlackFamily::Exponential, 4.0, 1e-6, std::nullopt};
  ControllerConfig config;
  AugmentedState state;
  state.s = (Vec(2) << 1.5, 0.0).finished();  // ten radii out
  const auto result = atacom_step(Variant::FirstOrder, sys, constraints, slack, state,
                                  (Vec(2) << 1.0, 0.0).finished(), config);
  CHECK(result.action.u_s(0) == doctest::Approx(1.0).epsilon(1e-2));
  CHECK(std::abs(result.action.u_s(1)) < 1e-2);
}

TEST_CASE("atacom_step: no outward velocity on an active constraint") {
  auto sys = integrator(2, 1.0);
  Vec center = Vec::Zero(2);
  std::vector<ConstraintSpec> constraints{disc_keepout(center, 0.5)};
  SlackModel slack{SlackFamily::Exponential, 4.0, 1e-6, std::nullopt};
  ControllerConfig config;  // lambda 10
  AugmentedState state;
  state.s = (Vec(2) << 0.5, 0.0).finished();  // exactly on the boundary, k = 0
  const Vec action = (Vec(2) << 0.0, 1.0).finished();  // push along the boundary
  const auto result = atacom_step(Variant::FirstOrder, sys, constraints, slack, state, action, config);
  const Vec k_dot = result.assembly.J_u.topLeftCorner(1, 2) * result.action.u_s;
  CHECK(k_dot(0) <= 1e-8);
}

TEST_CASE("atacom_step: determinism") {
  auto sys = integrator(2, 1.0);
  std::vector<ConstraintSpec> constraints{disc_keepout(Vec::Zero(2), 0.3)};
  SlackModel slack{SlackFamily::Exponential, 2.0, 1e-6, std::nullopt};
  ControllerConfig config;
  AugmentedState state;
  state.s = (Vec(2) << 0.4, 0.2).finished();
  const Vec action = (Vec(2) << 0.3, -0.8).finished();
  const auto a = atacom_step(Variant::FirstOrder, sys, constraints, slack, state, action, config);
  const auto b = atacom_step(Variant::FirstOrder, sys, constraints, slack, state, action, config);
  CHECK((a.action.u_s - b.action.u_s).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.assembly.B_u - b.assembly.B_u).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tangency: psi_hat + J_u [u_s; u_mu] vanishes on-manifold in all four variants") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  ControllerConfig config;
  config.lambda = 5.0;
  SlackModel slack{SlackFamily::Exponential, 2.0, 1e-6, std::nullopt};

  auto check_tangent = [&](const AugmentedAssembly& assembly) {
    Vec action(assembly.action_dim());
    for (int i = 0; i < action.size(); ++i) action(i) = unit(rng);
    const SafeAction act = safe_action(assembly, action, config);
    if (act.saturated) return;
    Vec executed(act.u_s.size() + act.u_mu.size());
    executed << act.u_s, act.u_mu;
    const Vec psi_hat = drift_clip(assembly.psi);
    CHECK((psi_hat + assembly.J_u * executed).cwiseAbs().maxCoeff() < 1e-8);
  };

  ControlAffineSystem drifting = integrator(2);
  drifting.drift = [](const Vec&) { return (Vec(2) << 0.3, -0.2).finished(); };
  std::vector<ConstraintSpec> keepout{disc_keepout(Vec::Zero(2), 0.2)};

  ConstraintSpec moving;
  moving.dim_out = 1;
  moving.eval = [](const Vec& x) {
    Vec v(1);
    v(0) = 0.2 - (x.head(2) - x.tail(2)).norm();
    return v;
  };
  moving.jacobian = [](const Vec& x) {
    const Vec d = x.head(2) - x.tail(2);
    Mat j(1, 4);
    j << -d.transpose() / d.norm(), d.transpose() / d.norm();
    return j;
  };

  ConstraintSpec lifted = disc_keepout(Vec::Zero(2), 0.2);
  lifted.jacobian_dot = [](const Vec& s, const Vec& s_dot) {
    const double dist = s.norm();
    Mat j(1, 2);
    j = (-s_dot.transpose() * dist * dist + s.transpose() * s.dot(s_dot)) /
        (dist * dist * dist);
    return j;
  };

  ConstraintSpec ring;
  ring.kind = ConstraintKind::Equality;
  ring.dim_out = 1;
  ring.eval = [](const Vec& s) {
    Vec v(1);
    v(0) = s.squaredNorm() - 1.0;
    return v;
  };
  ring.jacobian = [](const Vec& s) {
    Mat j(1, 2);
    j = 2.0 * s.transpose();
    return j;
  };

  for (int trial = 0; trial < 100; ++trial) {
    Vec s(2);
    do {
      s << 2.0 * unit(rng), 2.0 * unit(rng);
    } while (s.norm() < 0.25);

    AugmentedState state;
    state.s = s;
    state.mu = -keepout[0].eval(s);
    check_tangent(assemble(Variant::FirstOrder, drifting, keepout, slack, state));

    AugmentedState separated;
    separated.s = s;
    separated.z = (Vec(2) << 3.0 * unit(rng), 3.0 * unit(rng)).finished();
    Vec stacked(4);
    stacked << separated.s, *separated.z;
    if (moving.eval(stacked)(0) < -0.02) {
      separated.mu = -moving.eval(stacked);
      const Vec z_dot = (Vec(2) << unit(rng), unit(rng)).finished();
      check_tangent(assemble(Variant::Separable, drifting, {moving}, slack, separated, z_dot));
    }

    ControlAffineSystem accel = integrator(2);
    accel.drift = [](const Vec& x) { return Vec(-0.5 * x.tail(2)); };
    AugmentedState second;
    second.s = s;
    second.s_dot = (Vec(2) << unit(rng), unit(rng)).finished();
    const Vec k_star = second_order_constraint(lifted.eval(s), lifted.jacobian(s),
                                               *second.s_dot, 1.0);
    if (k_star(0) < -0.02) {
      second.mu = -k_star;
      check_tangent(assemble(Variant::SecondOrder, accel, {lifted}, slack, second));
    }

    AugmentedState on_ring;
    on_ring.s = s / s.norm();  // equality row exactly satisfied
    on_ring.mu = -keepout[0].eval(on_ring.s);
    check_tangent(
        assemble(Variant::EqualityAugmented, drifting, {keepout[0], ring}, slack, on_ring));
  }
}

TEST_CASE("lyapunov rate identity along the controlled flow") {
  // dV/dt computed from the executed velocities equals -lambda c' J_u J_u^+ c
  // when the drift compensation is unclipped.
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  ControllerConfig config;
  config.lambda = 3.0;
  config.drift_clipping = false;

  ControlAffineSystem drifting = integrator(2);
  drifting.drift = [](const Vec&) { return (Vec(2) << 0.4, 0.1).finished(); };
  std::vector<ConstraintSpec> constraints{disc_keepout(Vec::Zero(2), 0.2)};
  SlackModel slack{SlackFamily::Exponential, 1.5, 1e-6, std::nullopt};

  for (int trial = 0; trial < 200; ++trial) {
    Vec s(2);
    do {
      s << 2.0 * unit(rng), 2.0 * unit(rng);
    } while (s.norm() < 0.25);
    AugmentedState state;
    state.s = s;
    state.mu = vec1(0.3 + 0.5 * std::abs(unit(rng)));  // generally off-manifold
    const auto assembly = assemble(Variant::FirstOrder, drifting, constraints, slack, state);
    Vec action(assembly.action_dim());
    for (int i = 0; i < action.size(); ++i) action(i) = unit(rng);
    const SafeAction act = safe_action(assembly, action, config);
    if (act.saturated) continue;

    const Vec s_dot = drifting.drift(s) + drifting.input_matrix(s) * act.u_s;
    const Vec mu_dot = slack_alpha(slack, state.mu).cwiseProduct(act.u_mu);
    Mat j_c(1, 3);
    j_c << constraints[0].jacobian(s), Mat::Identity(1, 1);
    Vec vel(3);
    vel << s_dot, mu_dot;
    const double v_dot_flow = assembly.c.dot(j_c * vel);
    const double v_dot_rate = -config.lambda * assembly.c.dot(assembly.J_u * assembly.J_u_pinv *
                                                              assembly.c);
    CHECK(v_dot_flow == doctest::Approx(v_dot_rate).epsilon(1e-8));
    CHECK(v_dot_rate <= 1e-12);
  }
}

TEST_CASE("doubling lambda leaves the tangential component unchanged") {
  auto sys = integrator(2);
  std::vector<ConstraintSpec> constraints{disc_keepout(Vec::Zero(2), 0.2)};
  SlackModel slack{SlackFamily::Exponential, 2.0, 1e-6, std::nullopt};
  AugmentedState state;
  state.s = (Vec(2) << 0.5, -0.4).finished();
  state.mu = vec1(0.2);  // off-manifold so the contraction term is active
  const auto assembly = assemble(Variant::FirstOrder, sys, constraints, slack, state);

  const Vec action = (Vec(2) << 0.7, -0.3).finished();
  for (double lambda : {1.0, 2.0}) {
    ControllerConfig config;
    config.lambda = lambda;
    const SafeAction with_action = safe_action(assembly, action, config);
    const SafeAction without = safe_action(assembly, Vec::Zero(2), config);
    const Vec tangential = with_action.u_s - without.u_s;
    const Vec expected = assembly.B_u.topRows(2) * action;
    CHECK((tangential - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("switched actions: resampling every step keeps tangency and contraction") {
  auto sys = integrator(2, 1.0);
  std::vector<ConstraintSpec> constraints{disc_keepout(Vec::Zero(2), 0.2)};
  SlackModel slack{SlackFamily::Exponential, 3.0, 1e-6, std::nullopt};
  ControllerConfig config;
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  Vec s = (Vec(2) << 0.6, 0.0).finished();
  const double dt = 0.01;
  for (int t = 0; t < 500; ++t) {
    AugmentedState state;
    state.s = s;
    const Vec action = (Vec(2) << unit(rng), unit(rng)).finished();
    const auto result =
        atacom_step(Variant::FirstOrder, sys, constraints, slack, state, action, config);
    if (!result.action.saturated) {
      Vec executed(4);
      executed << result.action.u_s, result.action.u_mu;
      const Vec psi_hat = drift_clip(result.assembly.psi);
      const Vec residual = psi_hat + config.lambda * result.assembly.c +
                           result.assembly.J_u * executed;
      CHECK(residual.cwiseAbs().maxCoeff() < 1e-8);
    }
    s += dt * result.action.u_s;
    CHECK(constraints[0].eval(s)(0) < 1e-3);  // never leaves the safe set
  }
}
