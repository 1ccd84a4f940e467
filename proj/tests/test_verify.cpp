#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "atacom/verify.hpp"

using namespace atacom;
namespace vf = atacom::verify;

namespace {

ControlAffineSystem integrator(int dim) {
  ControlAffineSystem sys;
  sys.dim_state = dim;
  sys.dim_control = dim;
  sys.drift = [dim](const Vec&) { return Vec::Zero(dim); };
  sys.input_matrix = [dim](const Vec&) { return Mat::Identity(dim, dim); };
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

Vec vec1(double v) {
  Vec out(1);
  out << v;
  return out;
}

}  // namespace

TEST_CASE("lyapunov_value") {
  CHECK(vf::lyapunov_value(Vec::Zero(3)) == 0.0);
  Vec c(2);
  c << 0.3, -0.4;
  CHECK(vf::lyapunov_value(c) == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("lyapunov_rate") {
  Vec c(2);
  c << 0.3, -0.4;
  CHECK(vf::lyapunov_rate(Vec::Zero(2), Mat::Identity(2, 4), 1.0) == 0.0);
  // full row rank: J_u J_u^+ is the identity
  Mat j(2, 3);
  j << 1.0, 0.0, 0.5, 0.0, 1.0, -0.2;
  CHECK(vf::lyapunov_rate(c, j, 1.0) == doctest::Approx(-c.squaredNorm()).epsilon(1e-12));
  // rank-deficient with c in the left null space: the rate degenerates to zero
  Mat deficient(2, 2);
  deficient << 1.0, 0.0, 2.0, 0.0;
  Vec left_null(2);
  left_null << 2.0, -1.0;
  CHECK(std::abs(vf::lyapunov_rate(left_null, deficient, 1.0)) < 1e-12);
}

TEST_CASE("singularity_check") {
  // k(s) = -s^2 + 1 with s_dot = u at (s, mu) = (0, 0): J_u = [-2s, alpha(0)] = [0, 0]
  Mat j_u(1, 2);
  j_u << 0.0, 0.0;
  CHECK(vf::singularity_check(j_u, vec1(1.0), vec1(0.0)));
  CHECK_FALSE(vf::singularity_check(j_u, vec1(0.0), vec1(0.0)));   // on-manifold
  CHECK_FALSE(vf::singularity_check(j_u, vec1(1.0), vec1(0.5)));   // interior slack
  Mat regular(1, 2);
  regular << 1.0, 0.0;
  CHECK_FALSE(vf::singularity_check(regular, vec1(1.0), vec1(0.0)));
}

TEST_CASE("fd_jacobian_check: exact, smooth and broken Jacobians") {
  CHECK(vf::fd_jacobian_check(scalar_halfspace(), vec1(0.0)) < 1e-12);
  CHECK(vf::fd_jacobian_check(scalar_halfspace(), vec1(0.3)) < 1e-9);

  ConstraintSpec circle;
  circle.dim_out = 1;
  circle.eval = [](const Vec& s) {
    Vec v(1);
    v(0) = 0.15 - s.norm();
    return v;
  };
  circle.jacobian = [](const Vec& s) {
    Mat j(1, 2);
    j = -s.transpose() / s.norm();
    return j;
  };
  CHECK(vf::fd_jacobian_check(circle, (Vec(2) << 0.4, -0.3).finished()) < 1e-5);

  ConstraintSpec broken;
  broken.dim_out = 1;
  broken.eval = [](const Vec& s) { return Vec(10.0 * s.head(1)); };
  broken.jacobian = [](const Vec& s) {
    Mat j(1, s.size());
    j.setConstant(20.0);  // doubled on purpose
    return j;
  };
  CHECK(vf::fd_jacobian_check(broken, vec1(0.5)) > 0.3);
}

TEST_CASE("integrate_reference: closed-form contraction, constants, convergence") {
  const double lambda = 2.0;
  SlackModel slack{SlackFamily::Linear, 1.0, 1e-6, std::nullopt};
  std::vector<ConstraintSpec> constraints{scalar_halfspace()};
  vf::ClosedLoopOptions options;
  options.config.lambda = lambda;
  options.config.drift_clipping = false;
  const auto rhs = vf::make_closed_loop(integrator(1), constraints, slack, 1, options);

  Vec x0(2);
  x0 << -0.2, 0.5;  // c(0) = 0.3
  const double c0 = 0.3;
  const auto traj = vf::integrate_reference(rhs, x0, 2.0, 1e-3);
  for (size_t i = 0; i < traj.t.size(); ++i) {
    const double c = traj.x[i](0) + traj.x[i](1);
    CHECK(std::abs(c - c0 * std::exp(-lambda * traj.t[i])) < 1e-6);
  }

  // zero dynamics: constant trajectory
  const auto still = vf::integrate_reference([](double, const Vec& x) { return Vec::Zero(x.size()); },
                                             x0, 1.0, 1e-3);
  CHECK((still.x.back() - x0).cwiseAbs().maxCoeff() == 0.0);

  // halving the step barely moves the endpoint
  const auto coarse = vf::integrate_reference(rhs, x0, 1.0, 1e-3);
  const auto fine = vf::integrate_reference(rhs, x0, 1.0, 5e-4);
  CHECK((coarse.x.back() - fine.x.back()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("iss_bound_check: guards and the disturbance-free limit") {
  std::vector<double> t, c;
  for (int i = 0; i <= 1000; ++i) {
    t.push_back(0.01 * i);
    c.push_back(0.3 * std::exp(-2.0 * t.back()));  // plain contraction
  }
  CHECK(vf::iss_bound_check(t, c, 0.0, 2.0, 1.0, 0.05) == vf::IssResult::Holds);
  CHECK(vf::iss_bound_check(t, c, 0.5, 2.0, 1.0, 0.05) == vf::IssResult::Inconclusive);
  std::vector<double> big(t.size(), 1.0);
  CHECK(vf::iss_bound_check(t, big, 0.0, 2.0, 1.0, 0.05) == vf::IssResult::Fails);
}

TEST_CASE("integrate_slack_ode: exact for the linear family, positive when stiff") {
  SlackModel linear{SlackFamily::Linear, 3.0, 1e-6, std::nullopt};
  const auto traj = vf::integrate_slack_ode(linear, 0.5, -1.0, 10.0, 0.01);
  for (size_t n = 0; n < traj.size(); ++n)
    CHECK(traj[n] == doctest::Approx(0.5 * std::exp(-3.0 * 0.01 * n)).epsilon(1e-10));

  SlackModel stiff{SlackFamily::Exponential, 10.0, 1e-6, std::nullopt};
  const auto hard = vf::integrate_slack_ode(stiff, 0.5, -1.0, 10.0, 0.01);
  for (double mu : hard) CHECK(mu > 0.0);
}

TEST_CASE("numeric V rate matches the analytic rate at 100 Hz") {
  SlackModel slack{SlackFamily::Exponential, 1.0, 1e-6, std::nullopt};
  std::vector<ConstraintSpec> constraints{scalar_halfspace()};
  vf::ClosedLoopOptions options;
  options.config.lambda = 2.0;
  options.config.drift_clipping = false;
  const auto rhs = vf::make_closed_loop(integrator(1), constraints, slack, 1, options);

  Vec x(2);
  x << -0.2, 0.45;  // off-manifold
  const double dt = 0.01;
  for (int step = 0; step < 200; ++step) {
    AugmentedState state;
    state.s = x.head(1);
    state.mu = x.tail(1).cwiseMax(0.0);
    const auto assembly = assemble(Variant::FirstOrder, integrator(1), constraints, slack, state);
    const auto report = vf::diagnostics(assembly, state.mu, options.config.lambda);

    const Vec x_next = x + dt * rhs(step * dt, x);  // 100 Hz Euler loop
    const double c_now = x(0) + std::max(x(1), 0.0);
    const double c_next = x_next(0) + std::max(x_next(1), 0.0);
    const double v_now = 0.5 * c_now * c_now;
    const double v_next = 0.5 * c_next * c_next;
    const double v_dot_numeric = (v_next - v_now) / dt;
    const double tol = std::max(1e-6, 0.02 * std::abs(report.V_dot_analytic));
    CHECK(std::abs(v_dot_numeric - report.V_dot_analytic) <= tol + 0.5 * dt *
          options.config.lambda * options.config.lambda * std::abs(c_now) * std::abs(c_now));
    x = x_next;
  }
}

TEST_CASE("discretization gap between the 100 Hz loop and the reference stays small") {
  // Box workspace plus one obstacle, constant action, stiff slack: the
  // trajectory rides the boundary for most of the episode.
  ConstraintSpec keepout;
  keepout.dim_out = 1;
  keepout.eval = [](const Vec& s) {
    Vec v(1);
    v(0) = 0.2 - s.norm();
    return v;
  };
  keepout.jacobian = [](const Vec& s) {
    Mat j(1, 2);
    j = -s.transpose() / s.norm();
    return j;
  };
  std::vector<ConstraintSpec> constraints{keepout};
  for (int axis = 0; axis < 2; ++axis) {
    for (int side = 0; side < 2; ++side) {
      ConstraintSpec bound;
      bound.dim_out = 1;
      const double sign = side == 0 ? -1.0 : 1.0;
      bound.eval = [axis, sign](const Vec& s) {
        Vec v(1);
        v(0) = sign * s(axis) - 1.0;
        return v;
      };
      bound.jacobian = [axis, sign](const Vec&) {
        Mat j = Mat::Zero(1, 2);
        j(0, axis) = sign;
        return j;
      };
      constraints.push_back(bound);
    }
  }
  SlackModel slack{SlackFamily::Exponential, 10.0, 1e-6, std::nullopt};
  vf::ClosedLoopOptions options;
  options.config.lambda = 10.0;
  options.agent_action = [](double) { return (Vec(2) << 0.8, 0.3).finished(); };
  const auto rhs = vf::make_closed_loop(integrator(2), constraints, slack, 5, options);

  auto k_of = [&](const Vec& s) {
    Vec k(5);
    for (int i = 0; i < 5; ++i) k(i) = constraints[i].eval(s)(0);
    return k;
  };
  Vec x0(7);
  x0.head(2) << 0.5, 0.0;
  x0.tail(5) = -k_of(x0.head(2));  // on-manifold start
  const double duration = 10.0, dt = 0.01;
  const auto reference = vf::integrate_reference(rhs, x0, duration, 1e-3);

  Vec x = x0;
  auto c_norm_of = [&](const Vec& state) {
    return (k_of(state.head(2)) + state.tail(5).cwiseMax(0.0)).norm();
  };
  double worst_gap = 0.0;
  const int steps = static_cast<int>(duration / dt);
  for (int n = 0; n <= steps; ++n) {
    const double c_loop = c_norm_of(x);
    const double c_ref = c_norm_of(reference.x[static_cast<size_t>(n * 10)]);
    worst_gap = std::max(worst_gap, std::abs(c_loop - c_ref));
    if (n < steps) x += dt * rhs(n * dt, x);
  }
  CHECK(worst_gap < 1e-3);
}

TEST_CASE("slack positivity battery passes") {
  const auto result = vf::battery_slack_positivity();
  INFO(result.detail);
  CHECK(result.pass);
}
