#include "atacom/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace atacom::verify {

double lyapunov_value(const Vec& c) { return 0.5 * c.squaredNorm(); }

double lyapunov_rate(const Vec& c, const Mat& J_u, double lambda) {
  const Mat proj = J_u * pseudoinverse(J_u);
  const Mat sym = 0.5 * (proj + proj.transpose());
  return -lambda * c.dot(sym * c);
}

bool singularity_check(const Mat& J_u, const Vec& c, const Vec& mu, double tol) {
  const double c_norm = c.norm();
  if (c_norm <= tol) return false;
  if (mu.size() > 0 && mu.norm() > tol) return false;
  return (J_u.transpose() * c).cwiseAbs().maxCoeff() <= tol * std::max(1.0, c_norm);
}

double fd_jacobian_check(const ConstraintSpec& constraint, const Vec& state, double h) {
  if (!(h > 0.0)) throw InvalidInputError("fd_jacobian_check: h must be > 0");
  const Mat analytic = constraint.jacobian(state);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < state.size(); ++j) {
    Vec hi = state, lo = state;
    hi(j) += h;
    lo(j) -= h;
    const Vec fd = (constraint.eval(hi) - constraint.eval(lo)) / (2.0 * h);
    for (Eigen::Index i = 0; i < fd.size(); ++i) {
      const double a = analytic(i, j);
      worst = std::max(worst, std::abs(a - fd(i)) / (1.0 + std::abs(a)));
    }
  }
  return worst;
}

Trajectory integrate_reference(const std::function<Vec(double, const Vec&)>& rhs, const Vec& x0,
                               double duration, double dt_fine) {
  if (!(dt_fine > 0.0)) throw InvalidInputError("integrate_reference: dt_fine must be > 0");
  const int steps = static_cast<int>(std::llround(duration / dt_fine));
  Trajectory traj;
  traj.t.reserve(steps + 1);
  traj.x.reserve(steps + 1);
  Vec x = x0;
  double t = 0.0;
  traj.t.push_back(t);
  traj.x.push_back(x);
  for (int n = 0; n < steps; ++n) {
    const Vec k1 = rhs(t, x);
    const Vec k2 = rhs(t + 0.5 * dt_fine, x + 0.5 * dt_fine * k1);
    const Vec k3 = rhs(t + 0.5 * dt_fine, x + 0.5 * dt_fine * k2);
    const Vec k4 = rhs(t + dt_fine, x + dt_fine * k3);
    x += dt_fine / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t = (n + 1) * dt_fine;
    if (!x.allFinite()) throw EnvFault("integrate_reference: non-finite dynamics");
    traj.t.push_back(t);
    traj.x.push_back(x);
  }
  return traj;
}

IssResult iss_bound_check(const std::vector<double>& times, const std::vector<double>& c_norms,
                          double omega, double lambda, double eta_J, double eta_c) {
  if (times.size() != c_norms.size() || times.empty())
    throw InvalidInputError("iss_bound_check: malformed trajectory");
  if (lambda < eta_J * omega / eta_c - 1e-12) return IssResult::Inconclusive;
  const double transient = 5.0 / lambda;
  double sup = -1.0;
  for (size_t i = 0; i < times.size(); ++i)
    if (times[i] >= transient) sup = std::max(sup, c_norms[i]);
  if (sup < 0.0) return IssResult::Inconclusive;  // nothing after the transient
  return sup <= eta_c + 0.05 ? IssResult::Holds : IssResult::Fails;
}

std::vector<double> integrate_slack_ode(const SlackModel& model, double mu0, double u_mu,
                                        double duration, double dt) {
  if (!(mu0 > 0.0)) throw InvalidInputError("integrate_slack_ode: mu0 must be > 0");
  const int steps = static_cast<int>(std::llround(duration / dt));
  std::vector<double> out;
  out.reserve(steps + 1);
  double mu = mu0;
  out.push_back(mu);
  Vec one(1);
  for (int n = 0; n < steps; ++n) {
    one(0) = mu;
    const double rate = slack_alpha(model, one)(0) / mu;  // per-unit rate, bounded by Lipschitz
    mu *= std::exp(dt * rate * u_mu);
    out.push_back(mu);
  }
  return out;
}

std::function<Vec(double, const Vec&)> make_closed_loop(const ControlAffineSystem& system,
                                                        const std::vector<ConstraintSpec>& constraints,
                                                        const SlackModel& slack, int num_slack,
                                                        const ClosedLoopOptions& options) {
  options.config.validate();
  AssemblyOptions asm_options;
  asm_options.reference_frame = options.config.reference_frame;
  asm_options.rank_policy = options.config.rank_policy;
  asm_options.zeta_gain = options.config.zeta_gain;
  return [=](double t, const Vec& x) -> Vec {
    AugmentedState state;
    state.s = x.head(x.size() - num_slack);
    state.mu = x.tail(num_slack).cwiseMax(0.0);
    const AugmentedAssembly assembly =
        assemble(options.variant, system, constraints, slack, state, std::nullopt, asm_options);
    const Vec action =
        options.agent_action ? options.agent_action(t) : Vec::Zero(assembly.action_dim());
    const SafeAction act = safe_action(assembly, action, options.config);
    Vec s_dot = system.drift(state.s) + system.input_matrix(state.s) * act.u_s;
    if (options.disturbance) s_dot += options.disturbance(t);
    const Vec mu_dot = slack_alpha(slack, state.mu).cwiseProduct(act.u_mu);
    Vec dx(x.size());
    dx << s_dot, mu_dot;
    return dx;
  };
}

DiagnosticsReport diagnostics(const AugmentedAssembly& assembly, const Vec& mu, double lambda) {
  DiagnosticsReport report;
  report.V = lyapunov_value(assembly.c);
  const Mat proj = assembly.J_u * assembly.J_u_pinv;
  report.V_dot_analytic = -lambda * assembly.c.dot(0.5 * (proj + proj.transpose()) * assembly.c);
  report.V_dot_numeric = report.V_dot_analytic;  // caller overwrites with the trajectory value
  const int K = assembly.num_inequality;
  report.max_violation = K > 0 ? (assembly.c.head(K) - mu).maxCoeff() : 0.0;
  report.singular = singularity_check(assembly.J_u, assembly.c, mu);
  report.rank_ok = std::abs(proj.trace() - static_cast<double>(assembly.J_u.rows())) < 0.5;
  return report;
}

// ---------------------------------------------------------------------------
// Batteries

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

Mat random_orthogonal(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = gauss(rng);
  return Eigen::HouseholderQR<Mat>(g).householderQ();
}

ControlAffineSystem unbounded_integrator(int dim) {
  ControlAffineSystem sys;
  sys.dim_state = dim;
  sys.dim_control = dim;
  sys.drift = [dim](const Vec&) { return Vec::Zero(dim); };
  sys.input_matrix = [dim](const Vec&) { return Mat::Identity(dim, dim); };
  return sys;
}

ConstraintSpec halfspace_constraint() {
  ConstraintSpec spec;
  spec.kind = ConstraintKind::Inequality;
  spec.dim_out = 1;
  spec.eval = [](const Vec& s) { return s.head(1); };
  spec.jacobian = [](const Vec& s) {
    Mat j = Mat::Zero(1, s.size());
    j(0, 0) = 1.0;
    return j;
  };
  return spec;
}

ConstraintSpec keepout_disc(const Vec& center, double radius) {
  ConstraintSpec spec;
  spec.kind = ConstraintKind::Inequality;
  spec.dim_out = 1;
  spec.eval = [=](const Vec& s) {
    Vec v(1);
    v(0) = radius - (s - center).norm();
    return v;
  };
  spec.jacobian = [=](const Vec& s) {
    const Vec d = s - center;
    Mat j(1, s.size());
    j.row(0) = -d.transpose() / d.norm();
    return j;
  };
  return spec;
}

struct RolloutNorms {
  std::vector<double> t;
  std::vector<double> c_norm;
};

// Discrete 100 Hz loop with the slack integrated as a state.
RolloutNorms discrete_loop(const std::function<Vec(double, const Vec&)>& rhs,
                           const std::function<double(const Vec&)>& c_norm_of, const Vec& x0,
                           double duration, double dt) {
  RolloutNorms out;
  Vec x = x0;
  const int steps = static_cast<int>(std::llround(duration / dt));
  for (int n = 0; n <= steps; ++n) {
    out.t.push_back(n * dt);
    out.c_norm.push_back(c_norm_of(x));
    if (n < steps) x += dt * rhs(n * dt, x);
  }
  return out;
}

}  // namespace

BatteryResult battery_tangent_basis() {
  BatteryResult result{"tangent-basis closed forms", true, ""};
  Mat j(1, 2);
  j << 1.0, 1.0;
  const Mat b = nullspace_basis(j);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  double worst = std::abs(std::abs(b(0, 0)) - inv_sqrt2);
  worst = std::max(worst, std::abs(b(0, 0) + b(1, 0)));
  if (worst > 1e-12) result.pass = false;

  std::mt19937_64 rng(20240817);
  std::uniform_real_distribution<double> alpha_dist(1e-2, 50.0);
  double worst_cf = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double alpha = alpha_dist(rng);
    Mat ja(1, 2);
    ja << 1.0, alpha;
    const Mat ba = nullspace_basis(ja);
    const double n = std::sqrt(1.0 + alpha * alpha);
    Vec closed(2);
    closed << -alpha / n, 1.0 / n;
    const double err = std::min((ba.col(0) - closed).norm(), (ba.col(0) + closed).norm());
    worst_cf = std::max(worst_cf, err);
  }
  if (worst_cf > 1e-10) result.pass = false;
  result.detail = "max deviation " + format_double(std::max(worst, worst_cf));
  return result;
}

BatteryResult battery_smooth_frame() {
  BatteryResult result{"smooth tangent frame continuity", true, ""};
  const int steps = 10000;
  const double dtheta = 2.0 * M_PI / steps;

  // Connected constraint 1 - s1^2 - s2^2 <= 0: sweep a circle of safe
  // states; the aligned frame must change no faster than 10x the step.
  const double radius = 1.2;
  const double mu_circle = radius * radius - 1.0;
  const double alpha_circle = std::exp(mu_circle) - 1.0;
  const Mat t_frame = identity_aligned_frame(3, 2);
  double max_smooth = 0.0;
  Mat prev;
  for (int i = 0; i <= steps; ++i) {
    const double theta = dtheta * i;
    Mat j(1, 3);
    j << -2.0 * radius * std::cos(theta), -2.0 * radius * std::sin(theta), alpha_circle;
    const Mat frame = smooth_basis(j, t_frame);
    if (i > 0) max_smooth = std::max(max_smooth, (frame - prev).norm());
    prev = frame;
  }
  if (max_smooth > 10.0 * dtheta) result.pass = false;

  // Disconnected constraint cos(4 s1) + s2^2 - 0.8 <= 0: the raw kernel
  // basis must show at least one O(1) jump along the same sweep.
  SlackModel slack;
  slack.family = SlackFamily::Exponential;
  slack.beta = 1.0;
  double max_raw = 0.0;
  Mat prev_raw;
  for (int i = 0; i <= steps; ++i) {
    const double s1 = dtheta * i;
    const double k = std::cos(4.0 * s1) - 0.8;
    Vec kv(1);
    kv << k;
    const double mu = slack_reset(slack, kv)(0);
    const double alpha = std::exp(mu) - 1.0;
    Mat j(1, 3);
    j << -4.0 * std::sin(4.0 * s1), 0.0, alpha;
    const Mat raw = nullspace_basis(j);
    if (i > 0) max_raw = std::max(max_raw, (raw - prev_raw).norm());
    prev_raw = raw;
  }
  if (max_raw < 1.0) result.pass = false;
  result.detail = "max aligned step " + format_double(max_smooth) + " (budget " +
                  format_double(10.0 * dtheta) + "), max raw jump " + format_double(max_raw);
  return result;
}

BatteryResult battery_pinv_transpose_kernel() {
  BatteryResult result{"pseudoinverse/transpose kernel property", true, ""};
  std::mt19937_64 rng(424242);
  std::uniform_int_distribution<int> ncols(1, 8);
  std::uniform_real_distribution<double> mag(0.1, 3.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  int counterexamples = 0, hits = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = ncols(rng);
    std::uniform_int_distribution<int> mrows(1, n);
    const int m = mrows(rng);
    std::uniform_int_distribution<int> rank_dist(0, m);
    const int rank = rank_dist(rng);
    const Mat u = random_orthogonal(m, rng);
    const Mat v = random_orthogonal(n, rng);
    Mat sigma = Mat::Zero(m, n);
    for (int i = 0; i < rank; ++i) sigma(i, i) = mag(rng);
    const Mat x_mat = u * sigma * v.transpose();
    const Mat pinv = pseudoinverse(x_mat);

    Vec x(m);
    if (trial % 2 == 0 && rank < m) {
      Vec coeff(m - rank);
      for (int i = 0; i < m - rank; ++i) coeff(i) = gauss(rng);
      if (coeff.norm() < 1e-12) coeff(0) = 1.0;
      x = u.rightCols(m - rank) * coeff;
    } else {
      for (int i = 0; i < m; ++i) x(i) = gauss(rng);
    }
    const double quad = std::abs(x.dot(x_mat * (pinv * x)));
    if (quad <= 1e-12 * x.squaredNorm()) {
      ++hits;
      if ((x_mat.transpose() * x).norm() > 1e-8 * x_mat.norm() * x.norm()) ++counterexamples;
    }
  }
  result.pass = counterexamples == 0 && hits > 0;
  result.detail = std::to_string(hits) + " premise hits, " + std::to_string(counterexamples) +
                  " counterexamples";
  return result;
}

BatteryResult battery_slack_positivity() {
  BatteryResult result{"slack dynamics positivity lower bound", true, ""};
  const double mu0 = 0.5, u_minus = -1.0, duration = 10.0, dt = 0.01;
  double worst_margin = 1e300;
  for (SlackFamily family : {SlackFamily::Linear, SlackFamily::Exponential}) {
    for (double beta : {0.3, 1.0, 3.0, 10.0}) {
      SlackModel model;
      model.family = family;
      model.beta = beta;
      // Lipschitz constant of alpha on the traversed range (0, mu0].
      const double lipschitz =
          family == SlackFamily::Linear ? beta : beta * std::exp(beta * mu0);
      const auto traj = integrate_slack_ode(model, mu0, u_minus, duration, dt);
      for (size_t n = 0; n < traj.size(); ++n) {
        const double lower = mu0 * std::exp(lipschitz * u_minus * (n * dt)) - 1e-6;
        worst_margin = std::min(worst_margin, traj[n] - lower);
        if (traj[n] <= 0.0 || traj[n] < lower) result.pass = false;
      }
    }
  }
  result.detail = "worst margin above the bound " + format_double(worst_margin);
  return result;
}

BatteryResult battery_contraction() {
  BatteryResult result{"contraction to the manifold", true, ""};
  const double lambda = 2.0, duration = 5.0 / lambda, dt_fine = 1e-3, dt_loop = 0.01;
  ControllerConfig config;
  config.lambda = lambda;
  config.drift_clipping = false;

  std::mt19937_64 rng(90210);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int failures = 0;
  double worst_ratio = 0.0;

  for (int trial = 0; trial < 100; ++trial) {
    const bool planar = trial >= 50;
    ControlAffineSystem sys = unbounded_integrator(planar ? 2 : 1);
    std::vector<ConstraintSpec> constraints;
    Vec s0;
    if (planar) {
      constraints.push_back(keepout_disc(Vec::Zero(2), 0.15));
      const double angle = 2.0 * M_PI * unit(rng);
      const double dist = 0.05 + 0.95 * unit(rng);
      s0 = Vec(2);
      s0 << dist * std::cos(angle), dist * std::sin(angle);
    } else {
      constraints.push_back(halfspace_constraint());
      s0 = Vec(1);
      s0 << -1.0 + 2.0 * unit(rng);
    }
    SlackModel slack;
    slack.beta = 1.0;

    // Off-manifold start with 0.01 <= ||c(0)|| <= 0.5, away from the singular set.
    const Vec k0 = constraints[0].eval(s0);
    double mu0 = 0.0, c0 = 0.0;
    for (int attempt = 0; attempt < 200; ++attempt) {
      mu0 = 0.01 + 0.6 * unit(rng);
      c0 = k0(0) + mu0;
      if (std::abs(c0) >= 0.01 && std::abs(c0) <= 0.5) break;
    }
    if (std::abs(c0) < 0.01 || std::abs(c0) > 0.5) continue;

    ClosedLoopOptions options;
    options.config = config;
    const auto rhs = make_closed_loop(sys, constraints, slack, 1, options);
    auto c_norm_of = [&](const Vec& x) {
      const Vec k = constraints[0].eval(x.head(x.size() - 1));
      return std::abs(k(0) + std::max(x(x.size() - 1), 0.0));
    };

    Vec x0(s0.size() + 1);
    x0 << s0, mu0;
    const Trajectory traj = integrate_reference(rhs, x0, duration, dt_fine);
    for (size_t i = 0; i < traj.t.size(); ++i) {
      const double bound = std::abs(c0) * std::exp(-0.9 * lambda * traj.t[i]);
      const double value = c_norm_of(traj.x[i]);
      worst_ratio = std::max(worst_ratio, value / bound);
      if (value > bound * (1.0 + 1e-9) + 1e-12) {
        ++failures;
        break;
      }
    }

    // V non-increasing per step at 100 Hz.
    const RolloutNorms loop = discrete_loop(rhs, c_norm_of, x0, duration, dt_loop);
    for (size_t i = 1; i < loop.c_norm.size(); ++i) {
      const double v_prev = 0.5 * loop.c_norm[i - 1] * loop.c_norm[i - 1];
      const double v_next = 0.5 * loop.c_norm[i] * loop.c_norm[i];
      if (v_next > v_prev + 1e-8) {
        ++failures;
        break;
      }
    }
  }
  result.pass = failures == 0;
  result.detail = std::to_string(failures) + " failing starts, worst ||c||/bound ratio " +
                  format_double(worst_ratio);
  return result;
}

BatteryResult battery_iss() {
  BatteryResult result{"bounded violation under disturbance", true, ""};
  const double eta_J = 1.0, eta_c = 0.05, duration = 10.0, dt = 0.01;
  int failures = 0, runs = 0;
  for (double omega : {0.05, 0.1}) {
    const double lambda = eta_J * omega / eta_c;
    ControllerConfig config;
    config.lambda = lambda;
    config.drift_clipping = false;
    for (int dim : {1, 2}) {
      for (int seed = 0; seed < 50; ++seed) {
        std::mt19937_64 rng(1000 * dim + seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        ControlAffineSystem sys = unbounded_integrator(dim);
        std::vector<ConstraintSpec> constraints;
        Vec s0(dim);
        if (dim == 1) {
          constraints.push_back(halfspace_constraint());
          s0 << -0.3;
        } else {
          constraints.push_back(keepout_disc(Vec::Zero(2), 0.15));
          const double angle = 2.0 * M_PI * unit(rng);
          s0 << 0.45 * std::cos(angle), 0.45 * std::sin(angle);
        }
        SlackModel slack;
        slack.beta = 1.0;
        const double mu0 = -constraints[0].eval(s0)(0);  // on-manifold start

        // Constant worst-case disturbance of norm omega, random direction.
        Vec eps(dim);
        if (dim == 1) {
          eps << (unit(rng) < 0.5 ? omega : -omega);
        } else {
          const double a = 2.0 * M_PI * unit(rng);
          eps << omega * std::cos(a), omega * std::sin(a);
        }
        ClosedLoopOptions options;
        options.config = config;
        options.disturbance = [eps](double) { return eps; };
        const auto rhs = make_closed_loop(sys, constraints, slack, 1, options);

        // 100 Hz loop; eta_J is the largest constraint-Jacobian norm
        // observed along the run, per the diagnostics convention.
        Vec x(dim + 1);
        x << s0, mu0;
        std::vector<double> times, c_norms;
        double eta_J_run = 0.0;
        const int steps = static_cast<int>(std::llround(duration / dt));
        for (int n = 0; n <= steps; ++n) {
          const Vec k = constraints[0].eval(x.head(dim));
          times.push_back(n * dt);
          c_norms.push_back(std::abs(k(0) + std::max(x(dim), 0.0)));
          eta_J_run = std::max(eta_J_run, constraints[0].jacobian(x.head(dim)).norm());
          if (n < steps) x += dt * rhs(n * dt, x);
        }
        ++runs;
        if (iss_bound_check(times, c_norms, omega, lambda, std::max(eta_J, eta_J_run), eta_c) !=
            IssResult::Holds)
          ++failures;
      }
    }
  }
  result.pass = failures == 0;
  result.detail = std::to_string(runs - failures) + "/" + std::to_string(runs) + " runs hold";
  return result;
}

std::vector<BatteryResult> run_property_batteries() {
  return {battery_tangent_basis(),   battery_smooth_frame(), battery_pinv_transpose_kernel(),
          battery_slack_positivity(), battery_contraction(),  battery_iss()};
}

}  // namespace atacom::verify
