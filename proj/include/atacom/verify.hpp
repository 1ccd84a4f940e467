#pragma once

#include <functional>
#include <string>
#include <vector>

#include "atacom/controller.hpp"

namespace atacom::verify {

/// Per-step diagnostics wired into the harness metrics stream.
struct DiagnosticsReport {
  double V = 0.0;
  double V_dot_analytic = 0.0;
  double V_dot_numeric = 0.0;
  double max_violation = 0.0;
  bool singular = false;
  bool rank_ok = true;
};

/// V = 1/2 c'c.
double lyapunov_value(const Vec& c);

/// Analytic rate -lambda c' (J_u J_u^+) c; never meaningfully positive.
double lyapunov_rate(const Vec& c, const Mat& J_u, double lambda);

/// True iff J_u' c = 0, ||mu|| = 0 and ||c|| != 0 under tol: the states
/// where the contraction term dies while the residual is nonzero.
bool singularity_check(const Mat& J_u, const Vec& c, const Vec& mu, double tol = 1e-9);

/// Max relative disagreement between the analytic Jacobian and central
/// differences with step h: max |analytic - fd| / (1 + |analytic|).
double fd_jacobian_check(const ConstraintSpec& constraint, const Vec& state, double h = 1e-6);

struct Trajectory {
  std::vector<double> t;
  std::vector<Vec> x;
};

/// Classical 4th-order integration of dx/dt = rhs(t, x). The oracle for
/// the discrete control loop; callers pick dt_fine at least 10x finer
/// than the loop they are checking.
Trajectory integrate_reference(const std::function<Vec(double, const Vec&)>& rhs, const Vec& x0,
                               double duration, double dt_fine);

enum class IssResult { Holds, Fails, Inconclusive };

/// Bound check for disturbed runs: requires the gain premise
/// lambda >= eta_J * omega / eta_c (otherwise Inconclusive), then tests
/// sup ||c(t)|| <= eta_c + 0.05 after the transient t >= 5 / lambda.
IssResult iss_bound_check(const std::vector<double>& times, const std::vector<double>& c_norms,
                          double omega, double lambda, double eta_J, double eta_c);

/// Positivity-preserving integration of the slack dynamics
/// mu_dot = alpha(mu) u_mu with a constant virtual control, sampled at
/// dt. Multiplicative (log-space) Euler: exact for the linear family
/// and positive by construction. Returns mu at every step boundary.
std::vector<double> integrate_slack_ode(const SlackModel& model, double mu0, double u_mu,
                                        double duration, double dt);

struct ClosedLoopOptions {
  Variant variant = Variant::FirstOrder;
  ControllerConfig config;
  std::function<Vec(double)> agent_action;  // default: zero
  std::function<Vec(double)> disturbance;   // additive on s_dot, default: zero
};

/// Continuous closed loop on the augmented state x = [s; mu]: the plant
/// driven by the safe controller with the slack treated as a true state
/// (integrated, not reset). Used by the contraction and ISS checks.
std::function<Vec(double, const Vec&)> make_closed_loop(const ControlAffineSystem& system,
                                                        const std::vector<ConstraintSpec>& constraints,
                                                        const SlackModel& slack, int num_slack,
                                                        const ClosedLoopOptions& options);

/// Diagnostics snapshot for one assembled state.
DiagnosticsReport diagnostics(const AugmentedAssembly& assembly, const Vec& mu, double lambda);

// ---------------------------------------------------------------------------
// Property batteries. Tolerances are fixed here; the CLI `verify`
// subcommand and the acceptance suite run the same code.

struct BatteryResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

BatteryResult battery_tangent_basis();
BatteryResult battery_smooth_frame();
BatteryResult battery_pinv_transpose_kernel();
BatteryResult battery_slack_positivity();
BatteryResult battery_contraction();
BatteryResult battery_iss();

std::vector<BatteryResult> run_property_batteries();

}  // namespace atacom::verify
