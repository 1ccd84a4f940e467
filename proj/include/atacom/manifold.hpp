#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "atacom/linalg.hpp"

namespace atacom {

enum class ConstraintKind { Inequality, Equality };

/// A block of constraints on the state: values k(s) <= 0 (or l(s) = 0
/// for the equality kind) together with the analytic Jacobian.
///
/// For the separable variant, `eval`/`jacobian` receive the stacked
/// state [q; z] and the Jacobian spans all of its columns; the assembly
/// splits the controllable and uncontrollable blocks itself.
///
/// `jacobian_dot(s, s_dot)` is the rate of change of the Jacobian along
/// a velocity, (d J/d s) s_dot, and is only required by the
/// second-order variant.
struct ConstraintSpec {
  ConstraintKind kind = ConstraintKind::Inequality;
  int dim_out = 0;
  std::function<Vec(const Vec&)> eval;
  std::function<Mat(const Vec&)> jacobian;
  std::function<Mat(const Vec&, const Vec&)> jacobian_dot;
};

enum class SlackFamily { Linear, Exponential };

/// Slack dynamics mu_dot = alpha(mu) u_mu with a class-K alpha:
///   Linear       alpha(mu) = beta * mu
///   Exponential  alpha(mu) = exp(beta * mu) - 1
/// `tol` is the floor applied when resetting the slack from the
/// constraint values; `mu_cap` optionally clamps the argument of alpha
/// (keeps the exponential family numerically bounded far from the
/// constraint boundary).
struct SlackModel {
  SlackFamily family = SlackFamily::Exponential;
  double beta = 1.0;
  double tol = 1e-6;
  std::optional<double> mu_cap;
};

/// Control-affine dynamics s_dot = f(s) + G(s) u with box control
/// bounds. For the second-order variant, drift/input_matrix receive the
/// stacked [s; s_dot] and return acceleration-level quantities.
struct ControlAffineSystem {
  int dim_state = 0;
  int dim_control = 0;
  std::function<Vec(const Vec&)> drift;
  std::function<Mat(const Vec&)> input_matrix;
  Vec control_lower;  // empty = unbounded
  Vec control_upper;
};

/// State of the augmented system handed to the assembly. `mu` may be
/// left empty when the caller wants the slack reset from the constraint
/// values (the per-step controller path).
struct AugmentedState {
  Vec s;
  std::optional<Vec> z;
  std::optional<Vec> s_dot;
  Vec mu;
};

enum class Variant { FirstOrder, Separable, SecondOrder, EqualityAugmented };

/// Geometry of the constraint manifold at one state: the augmented
/// Jacobian J_u, its pseudoinverse, the drift psi, the residual c and
/// the aligned tangent frame B_u. Control bounds are carried along so
/// the controller can clip without seeing the system again.
struct AugmentedAssembly {
  Mat J_u;       // K_total x (U + K)
  Mat J_u_pinv;  // (U + K) x K_total, shares the SVD with B_u
  Vec psi;       // K_total
  Vec c;         // K_total residual: k + mu rows, then l rows
  Mat B_u;       // (U + K) x (U + K - K_total), orthonormal
  int num_inequality = 0;  // K
  int dim_control = 0;     // U
  Vec control_lower;
  Vec control_upper;

  int action_dim() const { return static_cast<int>(B_u.cols()); }
};

struct AssemblyOptions {
  Mat reference_frame;  // empty = identity-aligned default
  RankPolicy rank_policy{};
  double zeta_gain = 1.0;  // class-K gain of the second-order lift
};

/// Elementwise alpha(mu); the diagonal of A(mu). mu must be >= 0.
Vec slack_alpha(const SlackModel& model, const Vec& mu);

/// Per-step slack reset mu_i = max(-k_i, tol).
Vec slack_reset(const SlackModel& model, const Vec& k_value);

/// Second-order constraint lift k* = zeta_gain * k + J_k s_dot.
Vec second_order_constraint(const Vec& k_value, const Mat& k_jacobian, const Vec& s_dot,
                            double zeta_gain);

/// Residual c: inequality rows k + mu, equality rows l. Zero iff the
/// augmented state sits on the manifold.
Vec constraint_residual(const std::vector<ConstraintSpec>& constraints, const Vec& slack_values,
                        const Vec& state);

/// Stack the inequality-constraint values for a variant (the k fed to
/// the slack reset): plain k for first order / separable, the lifted k*
/// for second order.
Vec effective_inequality_values(Variant variant, const std::vector<ConstraintSpec>& constraints,
                                const AugmentedState& state, double zeta_gain);

/// Build J_u, psi, c and the tangent frame for the given variant.
/// state.mu must be filled (use slack_reset first on the controller
/// path). z_dot is required for the separable variant, possibly zero.
AugmentedAssembly assemble(Variant variant, const ControlAffineSystem& system,
                           const std::vector<ConstraintSpec>& constraints,
                           const SlackModel& slack, const AugmentedState& state,
                           const std::optional<Vec>& z_dot = std::nullopt,
                           const AssemblyOptions& options = {});

}  // namespace atacom
