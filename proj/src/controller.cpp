#include "atacom/controller.hpp"

#include <cmath>

namespace atacom {

void ControllerConfig::validate() const {
  if (!(lambda > 0.0)) throw InvalidInputError("ControllerConfig.lambda must be > 0");
  if (!(zeta_gain > 0.0)) throw InvalidInputError("ControllerConfig.zeta_gain must be > 0");
  if (reference_frame.size() > 0) {
    const Mat gram = reference_frame.transpose() * reference_frame;
    if ((gram - Mat::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() > 1e-9)
      throw InvalidInputError("ControllerConfig.reference_frame columns must be orthonormal");
  }
}

Vec drift_clip(const Vec& psi) { return psi.cwiseMax(0.0); }

SafeAction safe_action(const AugmentedAssembly& assembly, const Vec& agent_action,
                       const ControllerConfig& config) {
  config.validate();
  if (!agent_action.allFinite()) throw InvalidInputError("safe_action: non-finite agent action");
  if (agent_action.size() != assembly.B_u.cols())
    throw InvalidInputError("safe_action: agent action has dimension " +
                            std::to_string(agent_action.size()) + ", tangent frame has " +
                            std::to_string(assembly.B_u.cols()));
  if (agent_action.cwiseAbs().maxCoeff() > 1.0 + 1e-9)
    throw InvalidInputError("safe_action: agent action outside the unit box");

  const Vec psi_hat = config.drift_clipping ? drift_clip(assembly.psi) : assembly.psi;
  const Vec rhs = psi_hat + config.lambda * assembly.c;
  const Mat& pinv = assembly.J_u_pinv;
  const Vec solved = -pinv * rhs + assembly.B_u * agent_action;

  const int U = assembly.dim_control;
  SafeAction out;
  out.u_s = solved.head(U);
  out.u_mu = solved.tail(solved.size() - U);

  // Least-norm fallback leaves a residual when J_u lost row rank.
  const double solve_gap = (rhs + assembly.J_u * solved).cwiseAbs().maxCoeff();
  bool clipped = false;
  if (assembly.control_lower.size() == U && assembly.control_upper.size() == U) {
    for (int i = 0; i < U; ++i) {
      if (out.u_s(i) < assembly.control_lower(i)) {
        out.u_s(i) = assembly.control_lower(i);
        clipped = true;
      } else if (out.u_s(i) > assembly.control_upper(i)) {
        out.u_s(i) = assembly.control_upper(i);
        clipped = true;
      }
    }
  }
  out.saturated = clipped || solve_gap > 1e-9 * std::max(1.0, rhs.cwiseAbs().maxCoeff());

  Vec executed(solved.size());
  executed << out.u_s, out.u_mu;
  out.residual = (rhs + assembly.J_u * executed).cwiseAbs().maxCoeff();
  return out;
}

StepResult atacom_step(Variant variant, const ControlAffineSystem& system,
                       const std::vector<ConstraintSpec>& constraints, const SlackModel& slack,
                       const AugmentedState& state, const Vec& agent_action,
                       const ControllerConfig& config, const std::optional<Vec>& z_dot) {
  config.validate();
  const Vec k_eff = effective_inequality_values(variant, constraints, state, config.zeta_gain);

  AugmentedState working = state;
  working.mu = slack_reset(slack, k_eff);

  AssemblyOptions options;
  options.reference_frame = config.reference_frame;
  options.rank_policy = config.rank_policy;
  options.zeta_gain = config.zeta_gain;

  StepResult out;
  out.assembly = assemble(variant, system, constraints, slack, working, z_dot, options);
  out.action = safe_action(out.assembly, agent_action, config);
  out.mu = working.mu;
  return out;
}

}  // namespace atacom
