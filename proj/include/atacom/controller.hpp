#pragma once

#include "atacom/manifold.hpp"

namespace atacom {

/// Tunables of the safe controller. The reference frame is persistent
/// across steps (an empty matrix selects the identity-aligned default
/// for the current variant) so the tangent coordinates keep a fixed
/// meaning along a trajectory.
struct ControllerConfig {
  double lambda = 10.0;
  bool drift_clipping = true;
  RankPolicy rank_policy{};
  Mat reference_frame;
  double zeta_gain = 1.0;

  void validate() const;
};

struct SafeAction {
  Vec u_s;   // applied to the plant
  Vec u_mu;  // applied to the slack dynamics
  bool saturated = false;
  // Residual of psi_hat + lambda c + J_u [u_s; u_mu] for the executed
  // control; ~0 whenever the solve was exact and no clipping occurred.
  double residual = 0.0;
};

struct StepResult {
  SafeAction action;
  AugmentedAssembly assembly;
  Vec mu;
};

/// Keep only the drift components that push toward the constraint
/// boundary: psi_hat_i = max(psi_i, 0).
Vec drift_clip(const Vec& psi);

/// Map an agent action (coordinates in the tangent frame, unit box) to
/// the safe control: drift compensation, contraction and tangential
/// term. u_s is clipped to the control bounds carried by the assembly.
SafeAction safe_action(const AugmentedAssembly& assembly, const Vec& agent_action,
                       const ControllerConfig& config);

/// One controller step: reset the slack from the constraint values,
/// assemble the geometry, and map the agent action. Pure given its
/// inputs; the only persistent piece is the reference frame in config.
StepResult atacom_step(Variant variant, const ControlAffineSystem& system,
                       const std::vector<ConstraintSpec>& constraints, const SlackModel& slack,
                       const AugmentedState& state, const Vec& agent_action,
                       const ControllerConfig& config,
                       const std::optional<Vec>& z_dot = std::nullopt);

}  // namespace atacom
