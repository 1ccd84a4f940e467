#include "atacom/manifold.hpp"

#include <cmath>
#include <string>

namespace atacom {

namespace {

double alpha_scalar(const SlackModel& model, double mu) {
  if (mu < 0.0) throw InvalidInputError("slack_alpha: negative slack value");
  if (model.mu_cap && mu > *model.mu_cap) mu = *model.mu_cap;
  switch (model.family) {
    case SlackFamily::Linear:
      return model.beta * mu;
    case SlackFamily::Exponential:
      return std::expm1(model.beta * mu);
  }
  throw InvalidInputError("slack_alpha: unknown family");
}

void require_model(const SlackModel& model) {
  if (!(model.beta > 0.0)) throw InvalidInputError("SlackModel.beta must be > 0");
  if (!(model.tol > 0.0)) throw InvalidInputError("SlackModel.tol must be > 0");
}

struct StackedConstraints {
  Vec k;      // inequality values (variant-lifted if second order)
  Mat J_k;    // inequality Jacobian rows
  Vec l;      // equality values
  Mat J_l;    // equality Jacobian rows
  Mat Jdot_k; // (d J_k / ds) s_dot, second order only
};

StackedConstraints stack_constraints(Variant variant, const std::vector<ConstraintSpec>& constraints,
                                     const Vec& eval_state, const AugmentedState& state,
                                     double zeta_gain) {
  StackedConstraints out;
  std::vector<Vec> k_blocks, l_blocks;
  std::vector<Mat> jk_blocks, jl_blocks, jdot_blocks;
  int k_rows = 0, l_rows = 0;
  for (const auto& spec : constraints) {
    if (!spec.eval || !spec.jacobian)
      throw IncompleteProblemError("ConstraintSpec needs eval and jacobian");
    Vec value = spec.eval(eval_state);
    Mat jac = spec.jacobian(eval_state);
    if (value.size() != spec.dim_out || jac.rows() != spec.dim_out)
      throw InvalidInputError("ConstraintSpec output dimension mismatch");
    if (spec.kind == ConstraintKind::Equality) {
      if (variant == Variant::SecondOrder)
        throw IncompleteProblemError("equality constraints are not supported in the second-order variant");
      l_blocks.push_back(std::move(value));
      jl_blocks.push_back(std::move(jac));
      l_rows += spec.dim_out;
      continue;
    }
    if (variant == Variant::SecondOrder) {
      if (!state.s_dot)
        throw IncompleteProblemError("second-order variant needs the state velocity");
      if (!spec.jacobian_dot)
        throw IncompleteProblemError("second-order variant needs ConstraintSpec.jacobian_dot");
      Mat jdot = spec.jacobian_dot(eval_state, *state.s_dot);
      value = second_order_constraint(value, jac, *state.s_dot, zeta_gain);
      jdot_blocks.push_back(std::move(jdot));
    }
    k_blocks.push_back(std::move(value));
    jk_blocks.push_back(std::move(jac));
    k_rows += spec.dim_out;
  }
  const Eigen::Index cols = eval_state.size();
  out.k = Vec(k_rows);
  out.J_k = Mat(k_rows, cols);
  out.l = Vec(l_rows);
  out.J_l = Mat(l_rows, cols);
  int row = 0;
  for (size_t i = 0; i < k_blocks.size(); ++i) {
    out.k.segment(row, k_blocks[i].size()) = k_blocks[i];
    out.J_k.middleRows(row, jk_blocks[i].rows()) = jk_blocks[i];
    row += static_cast<int>(k_blocks[i].size());
  }
  row = 0;
  for (size_t i = 0; i < l_blocks.size(); ++i) {
    out.l.segment(row, l_blocks[i].size()) = l_blocks[i];
    out.J_l.middleRows(row, jl_blocks[i].rows()) = jl_blocks[i];
    row += static_cast<int>(l_blocks[i].size());
  }
  if (!jdot_blocks.empty()) {
    out.Jdot_k = Mat(k_rows, cols);
    row = 0;
    for (const auto& block : jdot_blocks) {
      out.Jdot_k.middleRows(row, block.rows()) = block;
      row += static_cast<int>(block.rows());
    }
  }
  return out;
}

}  // namespace

Vec slack_alpha(const SlackModel& model, const Vec& mu) {
  require_model(model);
  Vec out(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) out(i) = alpha_scalar(model, mu(i));
  return out;
}

Vec slack_reset(const SlackModel& model, const Vec& k_value) {
  require_model(model);
  return (-k_value.array()).max(model.tol).matrix();
}

Vec second_order_constraint(const Vec& k_value, const Mat& k_jacobian, const Vec& s_dot,
                            double zeta_gain) {
  if (!(zeta_gain > 0.0))
    throw InvalidInputError("second_order_constraint: zeta_gain must be > 0");
  if (k_jacobian.rows() != k_value.size() || k_jacobian.cols() != s_dot.size())
    throw InvalidInputError("second_order_constraint: dimension mismatch");
  return zeta_gain * k_value + k_jacobian * s_dot;
}

Vec constraint_residual(const std::vector<ConstraintSpec>& constraints, const Vec& slack_values,
                        const Vec& state) {
  Vec k_rows, l_rows;
  std::vector<Vec> ks, ls;
  int nk = 0, nl = 0;
  for (const auto& spec : constraints) {
    Vec value = spec.eval(state);
    if (spec.kind == ConstraintKind::Inequality) {
      nk += static_cast<int>(value.size());
      ks.push_back(std::move(value));
    } else {
      nl += static_cast<int>(value.size());
      ls.push_back(std::move(value));
    }
  }
  if (slack_values.size() != nk)
    throw InvalidInputError("constraint_residual: slack size does not match inequality rows");
  Vec out(nk + nl);
  int row = 0;
  for (const auto& v : ks) {
    out.segment(row, v.size()) = v;
    row += static_cast<int>(v.size());
  }
  out.head(nk) += slack_values;
  for (const auto& v : ls) {
    out.segment(row, v.size()) = v;
    row += static_cast<int>(v.size());
  }
  return out;
}

Vec effective_inequality_values(Variant variant, const std::vector<ConstraintSpec>& constraints,
                                const AugmentedState& state, double zeta_gain) {
  Vec eval_state = state.s;
  if (variant == Variant::Separable) {
    if (!state.z) throw IncompleteProblemError("separable variant needs the uncontrollable state z");
    eval_state = Vec(state.s.size() + state.z->size());
    eval_state << state.s, *state.z;
  }
  const StackedConstraints stacked =
      stack_constraints(variant, constraints, eval_state, state, zeta_gain);
  return stacked.k;
}

AugmentedAssembly assemble(Variant variant, const ControlAffineSystem& system,
                           const std::vector<ConstraintSpec>& constraints, const SlackModel& slack,
                           const AugmentedState& state, const std::optional<Vec>& z_dot,
                           const AssemblyOptions& options) {
  require_model(slack);
  if (!system.drift || !system.input_matrix)
    throw IncompleteProblemError("ControlAffineSystem needs drift and input_matrix");
  if (!state.s.allFinite()) throw InvalidInputError("assemble: non-finite state");

  // Constraints see the full (stacked) state; the dynamics see the
  // controllable block, or [s; s_dot] in the second-order variant.
  Vec eval_state = state.s;
  if (variant == Variant::Separable) {
    if (!state.z) throw IncompleteProblemError("separable variant needs the uncontrollable state z");
    if (!z_dot) throw IncompleteProblemError("separable variant needs z_dot (possibly zero)");
    eval_state = Vec(state.s.size() + state.z->size());
    eval_state << state.s, *state.z;
  }
  Vec dyn_state = state.s;
  if (variant == Variant::SecondOrder) {
    if (!state.s_dot) throw IncompleteProblemError("second-order variant needs the state velocity");
    dyn_state = Vec(state.s.size() + state.s_dot->size());
    dyn_state << state.s, *state.s_dot;
  }

  const StackedConstraints stacked =
      stack_constraints(variant, constraints, eval_state, state, options.zeta_gain);
  if (!stacked.k.allFinite() || !stacked.J_k.allFinite() || !stacked.l.allFinite() ||
      !stacked.J_l.allFinite() || !stacked.Jdot_k.allFinite())
    throw InvalidInputError("assemble: constraint evaluation produced non-finite values");
  const int K = static_cast<int>(stacked.k.size());
  const int L = static_cast<int>(stacked.l.size());
  const int U = system.dim_control;
  const int K_total = K + L;
  if (K_total == 0) throw IncompleteProblemError("assemble: no constraints given");
  if (state.mu.size() != K)
    throw InvalidInputError("assemble: slack vector does not match inequality rows");
  if ((state.mu.array() < 0.0).any()) throw InvalidInputError("assemble: negative slack");

  const Vec f = system.drift(dyn_state);
  const Mat G = system.input_matrix(dyn_state);
  if (G.cols() != U) throw InvalidInputError("assemble: input matrix has wrong control dimension");

  const int Q = static_cast<int>(state.s.size());
  Mat J_k_ctrl = stacked.J_k;  // inequality Jacobian w.r.t. the controllable block
  Mat J_l_ctrl = stacked.J_l;
  Vec psi_k = Vec::Zero(K);
  Vec psi_l = Vec::Zero(L);

  switch (variant) {
    case Variant::FirstOrder:
    case Variant::EqualityAugmented: {
      psi_k = stacked.J_k * f;
      if (L > 0) psi_l = stacked.J_l * f;
      break;
    }
    case Variant::Separable: {
      J_k_ctrl = stacked.J_k.leftCols(Q);
      const Mat J_z = stacked.J_k.rightCols(stacked.J_k.cols() - Q);
      if (z_dot->size() != J_z.cols())
        throw InvalidInputError("assemble: z_dot dimension mismatch");
      psi_k = J_k_ctrl * f + J_z * (*z_dot);
      if (L > 0) {
        J_l_ctrl = stacked.J_l.leftCols(Q);
        const Mat J_lz = stacked.J_l.rightCols(stacked.J_l.cols() - Q);
        psi_l = J_l_ctrl * f + J_lz * (*z_dot);
      }
      break;
    }
    case Variant::SecondOrder: {
      // psi = J_k f + (zeta' J_k + dJ_k/dt) s_dot with linear zeta.
      psi_k = stacked.J_k * f +
              (options.zeta_gain * stacked.J_k + stacked.Jdot_k) * (*state.s_dot);
      break;
    }
  }

  const Vec alpha = slack_alpha(slack, state.mu);
  Mat J_u = Mat::Zero(K_total, U + K);
  J_u.topLeftCorner(K, U) = J_k_ctrl * G;
  J_u.topRightCorner(K, K) = alpha.asDiagonal();
  if (L > 0) J_u.bottomLeftCorner(L, U) = J_l_ctrl * G;

  Eigen::JacobiSVD<Mat> svd(J_u, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec& sigma = svd.singularValues();
  const double cutoff =
      sigma.size() > 0 ? options.rank_policy.relative_tolerance * sigma(0) : 0.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma(i) > cutoff) ++rank;
  if (rank < K_total)
    throw RankDeficiencyError(
        "assemble: augmented Jacobian is row rank deficient (" + std::to_string(rank) + " < " +
        std::to_string(K_total) +
        "); more constraints active than the control input can satisfy");

  AugmentedAssembly out;
  out.J_u = J_u;
  Mat sigma_inv = Mat::Zero(U + K, K_total);
  for (int i = 0; i < rank; ++i) sigma_inv(i, i) = 1.0 / sigma(i);
  out.J_u_pinv = svd.matrixV() * sigma_inv * svd.matrixU().transpose();

  const Mat raw_basis = svd.matrixV().rightCols(U + K - K_total);
  if (raw_basis.cols() == 0)
    throw EmptyKernelError("assemble: tangent space is empty, no action dimension left");
  Mat frame = options.reference_frame;
  if (frame.size() == 0) frame = identity_aligned_frame(U + K, U + K - K_total);
  if (frame.rows() != U + K || frame.cols() != raw_basis.cols())
    throw FrameMismatchError("assemble: reference frame does not match the tangent dimension");
  out.B_u = procrustes_align(raw_basis, frame);

  out.psi = Vec(K_total);
  out.psi.head(K) = psi_k;
  if (L > 0) out.psi.tail(L) = psi_l;
  out.c = Vec(K_total);
  out.c.head(K) = stacked.k + state.mu;
  if (L > 0) out.c.tail(L) = stacked.l;
  out.num_inequality = K;
  out.dim_control = U;
  out.control_lower = system.control_lower;
  out.control_upper = system.control_upper;
  return out;
}

}  // namespace atacom
