#pragma once

#include <Eigen/Dense>

#include "atacom/errors.hpp"

namespace atacom {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Shared rank decision for all decompositions: singular values below
/// relative_tolerance * sigma_max are treated as zero.
struct RankPolicy {
  double relative_tolerance = 1e-10;
};

/// Numerical rank of m under the policy.
int numerical_rank(const Mat& m, const RankPolicy& policy = {});

/// Moore-Penrose pseudoinverse via SVD, truncated by the rank policy.
Mat pseudoinverse(const Mat& m, const RankPolicy& policy = {});

/// Orthonormal basis of ker(j) as columns, N x (N - rank).
/// Throws EmptyKernelError when the kernel is trivial.
Mat nullspace_basis(const Mat& j, const RankPolicy& policy = {});

/// Rotate an orthonormal basis so its columns align with the reference
/// frame: solves min_Q ||(B Q)^T T - I||_F over orthogonal Q and returns
/// B Q. The result depends only on span(B) and T, not on which basis of
/// the span was passed in.
Mat procrustes_align(const Mat& basis, const Mat& reference_frame);

/// Smoothly varying kernel basis: raw SVD kernel of j, aligned against
/// the reference frame. Columns of reference_frame must be orthonormal
/// and match the kernel dimension.
Mat smooth_basis(const Mat& j, const Mat& reference_frame, const RankPolicy& policy = {});

/// Reference frame with identity-aligned columns: T[i,i] = 1, zero
/// elsewhere. rows x cols, cols <= rows.
Mat identity_aligned_frame(int rows, int cols);

}  // namespace atacom
