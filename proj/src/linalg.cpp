#include "atacom/linalg.hpp"

#include <string>

namespace atacom {

namespace {

void require_finite(const Mat& m, const char* what) {
  if (m.size() == 0) throw InvalidInputError(std::string(what) + ": empty matrix");
  if (!m.allFinite()) throw InvalidInputError(std::string(what) + ": non-finite entries");
}

void require_policy(const RankPolicy& policy) {
  if (!(policy.relative_tolerance > 0.0 && policy.relative_tolerance < 1.0))
    throw InvalidInputError("RankPolicy.relative_tolerance must be in (0, 1)");
}

int rank_from_singular_values(const Vec& sigma, const RankPolicy& policy) {
  if (sigma.size() == 0) return 0;
  const double cutoff = policy.relative_tolerance * sigma(0);
  int r = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma(i) > cutoff) ++r;
  return r;
}

}  // namespace

int numerical_rank(const Mat& m, const RankPolicy& policy) {
  require_finite(m, "numerical_rank");
  require_policy(policy);
  Eigen::JacobiSVD<Mat> svd(m);
  return rank_from_singular_values(svd.singularValues(), policy);
}

Mat pseudoinverse(const Mat& m, const RankPolicy& policy) {
  require_finite(m, "pseudoinverse");
  require_policy(policy);
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& sigma = svd.singularValues();
  const int r = rank_from_singular_values(sigma, policy);
  Vec inv = Vec::Zero(sigma.size());
  for (int i = 0; i < r; ++i) inv(i) = 1.0 / sigma(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Mat nullspace_basis(const Mat& j, const RankPolicy& policy) {
  require_finite(j, "nullspace_basis");
  require_policy(policy);
  Eigen::JacobiSVD<Mat> svd(j, Eigen::ComputeFullV);
  const int r = rank_from_singular_values(svd.singularValues(), policy);
  const Eigen::Index n = j.cols();
  if (n - r == 0)
    throw EmptyKernelError(
        "nullspace_basis: Jacobian kernel is empty; as many independent "
        "constraint rows as state dimensions, the controller cannot act");
  return svd.matrixV().rightCols(n - r);
}

Mat procrustes_align(const Mat& basis, const Mat& reference_frame) {
  require_finite(basis, "procrustes_align basis");
  require_finite(reference_frame, "procrustes_align reference frame");
  if (basis.rows() != reference_frame.rows() || basis.cols() != reference_frame.cols())
    throw FrameMismatchError("procrustes_align: reference frame is " +
                             std::to_string(reference_frame.rows()) + "x" +
                             std::to_string(reference_frame.cols()) + ", basis is " +
                             std::to_string(basis.rows()) + "x" + std::to_string(basis.cols()));
  const Mat overlap = basis.transpose() * reference_frame;
  Eigen::JacobiSVD<Mat> svd(overlap, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat q = svd.matrixU() * svd.matrixV().transpose();
  return basis * q;
}

Mat smooth_basis(const Mat& j, const Mat& reference_frame, const RankPolicy& policy) {
  const Mat raw = nullspace_basis(j, policy);
  if (raw.cols() != reference_frame.cols())
    throw FrameMismatchError("smooth_basis: kernel dimension " + std::to_string(raw.cols()) +
                             " does not match reference frame with " +
                             std::to_string(reference_frame.cols()) + " columns");
  return procrustes_align(raw, reference_frame);
}

Mat identity_aligned_frame(int rows, int cols) {
  if (rows < 1 || cols < 1 || cols > rows)
    throw InvalidInputError("identity_aligned_frame: need 1 <= cols <= rows");
  return Mat::Identity(rows, cols);
}

}  // namespace atacom
