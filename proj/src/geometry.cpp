#include "otcotrain/geometry.hpp"

#include <stdexcept>

namespace otc {

double sq_euclid(const Vec& u, const Vec& v) {
  if (u.size() != v.size())
    throw std::invalid_argument("sq_euclid: dimension mismatch");
  return (u - v).squaredNorm();
}

namespace {

void check_uniform_dims(const std::vector<Vec>& xs, const char* what) {
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i].size() != xs[0].size())
      throw std::invalid_argument(std::string("joint_cost_matrix: ragged dims in ") + what);
}

}  // namespace

CostMatrix joint_cost_matrix(const std::vector<Vec>& Z_src, const std::vector<Vec>& X_src,
                             const std::vector<Vec>& Z_tgt, const std::vector<Vec>& X_tgt,
                             double alpha1, double alpha2) {
  if (Z_src.size() != X_src.size() || Z_tgt.size() != X_tgt.size())
    throw std::invalid_argument("joint_cost_matrix: latent/proprio list length mismatch");
  if (Z_src.empty() || Z_tgt.empty())
    throw std::invalid_argument("joint_cost_matrix: empty side");
  if (alpha1 < 0 || alpha2 < 0)
    throw std::invalid_argument("joint_cost_matrix: negative weight");
  check_uniform_dims(Z_src, "Z_src");
  check_uniform_dims(Z_tgt, "Z_tgt");
  check_uniform_dims(X_src, "X_src");
  check_uniform_dims(X_tgt, "X_tgt");
  if (Z_src[0].size() != Z_tgt[0].size() || X_src[0].size() != X_tgt[0].size())
    throw std::invalid_argument("joint_cost_matrix: src/tgt dimension mismatch");

  const Eigen::Index n = static_cast<Eigen::Index>(Z_src.size());
  const Eigen::Index m = static_cast<Eigen::Index>(Z_tgt.size());
  CostMatrix C(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      C(i, j) = alpha1 * (Z_src[i] - Z_tgt[j]).squaredNorm() +
                alpha2 * (X_src[i] - X_tgt[j]).squaredNorm();
  return C;
}

CostMatrix joint_cost_matrix_cols(const Matrix& Z_src, const Matrix& X_src,
                                  const Matrix& Z_tgt, const Matrix& X_tgt,
                                  double alpha1, double alpha2) {
  if (Z_src.cols() != X_src.cols() || Z_tgt.cols() != X_tgt.cols())
    throw std::invalid_argument("joint_cost_matrix: latent/proprio batch size mismatch");
  if (Z_src.rows() != Z_tgt.rows() || X_src.rows() != X_tgt.rows())
    throw std::invalid_argument("joint_cost_matrix: src/tgt dimension mismatch");
  if (alpha1 < 0 || alpha2 < 0)
    throw std::invalid_argument("joint_cost_matrix: negative weight");

  // ||a-b||^2 expanded as ||a||^2 + ||b||^2 - 2 a.b keeps this one GEMM per block.
  auto pairwise_sq = [](const Matrix& A, const Matrix& B) -> Matrix {
    Vec a2 = A.colwise().squaredNorm();
    Vec b2 = B.colwise().squaredNorm();
    Matrix D = (-2.0 * (A.transpose() * B));
    D.colwise() += a2;
    D.rowwise() += b2.transpose();
    return D.cwiseMax(0.0);
  };
  return alpha1 * pairwise_sq(Z_src, Z_tgt) + alpha2 * pairwise_sq(X_src, X_tgt);
}

}
