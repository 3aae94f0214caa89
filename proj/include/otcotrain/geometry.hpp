#pragma once

#include <Eigen/Dense>
#include <vector>

namespace otc {

using Vec = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Dense nonnegative ground-cost matrix; rows index source samples, columns
// target samples.
using CostMatrix = Eigen::MatrixXd;

// Squared Euclidean distance. Dimensions must agree.
double sq_euclid(const Vec& u, const Vec& v);

// Joint ground cost: entry (i,j) = alpha1*||Z_src[i]-Z_tgt[j]||^2
//                               + alpha2*||X_src[i]-X_tgt[j]||^2.
// Z and X lists must be index-aligned per side; alpha1, alpha2 >= 0.
CostMatrix joint_cost_matrix(const std::vector<Vec>& Z_src, const std::vector<Vec>& X_src,
                             const std::vector<Vec>& Z_tgt, const std::vector<Vec>& X_tgt,
                             double alpha1 = 1.0, double alpha2 = 1.0);

// Column-major batch variant: Z matrices are d_z x n, X matrices d_x x n.
// Used on the training hot path where per-sample Vec lists would churn.
CostMatrix joint_cost_matrix_cols(const Matrix& Z_src, const Matrix& X_src,
                                  const Matrix& Z_tgt, const Matrix& X_tgt,
                                  double alpha1 = 1.0, double alpha2 = 1.0);

}
