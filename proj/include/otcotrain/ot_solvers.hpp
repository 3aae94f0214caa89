#pragma once

#include "otcotrain/geometry.hpp"

namespace otc {

struct TransportPlan {
  Matrix plan;           // n x m, entries >= 0
  int iterations = 0;
  double row_residual = 0.0;  // max_i |(plan*1)_i - p_i|
  double col_residual = 0.0;
  double objective = 0.0;
  bool converged = false;
};

struct Marginals {
  Vec p;  // length n, entries >= 0
  Vec q;  // length m
};

enum class Stabilization { kAuto, kOn, kOff };

struct UotConfig {
  double epsilon = 5e-4;
  double tau = 0.01;
  int max_iter = 10000;
  double tol = 1e-9;  // sup-norm change of log-scalings per iteration
  Stabilization stabilization = Stabilization::kAuto;
};

// Entropic OT with hard marginals, Sinkhorn-Knopp scaling. Stops when both
// marginal residuals are <= tol. `objective` is the transport cost <plan, C>.
// Low epsilon relative to the cost scale switches to a stabilized log-domain
// scheme (kAuto threshold: epsilon < 0.01 * max(C)); in kOff mode underflow
// raises SolverError instead.
TransportPlan sinkhorn_balanced(const CostMatrix& C, const Marginals& mu, double epsilon,
                                int max_iter = 10000, double tol = 1e-9,
                                Stabilization stab = Stabilization::kAuto);

// KL-relaxed marginals: minimizes
//   <P,C> + eps*sum P_ij (log P_ij - 1) + tau*KLg(P1|p) + tau*KLg(P^T 1|q)
// with KLg(a|b) = sum a log(a/b) - a + b, via scaling updates with exponent
// tau/(tau+eps). Stops when the sup-norm change of log u, log v is <= tol.
// `objective` is the full regularized value. Requires p, q entrywise > 0.
TransportPlan sinkhorn_unbalanced(const CostMatrix& C, const Marginals& mu, const UotConfig& cfg);

// Evaluates the relaxed objective above at an arbitrary nonnegative plan,
// with the convention 0*log 0 = 0.
double uot_objective(const Matrix& plan, const CostMatrix& C, const Marginals& mu,
                     const UotConfig& cfg);

// Frobenius inner product <plan, C>.
double transport_cost(const Matrix& plan, const CostMatrix& C);

struct ExactOtResult {
  Matrix plan;
  double cost = 0.0;
};

// Brute-force minimizer over permutation couplings (uniform marginals,
// n == m <= 8). Ties resolve to the lexicographically smallest permutation.
ExactOtResult exact_ot_oracle(const CostMatrix& C);

struct ExactUotResult {
  Matrix plan;
  double objective = 0.0;
  bool converged = false;
};

// Direct minimization of the relaxed objective over P = exp(theta) by
// first-order descent, run to gradient sup-norm <= 1e-10. n*m <= 16.
ExactUotResult exact_uot_oracle(const CostMatrix& C, const Marginals& mu, const UotConfig& cfg);

}
