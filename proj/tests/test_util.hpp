#pragma once

// Shared helpers for the test binaries: seeded random instances and
// tolerance predicates. Everything routes through CounterRng so test data
// is identical across runs and platforms.

#include <cmath>
#include <vector>

#include "otcotrain/geometry.hpp"
#include "otcotrain/ot_solvers.hpp"
#include "otcotrain/rng.hpp"

namespace testutil {

inline otc::Vec vec2(double a, double b) {
  otc::Vec v(2);
  v << a, b;
  return v;
}

inline otc::Vec vec1(double a) {
  otc::Vec v(1);
  v << a;
  return v;
}

inline otc::Matrix random_matrix(int n, int m, otc::CounterRng& rng, double lo = 0.0,
                                 double hi = 1.0) {
  otc::Matrix C(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) C(i, j) = rng.uniform(lo, hi);
  return C;
}

inline otc::Vec random_positive_vec(int n, otc::CounterRng& rng, double lo = 0.1,
                                    double hi = 1.0) {
  otc::Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
  return v;
}

inline otc::Marginals uniform_marginals(int n, int m) {
  otc::Marginals mu;
  mu.p = otc::Vec::Constant(n, 1.0 / n);
  mu.q = otc::Vec::Constant(m, 1.0 / m);
  return mu;
}

// Random probability marginals with equal total mass 1 on both sides.
inline otc::Marginals random_balanced_marginals(int n, int m, otc::CounterRng& rng) {
  otc::Marginals mu;
  mu.p = random_positive_vec(n, rng);
  mu.q = random_positive_vec(m, rng);
  mu.p /= mu.p.sum();
  mu.q /= mu.q.sum();
  return mu;
}

inline double max_abs_diff(const otc::Matrix& a, const otc::Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

inline bool close_rel(double a, double b, double rel, double abs_floor = 0.0) {
  return std::abs(a - b) <= std::max(abs_floor, rel * std::max(std::abs(a), std::abs(b)));
}

}  // namespace testutil
