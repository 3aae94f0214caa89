#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "otcotrain/errors.hpp"
#include "otcotrain/ot_solvers.hpp"
#include "otcotrain/rng.hpp"
#include "test_util.hpp"

using namespace otc;
using testutil::max_abs_diff;
using testutil::random_balanced_marginals;
using testutil::random_matrix;
using testutil::uniform_marginals;

namespace {

Matrix antidiag2() {
  Matrix C(2, 2);
  C << 0, 1, 1, 0;
  return C;
}

}  // namespace

TEST_CASE("balanced: single-point coupling") {
  Matrix C(1, 1);
  C << 0.7;
  const TransportPlan tp = sinkhorn_balanced(C, uniform_marginals(1, 1), 0.3);
  CHECK(tp.converged);
  CHECK(tp.plan(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("balanced: antidiagonal cost concentrates on the diagonal") {
  const TransportPlan tp = sinkhorn_balanced(antidiag2(), uniform_marginals(2, 2), 0.01);
  REQUIRE(tp.converged);
  Matrix want(2, 2);
  want << 0.5, 0, 0, 0.5;
  CHECK(max_abs_diff(tp.plan, want) < 1e-6);
  CHECK(std::abs(tp.objective) < 1e-4);
}

TEST_CASE("balanced: huge epsilon returns the independent coupling") {
  CounterRng rng(21);
  const Matrix C = random_matrix(4, 3, rng);
  const Marginals mu = random_balanced_marginals(4, 3, rng);
  const TransportPlan tp = sinkhorn_balanced(C, mu, 1e6);
  REQUIRE(tp.converged);
  const Matrix indep = mu.p * mu.q.transpose();
  CHECK(max_abs_diff(tp.plan, indep) < 1e-4);
}

TEST_CASE("balanced: converged residuals honor the tolerance") {
  CounterRng rng(22);
  for (int t = 0; t < 5; ++t) {
    const Matrix C = random_matrix(5, 5, rng);
    const Marginals mu = random_balanced_marginals(5, 5, rng);
    const TransportPlan tp = sinkhorn_balanced(C, mu, 0.1, 10000, 1e-9);
    REQUIRE(tp.converged);
    CHECK(tp.row_residual <= 1e-9);
    CHECK(tp.col_residual <= 1e-9);
    CHECK((tp.plan.rowwise().sum() - mu.p).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((tp.plan.colwise().sum().transpose() - mu.q).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("balanced: mass mismatch is rejected") {
  Marginals mu;
  mu.p = Vec::Constant(2, 0.5);
  mu.q = Vec::Constant(2, 1.0);
  CHECK_THROWS_AS(sinkhorn_balanced(antidiag2(), mu, 0.1), std::invalid_argument);
}

TEST_CASE("balanced: constant cost shift keeps the plan, shifts the cost by the mass") {
  CounterRng rng(23);
  const Matrix C = random_matrix(4, 4, rng);
  const Marginals mu = random_balanced_marginals(4, 4, rng);
  const double shift = 2.75;
  const TransportPlan a = sinkhorn_balanced(C, mu, 0.2, 20000, 1e-12);
  const TransportPlan b =
      sinkhorn_balanced(C.array() + shift, mu, 0.2, 20000, 1e-12);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  CHECK(max_abs_diff(a.plan, b.plan) < 1e-8);
  const double mass = a.plan.sum();
  CHECK(b.objective == doctest::Approx(a.objective + shift * mass).epsilon(1e-8));
}

TEST_CASE("balanced: zero-mass rows are carried as zero plan rows") {
  Matrix C(3, 2);
  C << 0, 1, 1, 0, 0.5, 0.5;
  Marginals mu;
  mu.p = Vec(3);
  mu.p << 0.5, 0.5, 0.0;
  mu.q = Vec::Constant(2, 0.5);
  const TransportPlan tp = sinkhorn_balanced(C, mu, 0.1);
  REQUIRE(tp.converged);
  CHECK(tp.plan.row(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((tp.plan.rowwise().sum() - mu.p).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("balanced: log-domain and linear modes agree at moderate epsilon") {
  CounterRng rng(24);
  const Matrix C = random_matrix(5, 4, rng);
  const Marginals mu = random_balanced_marginals(5, 4, rng);
  const TransportPlan lin = sinkhorn_balanced(C, mu, 0.1, 20000, 1e-12, Stabilization::kOff);
  const TransportPlan stab = sinkhorn_balanced(C, mu, 0.1, 20000, 1e-12, Stabilization::kOn);
  REQUIRE(lin.converged);
  REQUIRE(stab.converged);
  CHECK(max_abs_diff(lin.plan, stab.plan) < 1e-9);
}

TEST_CASE("balanced: tiny epsilon without stabilization raises a solver error") {
  // Row 0 of exp(-C/eps) flushes entirely to zero, so the plain scaling
  // divides by 0 and must report the blowup instead of returning garbage.
  Matrix C(2, 2);
  C << 500.0, 500.0, 0.0, 1.0;
  CHECK_THROWS_AS(
      sinkhorn_balanced(C, uniform_marginals(2, 2), 0.01, 10000, 1e-9, Stabilization::kOff),
      SolverError);
}

TEST_CASE("unbalanced: tau=0 yields the closed form exactly") {
  CounterRng rng(25);
  const Matrix C = random_matrix(3, 4, rng);
  UotConfig cfg;
  cfg.epsilon = 0.5;
  cfg.tau = 0.0;
  const TransportPlan tp = sinkhorn_unbalanced(C, uniform_marginals(3, 4), cfg);
  REQUIRE(tp.converged);
  const Matrix closed = (-C / cfg.epsilon).array().exp();
  CHECK(max_abs_diff(tp.plan, closed) < 1e-12);
  CHECK(tp.objective ==
        doctest::Approx(uot_objective(closed, C, uniform_marginals(3, 4), cfg)).epsilon(1e-12));
}

TEST_CASE("unbalanced: huge tau matches the balanced plan") {
  CounterRng rng(26);
  const Matrix C = random_matrix(3, 3, rng);
  const Marginals mu = uniform_marginals(3, 3);
  UotConfig cfg;
  cfg.epsilon = 0.2;
  cfg.tau = 1e6;
  cfg.max_iter = 200000;
  const TransportPlan u = sinkhorn_unbalanced(C, mu, cfg);
  const TransportPlan b = sinkhorn_balanced(C, mu, 0.2);
  REQUIRE(b.converged);
  // The converged flag is not required of u: at extreme tau the scaling map's
  // common-mass mode contracts at 1 - O(eps/tau), so the dual-change stopping
  // rule cannot reach tol in any practical budget even though the plan itself
  // sits at the balanced solution to many more digits than checked here.
  CHECK(max_abs_diff(u.plan, b.plan) < 1e-3);
  CHECK((u.plan.rowwise().sum() - mu.p).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("unbalanced: symmetric instance gives a symmetric plan") {
  CounterRng rng(27);
  Matrix C = random_matrix(4, 4, rng);
  C = ((C + C.transpose()) / 2).eval();
  UotConfig cfg;
  cfg.epsilon = 0.1;
  cfg.tau = 0.05;
  const TransportPlan tp = sinkhorn_unbalanced(C, uniform_marginals(4, 4), cfg);
  REQUIRE(tp.converged);
  CHECK(max_abs_diff(tp.plan, tp.plan.transpose()) < 1e-10);
}

TEST_CASE("unbalanced: input validation") {
  UotConfig cfg;
  cfg.tau = -1.0;
  CHECK_THROWS_AS(sinkhorn_unbalanced(antidiag2(), uniform_marginals(2, 2), cfg),
                  std::invalid_argument);
  cfg.tau = 0.1;
  Marginals mu = uniform_marginals(2, 2);
  mu.p(0) = 0.0;
  CHECK_THROWS_AS(sinkhorn_unbalanced(antidiag2(), mu, cfg), std::invalid_argument);
}

TEST_CASE("unbalanced: plan mass never increases when a cost row is inflated") {
  CounterRng rng(28);
  UotConfig cfg;
  cfg.epsilon = 0.1;
  cfg.tau = 0.3;
  for (int t = 0; t < 10; ++t) {
    const Matrix C = random_matrix(2, 2, rng);
    const Marginals mu = uniform_marginals(2, 2);
    double prev = sinkhorn_unbalanced(C, mu, cfg).plan.sum();
    for (double scale : {1.5, 2.5, 4.0}) {
      Matrix D = C;
      D.row(0) *= scale;
      const double mass = sinkhorn_unbalanced(D, mu, cfg).plan.sum();
      CHECK(mass <= prev + 1e-10);
      prev = mass;
    }
  }
}

TEST_CASE("uot_objective: independent coupling with zero cost leaves only entropy") {
  const Marginals mu = uniform_marginals(2, 2);
  const Matrix pi = mu.p * mu.q.transpose();
  UotConfig cfg;
  cfg.epsilon = 0.3;
  cfg.tau = 0.7;
  const double want =
      cfg.epsilon * (pi.array() * (pi.array().log() - 1)).sum();
  CHECK(uot_objective(pi, Matrix::Zero(2, 2), mu, cfg) ==
        doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("uot_objective: zero plan costs tau times the marginal masses") {
  CounterRng rng(29);
  const Matrix C = random_matrix(3, 2, rng);
  Marginals mu;
  mu.p = testutil::random_positive_vec(3, rng);
  mu.q = testutil::random_positive_vec(2, rng);
  UotConfig cfg;
  cfg.epsilon = 0.4;
  cfg.tau = 0.9;
  CHECK(uot_objective(Matrix::Zero(3, 2), C, mu, cfg) ==
        doctest::Approx(cfg.tau * (mu.p.sum() + mu.q.sum())).epsilon(1e-14));
}

TEST_CASE("uot_objective: tau=0 closed form is a local minimum") {
  CounterRng rng(30);
  const Matrix C = random_matrix(2, 2, rng);
  UotConfig cfg;
  cfg.epsilon = 0.3;
  cfg.tau = 0.0;
  const Marginals mu = uniform_marginals(2, 2);
  const Matrix star = (-C / cfg.epsilon).array().exp();
  const double at_star = uot_objective(star, C, mu, cfg);
  for (int t = 0; t < 50; ++t) {
    const Matrix delta = random_matrix(2, 2, rng, -1.0, 1.0) * 1e-3;
    const Matrix perturbed = (star + delta).cwiseMax(1e-12);
    CHECK(uot_objective(perturbed, C, mu, cfg) >= at_star - 1e-15);
  }
}

TEST_CASE("uot_objective rejects shape mismatch and negative plans") {
  const Marginals mu = uniform_marginals(2, 2);
  UotConfig cfg;
  CHECK_THROWS_AS(uot_objective(Matrix::Zero(3, 2), Matrix::Zero(2, 2), mu, cfg),
                  std::invalid_argument);
  Matrix neg = Matrix::Zero(2, 2);
  neg(0, 0) = -0.1;
  CHECK_THROWS_AS(uot_objective(neg, Matrix::Zero(2, 2), mu, cfg), std::invalid_argument);
}

TEST_CASE("transport_cost hand values") {
  Matrix I2 = Matrix::Identity(2, 2) / 2;
  CHECK(transport_cost(I2, antidiag2()) == 0.0);
  const Matrix indep = Matrix::Constant(2, 2, 0.25);
  CHECK(transport_cost(indep, antidiag2()) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(transport_cost(indep, Matrix::Zero(2, 2)) == 0.0);
}

TEST_CASE("exact oracle on hand instances") {
  const ExactOtResult anti = exact_ot_oracle(antidiag2());
  Matrix diag = Matrix::Identity(2, 2) / 2;
  CHECK(max_abs_diff(anti.plan, diag) == 0.0);
  CHECK(anti.cost == 0.0);

  const ExactOtResult ones = exact_ot_oracle(Matrix::Ones(3, 3));
  CHECK(ones.cost == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(max_abs_diff(ones.plan, Matrix::Identity(3, 3) / 3) == 0.0);  // tie-break

  Matrix C(2, 2);
  C << 1, 2, 2, 1;
  const ExactOtResult r = exact_ot_oracle(C);
  CHECK(max_abs_diff(r.plan, diag) == 0.0);
  CHECK(r.cost == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("exact oracle rejects non-square or oversized instances") {
  CHECK_THROWS_AS(exact_ot_oracle(Matrix::Zero(2, 3)), std::invalid_argument);
  CHECK_THROWS_AS(exact_ot_oracle(Matrix::Zero(9, 9)), std::invalid_argument);
}

TEST_CASE("entropic cost dominates the oracle and the gap shrinks with epsilon") {
  // Near-tied instances can leave marginal residuals above tol at the small
  // end of the schedule no matter the budget, but the objective is accurate
  // to far below the gap scale wherever residuals reach ~1e-6; the checks
  // bound residuals and compare values with matching slack.
  CounterRng rng(31);
  for (int t = 0; t < 5; ++t) {
    const int n = 3 + static_cast<int>(rng.uniform_int(4));
    const Matrix C = random_matrix(n, n, rng);
    const double exact = exact_ot_oracle(C).cost;
    double prev_gap = std::numeric_limits<double>::infinity();
    for (double eps : {1.0, 0.3, 0.1, 0.03, 0.01}) {
      const TransportPlan tp = sinkhorn_balanced(C, uniform_marginals(n, n), eps, 60000);
      CHECK(std::max(tp.row_residual, tp.col_residual) <= 1e-5);
      const double gap = tp.objective - exact;
      CHECK(gap >= -1e-6);
      CHECK(gap <= prev_gap + 1e-5);
      prev_gap = gap;
    }
  }
}

TEST_CASE("exact unbalanced oracle: tau=0 closed form") {
  CounterRng rng(32);
  const Matrix C = random_matrix(3, 3, rng);
  UotConfig cfg;
  cfg.epsilon = 0.4;
  cfg.tau = 0.0;
  const ExactUotResult r = exact_uot_oracle(C, uniform_marginals(3, 3), cfg);
  REQUIRE(r.converged);
  CHECK(max_abs_diff(r.plan, (-C / cfg.epsilon).array().exp()) < 1e-8);
}

TEST_CASE("exact unbalanced oracle agrees with the scaling solver") {
  CounterRng rng(33);
  UotConfig cfg;
  cfg.epsilon = 0.1;
  cfg.tau = 0.05;
  cfg.max_iter = 200000;
  for (int t = 0; t < 10; ++t) {
    const Matrix C = random_matrix(2, 2, rng);
    const Marginals mu = random_balanced_marginals(2, 2, rng);
    const ExactUotResult oracle = exact_uot_oracle(C, mu, cfg);
    const TransportPlan tp = sinkhorn_unbalanced(C, mu, cfg);
    REQUIRE(oracle.converged);
    REQUIRE(tp.converged);
    CHECK(std::abs(oracle.objective - tp.objective) < 1e-6);
  }
}

TEST_CASE("exact unbalanced oracle: symmetric instance, symmetric plan") {
  CounterRng rng(34);
  Matrix C = random_matrix(3, 3, rng);
  C = ((C + C.transpose()) / 2).eval();
  UotConfig cfg;
  cfg.epsilon = 0.2;
  cfg.tau = 0.1;
  const ExactUotResult r = exact_uot_oracle(C, uniform_marginals(3, 3), cfg);
  REQUIRE(r.converged);
  CHECK(max_abs_diff(r.plan, r.plan.transpose()) < 1e-8);
}

TEST_CASE("envelope gradient: finite differences of the solve value match the plan") {
  CounterRng rng(35);
  const Matrix C = random_matrix(3, 3, rng, 0.05, 1.0);
  const Marginals mu = uniform_marginals(3, 3);
  UotConfig cfg;
  cfg.epsilon = 0.05;
  cfg.tau = 0.05;
  cfg.tol = 1e-12;
  cfg.max_iter = 200000;
  const TransportPlan base = sinkhorn_unbalanced(C, mu, cfg);
  REQUIRE(base.converged);
  const double h = 1e-5;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Matrix up = C, dn = C;
      up(i, j) += h;
      dn(i, j) -= h;
      const double fd = (sinkhorn_unbalanced(up, mu, cfg).objective -
                         sinkhorn_unbalanced(dn, mu, cfg).objective) /
                        (2 * h);
      CHECK(std::abs(fd - base.plan(i, j)) <= 1e-4);
    }
}

TEST_CASE("unbalanced solver reports non-convergence instead of throwing") {
  CounterRng rng(36);
  const Matrix C = random_matrix(6, 6, rng);
  UotConfig cfg;
  cfg.epsilon = 5e-4;
  cfg.tau = 0.01;
  cfg.max_iter = 1;
  cfg.tol = 1e-15;
  const TransportPlan tp = sinkhorn_unbalanced(C, uniform_marginals(6, 6), cfg);
  CHECK_FALSE(tp.converged);
  CHECK(tp.iterations == 1);
}
