#include "otcotrain/ot_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "otcotrain/errors.hpp"

namespace otc {

namespace {

// Absorb relative log-scalings into the kernel only once they could push a
// product of two scalings toward the overflow edge (exp(2*250) << DBL_MAX).
// Rebuilding the kernel costs a full matrix of exps, so absorbing rarely is
// what keeps the stabilized path fast.
constexpr double kAbsorbThreshold = 250.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_cost(const CostMatrix& C) {
  if (C.rows() < 1 || C.cols() < 1)
    throw std::invalid_argument("cost matrix must be non-empty");
  if (!C.allFinite())
    throw std::invalid_argument("cost matrix entries must be finite");
}

void check_marginal_shapes(const CostMatrix& C, const Marginals& mu) {
  if (mu.p.size() != C.rows() || mu.q.size() != C.cols())
    throw std::invalid_argument("marginal lengths do not match cost matrix");
  if (!mu.p.allFinite() || !mu.q.allFinite())
    throw std::invalid_argument("marginals must be finite");
}

// Sup-norm of log-scale change; coordinates pinned at the same infinity
// (zero-marginal rows) count as unchanged.
double log_change(const Vec& a, const Vec& b) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) continue;
    d = std::max(d, std::abs(a[i] - b[i]));
  }
  return d;
}

struct ScalingResult {
  Matrix plan;
  int iterations = 0;
  bool converged = false;
};

// Plain-domain scaling. kappa = 1 recovers balanced Sinkhorn; the update is
// u <- (p / Kv)^kappa, v <- (q / K^T u)^kappa. residual_stop selects the
// balanced stopping rule (marginal residuals), otherwise the iteration stops
// on the sup-norm change of log u, log v.
ScalingResult scale_linear(const CostMatrix& C, const Vec& p, const Vec& q, double eps,
                           double kappa, int max_iter, double tol, bool residual_stop) {
  const Eigen::Index n = C.rows(), m = C.cols();
  // Vectorized exp clamps its argument instead of overflowing or flushing to
  // zero, which would silently turn an out-of-range kernel into garbage;
  // reject exponents past the representable range outright.
  const Matrix expo = -C / eps;
  if (expo.minCoeff() < -700.0)
    throw SolverError(
        "epsilon too small for cost scale: kernel exp(-C/eps) underflows (enable log-domain "
        "stabilization)");
  if (expo.maxCoeff() > 700.0)
    throw SolverError("epsilon too small for cost scale: kernel exp(-C/eps) overflows");
  Matrix K = expo.array().exp();

  Vec u = Vec::Ones(n), v = Vec::Ones(m);
  Vec Kv = K * v, KTu(m), u_new(n), v_new(m);
  ScalingResult out;
  for (int it = 1; it <= max_iter; ++it) {
    out.iterations = it;
    if (kappa == 1.0)
      u_new = p.cwiseQuotient(Kv);
    else if (kappa == 0.0)
      u_new.setOnes();
    else
      u_new = (p.array() / Kv.array()).pow(kappa);
    if (!u_new.allFinite())
      throw SolverError("epsilon too small for cost scale: scaling underflow (enable log-domain stabilization)");
    KTu.noalias() = K.transpose() * u_new;
    if (kappa == 1.0)
      v_new = q.cwiseQuotient(KTu);
    else if (kappa == 0.0)
      v_new.setOnes();
    else
      v_new = (q.array() / KTu.array()).pow(kappa);
    if (!v_new.allFinite())
      throw SolverError("epsilon too small for cost scale: scaling underflow (enable log-domain stabilization)");
    Kv.noalias() = K * v_new;

    if (residual_stop) {
      const double row_res = (u_new.cwiseProduct(Kv) - p).cwiseAbs().maxCoeff();
      const double col_res = (v_new.cwiseProduct(KTu) - q).cwiseAbs().maxCoeff();
      out.converged = row_res <= tol && col_res <= tol;
    } else {
      const double du = log_change(u_new.array().log().matrix(), u.array().log().matrix());
      const double dv = log_change(v_new.array().log().matrix(), v.array().log().matrix());
      out.converged = std::max(du, dv) <= tol;
    }
    u = u_new;
    v = v_new;
    if (out.converged) break;
  }
  out.plan = u.asDiagonal() * K * v.asDiagonal();
  // Keep subnormals out of downstream products; entries this small are
  // invisible next to any marginal mass.
  out.plan = (out.plan.array() < 1e-280).select(0.0, out.plan);
  return out;
}

// Stabilized scaling: total log-scalings split as logU = fa + lu with the
// absorbed part fa folded into the kernel Kt = exp(-C/eps + fa (+) ga).
// Relative parts lu, lv stay O(kAbsorbThreshold), so matvecs run in plain
// arithmetic; rows that still underflow fall back to an exact log-sum-exp.
//
// Balanced solves (kappa == 1) anneal epsilon: stages halve from a loose
// start down to the target, each warm-starting from the previous duals.
// Plain Sinkhorn stalls at small epsilon (near-tied supports contract at a
// rate approaching 1); annealing keeps the duals near-optimal per stage
// without changing the fixed point of the final one. Unbalanced iterations
// contract geometrically at kappa < 1 and run single-stage.
ScalingResult scale_log(const CostMatrix& C, const Vec& p, const Vec& q, double eps,
                        double kappa, int max_iter, double tol, bool residual_stop) {
  const Eigen::Index n = C.rows(), m = C.cols();

  std::vector<double> schedule;
  if (kappa == 1.0)
    for (double e = 0.25 * C.cwiseAbs().maxCoeff(); e > 1.5 * eps; e *= 0.5)
      schedule.push_back(e);
  schedule.push_back(eps);

  double cur_eps = schedule.front();
  Matrix E = -C / cur_eps;
  Vec fa = Vec::Zero(n), ga = Vec::Zero(m);
  Vec lu = Vec::Zero(n), lv = Vec::Zero(m);
  Vec logp = p.array().log().matrix(), logq = q.array().log().matrix();

  Matrix Kt;
  Vec up = Vec::Ones(n), vp = Vec::Ones(m);  // exp(lu), exp(lv)
  Vec Kv(n), KTu(m);
  Vec lu_new(n), lv_new(m), logU = fa + lu, logV = ga + lv, logU_prev(n), logV_prev(m);

  auto rebuild_kernel = [&]() {
    Kt = (E.colwise() + fa).rowwise() + ga.transpose();
    Kt = Kt.array().exp();
    if (!Kt.allFinite()) throw SolverError("scaling overflow in stabilized kernel");
    // Flush near-underflow entries to exact zero: subnormal operands stall
    // the matvecs by two orders of magnitude, and anything this far below
    // the row mass is invisible to the accumulation roundoff anyway. Rows
    // or columns that become all zero take the exact log-sum-exp fallback.
    Kt = (Kt.array() < 1e-280).select(0.0, Kt);
  };
  rebuild_kernel();
  Kv.noalias() = Kt * vp;

  // log((Kt*x)_i) with exact fallback when the plain product underflows.
  auto log_matvec_row = [&](Eigen::Index i, double plain, const Vec& lx) -> double {
    if (plain > 0.0 && std::isfinite(plain)) return std::log(plain);
    double mx = -kInf;
    for (Eigen::Index j = 0; j < m; ++j)
      mx = std::max(mx, E(i, j) + fa[i] + ga[j] + lx[j]);
    if (!std::isfinite(mx)) return -kInf;
    double s = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) s += std::exp(E(i, j) + fa[i] + ga[j] + lx[j] - mx);
    return mx + std::log(s);
  };
  auto log_matvec_col = [&](Eigen::Index j, double plain, const Vec& lx) -> double {
    if (plain > 0.0 && std::isfinite(plain)) return std::log(plain);
    double mx = -kInf;
    for (Eigen::Index i = 0; i < n; ++i)
      mx = std::max(mx, E(i, j) + fa[i] + ga[j] + lx[i]);
    if (!std::isfinite(mx)) return -kInf;
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += std::exp(E(i, j) + fa[i] + ga[j] + lx[i] - mx);
    return mx + std::log(s);
  };

  auto absorb_needed = [](const Vec& l) {
    double mx = 0.0;
    for (Eigen::Index i = 0; i < l.size(); ++i) {
      if (std::isnan(l[i]) || l[i] == kInf)
        throw SolverError("scaling diverged (non-finite log update)");
      if (std::isfinite(l[i])) mx = std::max(mx, std::abs(l[i]));
    }
    return mx > kAbsorbThreshold;
  };

  ScalingResult out;
  int used = 0;
  for (std::size_t stage = 0; stage < schedule.size() && used < max_iter; ++stage) {
    if (stage > 0) {
      // Warm start: duals f = eps * logU stay continuous across the switch.
      const double ratio = cur_eps / schedule[stage];
      cur_eps = schedule[stage];
      fa = (fa + lu) * ratio;
      ga = (ga + lv) * ratio;
      lu.setZero();
      lv.setZero();
      up.setOnes();
      vp.setOnes();
      E = -C / cur_eps;
      rebuild_kernel();
      Kv.noalias() = Kt * vp;
      logU = fa;
      logV = ga;
    }
    const bool last = stage + 1 == schedule.size();

    bool kt_stale_for_KTu = false;
    while (used < max_iter) {
      out.iterations = ++used;
      logU_prev = logU;
      logV_prev = logV;

      if (kappa == 0.0) {
        lu_new.setZero();
      } else {
        for (Eigen::Index i = 0; i < n; ++i) {
          const double lkv = log_matvec_row(i, Kv[i], lv);
          lu_new[i] = kappa * logp[i] + (kappa - 1.0) * fa[i] - kappa * lkv;
        }
      }
      if (absorb_needed(lu_new)) {
        fa += lu_new;
        lu.setZero();
        up.setOnes();
        rebuild_kernel();
      } else {
        lu = lu_new;
        up = lu.array().exp();
      }
      logU = fa + lu;

      KTu.noalias() = Kt.transpose() * up;
      kt_stale_for_KTu = false;
      if (kappa == 0.0) {
        lv_new.setZero();
      } else {
        for (Eigen::Index j = 0; j < m; ++j) {
          const double lktu = log_matvec_col(j, KTu[j], lu);
          lv_new[j] = kappa * logq[j] + (kappa - 1.0) * ga[j] - kappa * lktu;
        }
      }
      if (absorb_needed(lv_new)) {
        ga += lv_new;
        lv.setZero();
        vp.setOnes();
        rebuild_kernel();
        kt_stale_for_KTu = true;
      } else {
        lv = lv_new;
        vp = lv.array().exp();
      }
      logV = ga + lv;

      Kv.noalias() = Kt * vp;

      const double change = std::max(log_change(logU, logU_prev), log_change(logV, logV_prev));
      if (!last) {
        // Intermediate stages only position the duals; a loose criterion is
        // enough and failing it just hands the budget to the next stage.
        if (change <= 1e-2) break;
        continue;
      }
      if (residual_stop) {
        if (kt_stale_for_KTu) KTu.noalias() = Kt.transpose() * up;
        const double row_res = (up.cwiseProduct(Kv) - p).cwiseAbs().maxCoeff();
        const double col_res = (vp.cwiseProduct(KTu) - q).cwiseAbs().maxCoeff();
        out.converged = row_res <= tol && col_res <= tol;
      } else {
        out.converged = change <= tol;
      }
      if (out.converged) break;
    }
  }

  // Express the plan at the target epsilon even when the budget ran out mid
  // schedule: rescale the duals, which is the identity once annealing has
  // reached the final stage. If the rescale overflows (exhaustion far from
  // the target), return the current-stage iterate instead; converged stays
  // false either way.
  const double rescale = cur_eps / eps;
  out.plan.resize(n, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      out.plan(i, j) = std::exp(-C(i, j) / eps + rescale * (logU[i] + logV[j]));
  if (!out.plan.allFinite())
    for (Eigen::Index j = 0; j < m; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        out.plan(i, j) = std::exp(E(i, j) + logU[i] + logV[j]);
  // Same flush as the kernel: keeps subnormals out of downstream products.
  out.plan = (out.plan.array() < 1e-280).select(0.0, out.plan);
  return out;
}

ScalingResult scale_dispatch(const CostMatrix& C, const Vec& p, const Vec& q, double eps,
                             double kappa, int max_iter, double tol, bool residual_stop,
                             Stabilization stab) {
  bool log_domain;
  switch (stab) {
    case Stabilization::kOn: log_domain = true; break;
    case Stabilization::kOff: log_domain = false; break;
    default:
      // Stabilization is mandatory below 0.01*max(C), where exp(-C/eps)
      // underflows. Balanced solves switch earlier: the log path anneals
      // epsilon, which the plain path cannot do safely, and small-epsilon
      // balanced convergence is impractical without it.
      log_domain = eps < (kappa == 1.0 ? 0.25 : 0.01) * C.cwiseAbs().maxCoeff();
      break;
  }
  return log_domain ? scale_log(C, p, q, eps, kappa, max_iter, tol, residual_stop)
                    : scale_linear(C, p, q, eps, kappa, max_iter, tol, residual_stop);
}

void fill_residuals(TransportPlan& tp, const Marginals& mu) {
  tp.row_residual = (tp.plan.rowwise().sum() - mu.p).cwiseAbs().maxCoeff();
  tp.col_residual = (tp.plan.colwise().sum().transpose() - mu.q).cwiseAbs().maxCoeff();
}

double generalized_kl(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] > 0.0)
      s += a[i] * std::log(a[i] / b[i]) - a[i] + b[i];
    else
      s += b[i];
  }
  return s;
}

}  // namespace

TransportPlan sinkhorn_balanced(const CostMatrix& C, const Marginals& mu, double epsilon,
                                int max_iter, double tol, Stabilization stab) {
  check_cost(C);
  check_marginal_shapes(C, mu);
  if (epsilon <= 0) throw std::invalid_argument("epsilon must be > 0");
  if (tol <= 0) throw std::invalid_argument("tol must be > 0");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  if (mu.p.minCoeff() < 0 || mu.q.minCoeff() < 0)
    throw std::invalid_argument("marginals must be nonnegative");
  if (std::abs(mu.p.sum() - mu.q.sum()) > 1e-12)
    throw std::invalid_argument("balanced solve requires equal marginal masses");

  TransportPlan tp;
  if (mu.p.sum() == 0.0) {  // degenerate: the only feasible coupling is empty
    tp.plan = Matrix::Zero(C.rows(), C.cols());
    tp.converged = true;
    return tp;
  }

  // Zero-marginal rows/cols carry no mass in any feasible plan; strip them so
  // the scaling stays strictly positive.
  std::vector<Eigen::Index> ri, ci;
  for (Eigen::Index i = 0; i < C.rows(); ++i)
    if (mu.p[i] > 0) ri.push_back(i);
  for (Eigen::Index j = 0; j < C.cols(); ++j)
    if (mu.q[j] > 0) ci.push_back(j);

  CostMatrix Cs(ri.size(), ci.size());
  Vec ps(ri.size()), qs(ci.size());
  for (std::size_t a = 0; a < ri.size(); ++a) {
    ps[a] = mu.p[ri[a]];
    for (std::size_t b = 0; b < ci.size(); ++b) Cs(a, b) = C(ri[a], ci[b]);
  }
  for (std::size_t b = 0; b < ci.size(); ++b) qs[b] = mu.q[ci[b]];

  ScalingResult r = scale_dispatch(Cs, ps, qs, epsilon, 1.0, max_iter, tol, true, stab);
  tp.plan = Matrix::Zero(C.rows(), C.cols());
  for (std::size_t a = 0; a < ri.size(); ++a)
    for (std::size_t b = 0; b < ci.size(); ++b) tp.plan(ri[a], ci[b]) = r.plan(a, b);
  tp.iterations = r.iterations;
  tp.converged = r.converged;
  fill_residuals(tp, mu);
  tp.objective = transport_cost(tp.plan, C);
  return tp;
}

TransportPlan sinkhorn_unbalanced(const CostMatrix& C, const Marginals& mu, const UotConfig& cfg) {
  check_cost(C);
  check_marginal_shapes(C, mu);
  if (cfg.epsilon <= 0) throw std::invalid_argument("epsilon must be > 0");
  if (cfg.tau < 0) throw std::invalid_argument("tau must be >= 0");
  if (cfg.tol <= 0) throw std::invalid_argument("tol must be > 0");
  if (cfg.max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  if (mu.p.minCoeff() <= 0 || mu.q.minCoeff() <= 0)
    throw std::invalid_argument("unbalanced solve requires strictly positive marginals");

  const double kappa = cfg.tau / (cfg.tau + cfg.epsilon);
  ScalingResult r = scale_dispatch(C, mu.p, mu.q, cfg.epsilon, kappa, cfg.max_iter, cfg.tol,
                                   false, cfg.stabilization);
  TransportPlan tp;
  tp.plan = std::move(r.plan);
  tp.iterations = r.iterations;
  tp.converged = r.converged;
  fill_residuals(tp, mu);
  tp.objective = uot_objective(tp.plan, C, mu, cfg);
  return tp;
}

double uot_objective(const Matrix& plan, const CostMatrix& C, const Marginals& mu,
                     const UotConfig& cfg) {
  if (plan.rows() != C.rows() || plan.cols() != C.cols())
    throw std::invalid_argument("plan/cost shape mismatch");
  check_marginal_shapes(C, mu);
  if (plan.minCoeff() < 0 || !plan.allFinite())
    throw std::invalid_argument("plan entries must be nonnegative and finite");

  double ent = 0.0;
  for (Eigen::Index j = 0; j < plan.cols(); ++j)
    for (Eigen::Index i = 0; i < plan.rows(); ++i) {
      const double pij = plan(i, j);
      if (pij > 0.0) ent += pij * (std::log(pij) - 1.0);
    }
  double obj = transport_cost(plan, C) + cfg.epsilon * ent;
  if (cfg.tau > 0.0) {
    obj += cfg.tau * generalized_kl(plan.rowwise().sum(), mu.p);
    obj += cfg.tau * generalized_kl(plan.colwise().sum().transpose(), mu.q);
  }
  return obj;
}

double transport_cost(const Matrix& plan, const CostMatrix& C) {
  if (plan.rows() != C.rows() || plan.cols() != C.cols())
    throw std::invalid_argument("plan/cost shape mismatch");
  return (plan.array() * C.array()).sum();
}

ExactOtResult exact_ot_oracle(const CostMatrix& C) {
  check_cost(C);
  const Eigen::Index n = C.rows();
  if (C.cols() != n || n > 8)
    throw std::invalid_argument("exact_ot_oracle requires square C with n <= 8");

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_cost = kInf;
  do {
    double c = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) c += C(i, perm[i]);
    if (c < best_cost) {  // strict: keeps the lexicographically smallest tie
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  ExactOtResult r;
  r.plan = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) r.plan(i, best[i]) = 1.0 / static_cast<double>(n);
  r.cost = best_cost / static_cast<double>(n);
  return r;
}

ExactUotResult exact_uot_oracle(const CostMatrix& C, const Marginals& mu, const UotConfig& cfg) {
  check_cost(C);
  check_marginal_shapes(C, mu);
  const Eigen::Index n = C.rows(), m = C.cols();
  if (n * m > 16) throw std::invalid_argument("exact_uot_oracle requires n*m <= 16");
  if (cfg.epsilon <= 0) throw std::invalid_argument("epsilon must be > 0");
  if (cfg.tau < 0) throw std::invalid_argument("tau must be >= 0");
  if (cfg.tau > 0 && (mu.p.minCoeff() <= 0 || mu.q.minCoeff() <= 0))
    throw std::invalid_argument("positive tau requires strictly positive marginals");

  const double eps = cfg.epsilon, tau = cfg.tau;

  auto value = [&](const Matrix& Th) -> double {
    Matrix P = Th.array().exp();
    double f = (P.array() * C.array()).sum() + eps * (P.array() * (Th.array() - 1.0)).sum();
    if (tau > 0.0) {
      f += tau * generalized_kl(P.rowwise().sum(), mu.p);
      f += tau * generalized_kl(P.colwise().sum().transpose(), mu.q);
    }
    return f;
  };
  // tau == 0 decouples every coefficient: stationarity C + eps log P = 0
  // gives the plan in closed form.
  if (tau == 0.0) {
    ExactUotResult out;
    Matrix theta = -C / eps;
    out.plan = theta.array().exp();
    out.objective = value(theta);
    out.converged = true;
    return out;
  }

  // Newton on the dual
  //   D(u, v) = -eps sum_ij exp((u_i + v_j - C_ij)/eps)
  //             - tau sum_i p_i (exp(-u_i/tau) - 1)
  //             - tau sum_j q_j (exp(-v_j/tau) - 1),
  // maximized by the (u, v) whose plan P = exp((u + v - C)/eps) solves the
  // primal. D is smooth and strictly concave for tau > 0, so every stationary
  // point is the global optimum; a primal method in log coordinates can park
  // entries of P near zero in a fake stationary point, this cannot.
  auto theta_of = [&](const Vec& u, const Vec& v) -> Matrix {
    Matrix Th(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j) Th(i, j) = (u[i] + v[j] - C(i, j)) / eps;
    return Th;
  };
  auto dual = [&](const Vec& u, const Vec& v) -> double {
    double d = -eps * theta_of(u, v).array().exp().sum();
    for (Eigen::Index i = 0; i < n; ++i) d -= tau * mu.p[i] * (std::exp(-u[i] / tau) - 1.0);
    for (Eigen::Index j = 0; j < m; ++j) d -= tau * mu.q[j] * (std::exp(-v[j] / tau) - 1.0);
    return d;
  };

  Vec u = Vec::Zero(n), v = Vec::Zero(m);
  double d_cur = dual(u, v);
  // Newton decrement g^T (-H)^-1 g bounds twice the dual value gap near the
  // optimum, a stopping rule immune to the wildly uneven curvature scales.
  constexpr double kDecTol = 1e-13;
  ExactUotResult out;
  for (int it = 0; it < 200; ++it) {
    const Matrix P = theta_of(u, v).array().exp();
    const Vec r = P.rowwise().sum(), c = P.colwise().sum().transpose();
    Vec g(n + m), pu(n), qv(m);
    for (Eigen::Index i = 0; i < n; ++i) {
      pu[i] = mu.p[i] * std::exp(-u[i] / tau);
      g[i] = pu[i] - r[i];
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      qv[j] = mu.q[j] * std::exp(-v[j] / tau);
      g[n + j] = qv[j] - c[j];
    }
    Matrix M = Matrix::Zero(n + m, n + m);  // minus the dual Hessian, PD
    for (Eigen::Index i = 0; i < n; ++i) M(i, i) = r[i] / eps + pu[i] / tau;
    for (Eigen::Index j = 0; j < m; ++j) M(n + j, n + j) = c[j] / eps + qv[j] / tau;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j) M(i, n + j) = M(n + j, i) = P(i, j) / eps;
    const Vec d = Eigen::LDLT<Matrix>(M).solve(g);
    if (!d.allFinite()) break;
    const double dec = g.dot(d);
    if (dec >= 0.0 && dec <= kDecTol) {
      out.converged = true;
      break;
    }
    if (dec <= 0.0) break;  // factorization lost definiteness: give up

    double alpha = 1.0;
    bool moved = false;
    while (alpha >= 1e-18) {
      const Vec un = u + alpha * d.head(n), vn = v + alpha * d.tail(m);
      const double d_new = dual(un, vn);
      if (std::isfinite(d_new) && d_new > d_cur + 1e-4 * alpha * dec) {
        u = un;
        v = vn;
        d_cur = d_new;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) {  // ascent below double resolution of the dual value
      out.converged = dec <= 1e-11;
      break;
    }
  }
  Matrix theta = theta_of(u, v);
  out.plan = theta.array().exp();
  out.objective = value(theta);
  return out;
}

}
