#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <stdexcept>
#include <string>
#include <vector>

#include "otcotrain/dtw_align.hpp"
#include "otcotrain/errors.hpp"
#include "otcotrain/geometry.hpp"
#include "otcotrain/ot_solvers.hpp"
#include "otcotrain/version.hpp"

namespace py = pybind11;
using namespace otc;

namespace {

// Conversions go through py::array_t rather than the Eigen type casters so
// the module works against any numpy the interpreter loaded.
using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const DArray& a, const char* name) {
  if (a.ndim() != 2) throw std::invalid_argument(std::string(name) + ": expected a 2-D array");
  const auto r = a.unchecked<2>();
  Matrix m(r.shape(0), r.shape(1));
  for (py::ssize_t i = 0; i < r.shape(0); ++i)
    for (py::ssize_t j = 0; j < r.shape(1); ++j) m(i, j) = r(i, j);
  return m;
}

Vec to_vec(const DArray& a, const char* name) {
  if (a.ndim() != 1) throw std::invalid_argument(std::string(name) + ": expected a 1-D array");
  const auto r = a.unchecked<1>();
  Vec v(r.shape(0));
  for (py::ssize_t i = 0; i < r.shape(0); ++i) v[i] = r(i);
  return v;
}

py::array_t<double> from_matrix(const Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  auto r = out.mutable_unchecked<2>();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) r(i, j) = m(i, j);
  return out;
}

std::vector<Vec> rows_to_vecs(const DArray& a, const char* name) {
  const Matrix m = to_matrix(a, name);
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(m.row(i).transpose());
  return out;
}

UotConfig make_cfg(double epsilon, double tau, int max_iter, double tol,
                   const std::string& stabilization) {
  UotConfig cfg;
  cfg.epsilon = epsilon;
  cfg.tau = tau;
  cfg.max_iter = max_iter;
  cfg.tol = tol;
  if (stabilization == "on")
    cfg.stabilization = Stabilization::kOn;
  else if (stabilization == "off")
    cfg.stabilization = Stabilization::kOff;
  else if (stabilization == "auto")
    cfg.stabilization = Stabilization::kAuto;
  else
    throw std::invalid_argument("stabilization must be auto, on, or off");
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_otcotrain, m) {
  m.doc() = "entropic and unbalanced optimal transport with DTW-guided pairing";
  m.attr("__version__") = kVersion;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

  py::class_<TransportPlan>(m, "TransportPlan")
      .def_property_readonly("plan", [](const TransportPlan& tp) { return from_matrix(tp.plan); })
      .def_readonly("iterations", &TransportPlan::iterations)
      .def_readonly("row_residual", &TransportPlan::row_residual)
      .def_readonly("col_residual", &TransportPlan::col_residual)
      .def_readonly("objective", &TransportPlan::objective)
      .def_readonly("converged", &TransportPlan::converged)
      .def("__repr__", [](const TransportPlan& tp) {
        return "TransportPlan(" + std::to_string(tp.plan.rows()) + "x" +
               std::to_string(tp.plan.cols()) + ", objective=" + std::to_string(tp.objective) +
               ", converged=" + (tp.converged ? std::string("True") : std::string("False")) + ")";
      });

  m.def(
      "sq_euclid",
      [](const DArray& u, const DArray& v) { return sq_euclid(to_vec(u, "u"), to_vec(v, "v")); },
      py::arg("u"), py::arg("v"));

  m.def(
      "joint_cost_matrix",
      [](const DArray& Zs, const DArray& Xs, const DArray& Zt, const DArray& Xt, double alpha1,
         double alpha2) {
        return from_matrix(joint_cost_matrix_cols(to_matrix(Zs, "z_src"), to_matrix(Xs, "x_src"),
                                                  to_matrix(Zt, "z_tgt"), to_matrix(Xt, "x_tgt"),
                                                  alpha1, alpha2));
      },
      py::arg("z_src"), py::arg("x_src"), py::arg("z_tgt"), py::arg("x_tgt"),
      py::arg("alpha1") = 1.0, py::arg("alpha2") = 1.0,
      "Pairwise alpha1*|z_i-z_j|^2 + alpha2*|x_i-x_j|^2 over column batches");

  m.def(
      "sinkhorn_balanced",
      [](const DArray& C, const DArray& p, const DArray& q, double epsilon, int max_iter,
         double tol, const std::string& stabilization) {
        const UotConfig cfg = make_cfg(epsilon, 0.0, max_iter, tol, stabilization);
        return sinkhorn_balanced(to_matrix(C, "C"), Marginals{to_vec(p, "p"), to_vec(q, "q")},
                                 cfg.epsilon, cfg.max_iter, cfg.tol, cfg.stabilization);
      },
      py::arg("C"), py::arg("p"), py::arg("q"), py::arg("epsilon") = 5e-4,
      py::arg("max_iter") = 10000, py::arg("tol") = 1e-9, py::arg("stabilization") = "auto");

  m.def(
      "sinkhorn_unbalanced",
      [](const DArray& C, const DArray& p, const DArray& q, double epsilon, double tau,
         int max_iter, double tol, const std::string& stabilization) {
        return sinkhorn_unbalanced(to_matrix(C, "C"), Marginals{to_vec(p, "p"), to_vec(q, "q")},
                                   make_cfg(epsilon, tau, max_iter, tol, stabilization));
      },
      py::arg("C"), py::arg("p"), py::arg("q"), py::arg("epsilon") = 5e-4, py::arg("tau") = 0.01,
      py::arg("max_iter") = 10000, py::arg("tol") = 1e-9, py::arg("stabilization") = "auto");

  m.def(
      "uot_objective",
      [](const DArray& plan, const DArray& C, const DArray& p, const DArray& q, double epsilon,
         double tau) {
        UotConfig cfg;
        cfg.epsilon = epsilon;
        cfg.tau = tau;
        return uot_objective(to_matrix(plan, "plan"), to_matrix(C, "C"),
                             Marginals{to_vec(p, "p"), to_vec(q, "q")}, cfg);
      },
      py::arg("plan"), py::arg("C"), py::arg("p"), py::arg("q"), py::arg("epsilon"),
      py::arg("tau"));

  m.def(
      "transport_cost",
      [](const DArray& plan, const DArray& C) {
        return transport_cost(to_matrix(plan, "plan"), to_matrix(C, "C"));
      },
      py::arg("plan"), py::arg("C"));

  m.def(
      "exact_ot_oracle",
      [](const DArray& C) {
        const ExactOtResult r = exact_ot_oracle(to_matrix(C, "C"));
        return py::make_tuple(from_matrix(r.plan), r.cost);
      },
      py::arg("C"), "Permutation-enumeration solution for square C (n <= 8)");

  m.def(
      "dtw",
      [](const DArray& X, const DArray& Y) {
        const DtwResult r = dtw(rows_to_vecs(X, "X"), rows_to_vecs(Y, "Y"));
        return py::make_tuple(r.distance, r.path);
      },
      py::arg("X"), py::arg("Y"),
      "Dynamic time warping over row sequences; returns (distance, path)");

  m.def("weight_transform", &weight_transform, py::arg("d_bar"));
}
