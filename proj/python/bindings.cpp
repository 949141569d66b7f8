#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "filmlab/cell.hpp"
#include "filmlab/lab.hpp"
#include "filmlab/reports.hpp"

namespace py = pybind11;
using namespace filmlab;

namespace {

// fields cross the boundary as float64 arrays of shape (m, N_1, ..., N_d)
PeriodicField field_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() < 2) throw std::invalid_argument("field array needs shape (m, N_1, ..., N_d)");
  const int m = static_cast<int>(arr.shape(0));
  std::vector<int> shape;
  for (py::ssize_t a = 1; a < arr.ndim(); ++a) shape.push_back(static_cast<int>(arr.shape(a)));
  PeriodicField f = PeriodicField::zeros(shape, m);
  std::memcpy(f.data.data(), arr.data(), sizeof(double) * f.data.size());
  return f;
}

py::array_t<double> field_to_numpy(const PeriodicField& f) {
  std::vector<py::ssize_t> shape{f.m};
  for (int n : f.shape) shape.push_back(n);
  py::array_t<double> arr(shape);
  std::memcpy(arr.mutable_data(), f.data.data(), sizeof(double) * f.data.size());
  return arr;
}

Matrix matrix_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 2) throw std::invalid_argument("expected a 2D array");
  Matrix m(arr.shape(0), arr.shape(1));
  for (py::ssize_t i = 0; i < arr.shape(0); ++i)
    for (py::ssize_t j = 0; j < arr.shape(1); ++j) m(i, j) = arr.at(i, j);
  return m;
}

py::array_t<double> matrix_to_numpy(const Matrix& m) {
  py::array_t<double> arr({static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
  for (py::ssize_t i = 0; i < m.rows(); ++i)
    for (py::ssize_t j = 0; j < m.cols(); ++j) arr.mutable_at(i, j) = m(i, j);
  return arr;
}

Vector vector_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 1) throw std::invalid_argument("expected a 1D array");
  Vector v(arr.shape(0));
  for (py::ssize_t i = 0; i < arr.shape(0); ++i) v[i] = arr.at(i);
  return v;
}

py::array_t<double> vector_to_numpy(const Vector& v) {
  py::array_t<double> arr(static_cast<py::ssize_t>(v.size()));
  for (py::ssize_t i = 0; i < v.size(); ++i) arr.mutable_at(i) = v[i];
  return arr;
}

DensityPtr density_from_dict(const py::dict& spec, const DifferentialOperator& op) {
  Json doc;
  for (const auto& item : spec) {
    const std::string key = py::str(item.first);
    if (py::isinstance<py::str>(item.second))
      doc[key] = std::string(py::str(item.second));
    else if (py::isinstance<py::int_>(item.second))
      doc[key] = item.second.cast<long>();
    else
      doc[key] = item.second.cast<double>();
  }
  return density_from_json(doc, op);
}

}  // namespace

PYBIND11_MODULE(_filmlab, mod) {
  mod.doc() = "spectral homogenization lab for thin-film differential constraints";

  py::class_<DifferentialOperator>(mod, "DifferentialOperator")
      .def_readonly("d", &DifferentialOperator::d)
      .def_readonly("l", &DifferentialOperator::l)
      .def_readonly("m", &DifferentialOperator::m)
      .def("coeff", [](const DifferentialOperator& op, int k) { return matrix_to_numpy(op.coeff(k)); });

  mod.def("builtin_operator", &builtin_operator, py::arg("name"), py::arg("n") = 1,
          py::arg("d") = 2);
  mod.def("operator_from_coeffs", [](const std::vector<py::array_t<double>>& mats) {
    std::vector<Matrix> coeffs;
    for (const auto& m : mats) coeffs.push_back(matrix_from_numpy(m));
    return DifferentialOperator::from_coeffs(std::move(coeffs));
  });

  mod.def("evaluate_symbol", [](const DifferentialOperator& op, const py::array_t<double>& eta) {
    return matrix_to_numpy(evaluate_symbol(op, vector_from_numpy(eta)));
  });
  mod.def("evaluate_rescaled_symbol",
          [](const DifferentialOperator& op, double eps, const py::array_t<double>& eta) {
            return matrix_to_numpy(evaluate_rescaled_symbol(op, eps, vector_from_numpy(eta)));
          });

  mod.def("check_constant_rank",
          [](const DifferentialOperator& op, int samples, double tol) {
            const RankCertificate cert = check_constant_rank(op, samples, tol);
            py::dict out;
            out["is_constant"] = cert.is_constant;
            out["r"] = cert.r;
            out["samples"] = cert.samples;
            out["trivial"] = cert.trivial;
            return out;
          },
          py::arg("op"), py::arg("samples") = 10000, py::arg("tol") = 1e-10);

  mod.def("check_antisymmetry", &check_antisymmetry, py::arg("op"), py::arg("tol") = 1e-10);
  mod.def("kernel_basis", [](const py::array_t<double>& mat, double tol) {
    return matrix_to_numpy(kernel_basis(matrix_from_numpy(mat), tol));
  }, py::arg("mat"), py::arg("tol") = 1e-10);

  mod.def("limit_operator_symbol",
          [](const DifferentialOperator& op, const py::array_t<double>& eta) {
            auto [normalized, dec] = normalize(op);
            const LimitOperator lim = limit_operator(normalized, dec);
            return matrix_to_numpy(evaluate_symbol(lim.base, vector_from_numpy(eta)));
          });

  mod.def("apply_operator",
          [](const DifferentialOperator& op, double eps, const py::array_t<double>& u) {
            return field_to_numpy(apply_operator(op, eps, field_from_numpy(u)));
          });
  mod.def("project_afree",
          [](const DifferentialOperator& op, double eps, const py::array_t<double>& u,
             bool keep_mean) {
            return field_to_numpy(project_afree(op, eps, field_from_numpy(u), keep_mean));
          },
          py::arg("op"), py::arg("eps"), py::arg("u"), py::arg("keep_mean") = true);
  mod.def("h_minus1_norm",
          [](const py::array_t<double>& g) { return h_minus1_norm(field_from_numpy(g)); });
  mod.def("l2_norm", [](const py::array_t<double>& g) { return field_from_numpy(g).l2_norm(); });
  mod.def("jump_field",
          [](const std::vector<int>& shape, int axis, double threshold,
             const py::array_t<double>& minus, const py::array_t<double>& plus) {
            return field_to_numpy(jump_field(shape, axis, threshold, vector_from_numpy(minus),
                                             vector_from_numpy(plus)));
          });
  mod.def("sharp_average", [](const py::array_t<double>& v, int n) {
    return field_to_numpy(sharp_average(field_from_numpy(v), n));
  });
  mod.def("oscillation_sample",
          [](const py::array_t<double>& v, double eps, double alpha,
             const std::vector<int>& target) {
            return field_to_numpy(oscillation_sample(field_from_numpy(v), eps, alpha, target));
          });
  mod.def("rescale_xprime", [](const py::array_t<double>& v, int j) {
    return field_to_numpy(rescale_xprime(field_from_numpy(v), j));
  });

  mod.def("solve_cell",
          [](const DifferentialOperator& op, const py::dict& density_spec,
             const py::array_t<double>& xi, const std::vector<int>& grid, const std::string& mode,
             const std::vector<int>& multicell, double eps) {
            CellProblem prob;
            prob.op = op;
            prob.density = density_from_dict(density_spec, op);
            prob.xi = vector_from_numpy(xi);
            prob.shape = grid;
            prob.film_eps = eps;
            CellResult res;
            if (mode == "cell") {
              if (!multicell.empty())
                res = f_hom_multicell(prob, multicell);
              else
                res = solve_cell(prob);
            } else if (mode == "reduced") {
              res = f_hom_reduced_xprime(prob);
            } else if (mode == "thickness") {
              res = f_hom_thickness(prob);
            } else if (mode == "limit") {
              res = f_hom_limit(prob);
            } else {
              throw std::invalid_argument("unknown mode: " + mode);
            }
            py::dict out;
            out["value"] = res.value;
            out["iterations"] = res.iterations;
            out["residual_h_minus1"] = res.residual_h_minus1;
            out["converged"] = res.converged;
            out["corrector"] = field_to_numpy(res.corrector);
            return out;
          },
          py::arg("op"), py::arg("density"), py::arg("xi"), py::arg("grid"),
          py::arg("mode") = "cell", py::arg("multicell") = std::vector<int>{},
          py::arg("eps") = 1.0);

  auto quartet_dict = [](const QuartetCertificate& cert) {
    py::dict out;
    out["xi1"] = vector_to_numpy(cert.xi1);
    out["xi2"] = vector_to_numpy(cert.xi2);
    out["sigma1"] = vector_to_numpy(cert.sigma1);
    out["sigma2"] = vector_to_numpy(cert.sigma2);
    out["axis"] = cert.axis;
    out["certified"] = cert.certified();
    out["res_mean_jump"] = cert.res_mean_jump;
    out["res_xi_jump"] = cert.res_xi_jump;
    out["res_sigma_jump"] = cert.res_sigma_jump;
    out["res_phase_kernel"] = cert.res_phase_kernel;
    out["res_independence"] = cert.res_independence;
    return out;
  };

  mod.def("jump_residual_analytic",
          [](const DifferentialOperator& op, double eps, int axis, const py::array_t<double>& minus,
             const py::array_t<double>& plus) {
            return jump_residual_analytic(op, eps, axis, vector_from_numpy(minus),
                                          vector_from_numpy(plus));
          });

  mod.def("construct_quartet",
          [quartet_dict](const DifferentialOperator& op, int axis, double alpha_param,
                         double beta_param) {
            return quartet_dict(construct_quartet(op, axis, alpha_param, beta_param));
          },
          py::arg("op"), py::arg("axis") = -1, py::arg("alpha_param") = 1.0,
          py::arg("beta_param") = 1.0);
  mod.def("verify_quartet",
          [quartet_dict](const DifferentialOperator& op, const py::array_t<double>& xi1,
                         const py::array_t<double>& xi2, const py::array_t<double>& sigma1,
                         const py::array_t<double>& sigma2, int axis) {
            return quartet_dict(verify_quartet(op, vector_from_numpy(xi1), vector_from_numpy(xi2),
                                               vector_from_numpy(sigma1),
                                               vector_from_numpy(sigma2), axis));
          });

  mod.def("nonlocality_obstruction",
          [](const DifferentialOperator& op, double alpha, const std::vector<int>& ladder, int nd,
             bool successive) {
            const QuartetCertificate quartet = construct_quartet(op);
            RegimeConfig config;
            config.alpha = alpha;
            config.ladder = ladder;
            config.nd = nd;
            const NonlocalityReport report = successive
                                                 ? successive_nonlocality(op, quartet, config)
                                                 : nonlocality_obstruction(op, quartet, config);
            py::list rows;
            for (const auto& row : report.rows) {
              py::dict r;
              r["j"] = row.j;
              r["eps"] = row.eps;
              r["energy_full"] = row.energy_full;
              r["viol_half"] = std::max(row.viol_half_lower, row.viol_half_upper);
              r["viol_full"] = row.viol_full;
              r["chain_sharp"] = row.chain_sharp;
              r["chain_rescaled"] = row.chain_rescaled;
              r["a0_residual"] = row.a0_residual;
              r["phase_fractions"] = row.phase_fractions;
              rows.append(r);
            }
            py::dict out;
            out["rows"] = rows;
            out["oracle_floor"] = report.oracle_floor;
            out["min_full_violation"] = report.min_full_violation;
            return out;
          },
          py::arg("op"), py::arg("alpha") = 1.0,
          py::arg("ladder") = std::vector<int>{2, 4, 8, 16, 32}, py::arg("nd") = 64,
          py::arg("successive") = false);
}
