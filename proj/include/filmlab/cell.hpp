#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "filmlab/density.hpp"
#include "filmlab/field.hpp"
#include "filmlab/operator.hpp"

namespace filmlab {

enum class CellMode { Full, ReducedXPrime, Thickness, Limit };

struct SolverParams {
  int max_iterations = 4000;
  double rel_tol = 1e-9;
  int plateau_window = 10;
  double step_safety = 0.9;
};

struct CellProblem {
  CellMode mode = CellMode::Full;
  DifferentialOperator op;
  std::optional<OperatorDecomposition> dec;  // required for Limit mode
  DensityPtr density;
  Vector xi;
  std::vector<int> shape;       // solve-grid shape; dimension depends on mode
  std::vector<int> multicell;   // per-axis oscillation counts, default ones
  double film_eps = 1.0;        // A_eps in Full mode
  bool scaled_thickness = false;  // solve on the stretched cell Q^{d-1} x (0, 1/eps)
  SolverParams params;
};

struct CellResult {
  double value = 0.0;
  PeriodicField corrector;
  int iterations = 0;
  double residual_h_minus1 = 0.0;
  double corrector_mean = 0.0;
  std::vector<double> energy_history;
  bool converged = false;
};

/// Projected gradient descent over zero-mean operator-free correctors:
/// v <- P(v - tau grad f(y, xi + v)); value is the discrete cell average at
/// the stopping iterate.
CellResult solve_cell(const CellProblem& prob);

/// Density sampled at (n_1 y_1, ..., n_d y_d); equals solve_cell for convex
/// densities.
CellResult f_hom_multicell(const CellProblem& prob, const std::vector<int>& n);

/// (d-1)-dimensional problem with A' on Q^{d-1}; needs independent_of_zd.
CellResult f_hom_reduced_xprime(const CellProblem& prob);

/// 1D thickness problem over v: (0,1) -> R^m with A^(d) v constant;
/// needs independent_of_zprime.
CellResult f_hom_thickness(const CellProblem& prob);

/// Cell problem constrained by the limit operator A_0 (normalizes internally
/// when no decomposition is supplied). The mode-wise kernel projector is used
/// even though A_0 may fail constant rank.
CellResult f_hom_limit(const CellProblem& prob);

struct ScalingCheckRow {
  double eps = 1.0;
  double value = 0.0;
  double reference = 0.0;  // plain solve_cell value
};

/// Re-solves on the stretched cell E_eps = Q^{d-1} x (0, 1/eps) via the
/// substitution y = (z', eps z_d) and compares against the unit-cell value.
std::vector<ScalingCheckRow> scaling_identity_check(const CellProblem& prob,
                                                    const std::vector<double>& eps_list);

}  // namespace filmlab
