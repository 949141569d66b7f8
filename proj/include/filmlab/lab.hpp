#pragma once

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "filmlab/cell.hpp"
#include "filmlab/density.hpp"
#include "filmlab/field.hpp"
#include "filmlab/operator.hpp"

namespace filmlab {

/// The four vectors of the nonlocality construction with the residuals of the
/// five conditions they must satisfy.
struct QuartetCertificate {
  Vector xi1, xi2, sigma1, sigma2;
  int axis = 0;  // in-plane jump direction (0-based, < d-1)
  double alpha_param = 1.0, beta_param = 1.0;
  Vector z, v;

  double res_mean_jump = 0.0;     // dist of (s1+s2)-(x1+x2) from ker A_0(e_d)
  double mean_jump_norm = 0.0;    // its norm (must stay away from 0)
  double res_xi_jump = 0.0;       // dist of x1-x2 from ker A(n)
  double res_sigma_jump = 0.0;    // dist of s1-s2 from ker A(n)
  double res_phase_kernel = 0.0;  // max_i dist of (xi_i - sigma_i) from ker A(e_d) (must be > 0)
  double res_independence = 0.0;  // 2nd singular value of [x1-s1, x2-s2] (must be > 0)

  bool certified(double tol = 1e-10, double positive_threshold = 1e-8) const {
    return res_mean_jump <= tol && mean_jump_norm > positive_threshold && res_xi_jump <= tol &&
           res_sigma_jump <= tol && res_phase_kernel >= positive_threshold &&
           res_independence >= positive_threshold;
  }

  QuartetVectors vectors() const { return {xi1, xi2, sigma1, sigma2, axis}; }
};

/// Canonical construction: z = first kernel vector of A(e_d), v the kernel
/// vector of A(n) farthest from ker A(e_d), sigma2 = 0, sigma1 = beta v,
/// xi1 = sigma1 + alpha v + z, xi2 = sigma2 - alpha v + z.
/// axis = -1 searches the in-plane axes.
QuartetCertificate construct_quartet(const DifferentialOperator& op, int axis = -1,
                                     double alpha_param = 1.0, double beta_param = 1.0);

/// Recomputes every residual from scratch for externally supplied vectors.
QuartetCertificate verify_quartet(const DifferentialOperator& op, const Vector& xi1,
                                  const Vector& xi2, const Vector& sigma1, const Vector& sigma2,
                                  int axis);

struct JumpCompatibility {
  double residual = 0.0;  // h^-1 of A_eps applied to the jump, per unit jump
  bool compatible = false;
};

JumpCompatibility jump_compatibility(const DifferentialOperator& op, double eps, int axis,
                                     const Vector& minus, const Vector& plus,
                                     std::vector<int> shape);

/// Analytic-coefficient mode for axis-aligned jumps: the H^-1 residual from
/// the square-wave Fourier series instead of the grid DFT (no aliasing).
double jump_residual_analytic(const DifferentialOperator& op, double eps, int axis,
                              const Vector& minus, const Vector& plus);

/// Ladder configuration for the regime experiments. eps_j is pinned by
/// eps_j^alpha = 1/j; grids follow N' = nodes_per_stripe * j per oscillating
/// direction.
struct RegimeConfig {
  double alpha = 1.0;
  std::vector<int> ladder = {2, 4, 8, 16, 32};
  int nodes_per_stripe = 4;
  int nd = 64;

  double eps_of(int j) const;
};

struct HalfDomainRow {
  int j = 0;
  double eps = 0.0;
  double energy_lower = 0.0;      // stripe field against its own phase density
  double energy_upper = 0.0;
  double energy_swapped = 0.0;    // sanity contrast: xi-stripes against sigma phases
  double viol_lower = 0.0;        // h^-1 constraint residual of each stripe field
  double viol_upper = 0.0;
  Vector mean_lower, mean_upper;  // weak limits
};

std::vector<HalfDomainRow> halfdomain_recovery(const DifferentialOperator& op,
                                               const QuartetCertificate& quartet,
                                               const RegimeConfig& config);

struct NonlocalityRow {
  int j = 0;
  double eps = 0.0;
  double energy_lower = 0.0, energy_upper = 0.0, energy_full = 0.0;
  double viol_half_lower = 0.0, viol_half_upper = 0.0;
  double viol_full = 0.0;        // h^-1(A_eps glued candidate)
  double chain_sharp = 0.0;      // h^-1(A_eps v#)
  double chain_rescaled = 0.0;   // h^-1(A_{eps^{1-alpha}} v~)
  double a0_residual = 0.0;      // h^-1(A_0 v~)
  std::array<double, 4> phase_fractions = {0, 0, 0, 0};
  double phase_other = 0.0;
};

struct NonlocalityReport {
  std::vector<NonlocalityRow> rows;
  double oracle_floor = 0.0;     // analytic h^-1(A_0 v~_0) from the Fourier series
  double min_full_violation = 0.0;
  bool successive = false;       // §7 variant with the constraint fixed to A_0
};

/// Analytic H^-1 norm of A_0 applied to the four-quadrant field of the
/// quartet, evaluated from the square-wave Fourier series.
double a0_obstruction_oracle(const DifferentialOperator& normalized,
                             const OperatorDecomposition& dec, const QuartetCertificate& quartet);

NonlocalityReport nonlocality_obstruction(const DifferentialOperator& op,
                                          const QuartetCertificate& quartet,
                                          const RegimeConfig& config);

/// §7 variant: constraint fixed to A_0, density oscillating at 1/j.
NonlocalityReport successive_nonlocality(const DifferentialOperator& op,
                                         const QuartetCertificate& quartet,
                                         const RegimeConfig& config);

struct LocalizationRow {
  int j = 0;
  double eps = 0.0;
  double tau = 0.0;
  double localized = 0.0;   // h^-1( eta_d'(x_d) A^(d) (v# - vbar) ), the tau-rate quantity
  double full = 0.0;        // h^-1( A_eps [eta (v# - vbar)] ) = localized / eps
};

struct LocalizationReport {
  std::vector<LocalizationRow> rows;
  double slope = 0.0;  // log-log fit of `localized` against tau
};

/// Generator returns a tau_j-periodic-in-x' A_{eps_j}-free field on demand.
using FieldGenerator = std::function<PeriodicField(int j, double eps, const std::vector<int>& shape)>;

LocalizationReport localization_rate(const DifferentialOperator& op, const std::vector<int>& ladder,
                                     double alpha, const FieldGenerator& generator,
                                     const std::function<double(double)>& eta_d,
                                     const std::function<double(double)>& eta_d_derivative,
                                     int nodes_per_cell = 4, int nd = 64);

struct LocalizationXPrimeRow {
  int j = 0;
  double eps = 0.0;
  double input_residual = 0.0;   // h^-1(A_eps v_j), must vanish along the ladder
  double weak_defect = 0.0;      // low-mode defect of v_j -> 0
  double cutoff_residual = 0.0;  // h^-1(A_eps [rho v_j])
};

std::vector<LocalizationXPrimeRow> localization_xprime(
    const DifferentialOperator& op, const std::vector<int>& ladder, double alpha,
    const FieldGenerator& generator,
    const std::function<double(std::span<const double>)>& rho_prime, int nodes_per_cell = 4,
    int nd = 64);

struct RecoveryRow {
  int j = 0;
  double eps = 0.0;
  double energy = 0.0;            // energy of the recovered field
  double target = 0.0;            // integral of f_hom over the piecewise approximation
  double violation_before = 0.0;  // h^-1(A_eps glued field) before projection
  double displacement = 0.0;      // L^2 distance moved by the final projection
};

struct RecoveryParams {
  int h_cells_xprime = 1;  // piecewise-constant approximation cells per x' axis
  int h_cells_xd = 2;
  double band = 0.05;      // cutoff ramp width (absolute, in cell units)
  std::vector<int> shape = {64, 64};
  int corrector_resolution = 64;  // reference grid for the f_hom targets
};

std::vector<RecoveryRow> build_recovery(const DifferentialOperator& op, const DensityPtr& density,
                                        const PeriodicField& target, double alpha,
                                        const std::vector<int>& ladder,
                                        const RecoveryParams& params);

struct LimitTransferRow {
  double eps_beta = 0.0;
  double adplus_residual = 0.0;   // ||A^(d)_+ d_d v||_{H^-1}
  double adplus_bound = 0.0;      // eps^beta (||(A_eps^beta)_+ v|| + ||A'_+ v||)
  double aminus_residual = 0.0;   // ||A'_- v|| = ||(A_eps^beta)_- v||
  double a0_residual = 0.0;
  double input_residual = 0.0;    // ||A_{eps^beta} v||
};

std::vector<LimitTransferRow> limit_transfer_check(const DifferentialOperator& normalized,
                                                   const OperatorDecomposition& dec, double beta,
                                                   const std::vector<double>& eps_list,
                                                   const std::vector<PeriodicField>& fields);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace filmlab
