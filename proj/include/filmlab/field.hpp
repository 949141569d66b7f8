#pragma once

#include <complex>
#include <functional>
#include <span>
#include <vector>

#include "filmlab/operator.hpp"

namespace filmlab {

/// Real vector-valued field sampled cell-centered on a uniform grid over the
/// unit cell; node i of axis a sits at (i + 1/2) / N_a. Storage is
/// component-major with nodes in row-major order (last axis fastest).
struct PeriodicField {
  int m = 0;
  std::vector<int> shape;
  std::vector<double> data;

  int dim() const { return static_cast<int>(shape.size()); }
  long npts() const;
  double& at(int c, long node) { return data[static_cast<std::size_t>(c) * npts() + node]; }
  double at(int c, long node) const { return data[static_cast<std::size_t>(c) * npts() + node]; }

  static PeriodicField zeros(std::vector<int> shape, int m);

  Vector mean() const;
  double l2_norm() const;       // L^2(Q^d) norm of the piecewise sampling
  double linf_norm() const;
  Vector value(long node) const;
  void add_scaled(const PeriodicField& other, double factor);
};

/// Validates the grid contract: every size even and >= 4.
void check_grid(const std::vector<int>& shape);

/// Builds a field by sampling fn at the cell-centered nodes. fn receives the
/// node coordinates and writes m components.
PeriodicField make_field(std::vector<int> shape, int m,
                         const std::function<void(std::span<const double>, std::span<double>)>& fn);

long flat_index(const std::vector<int>& shape, const std::vector<int>& idx);
void unflatten(const std::vector<int>& shape, long node, std::vector<int>& idx);

/// Normalized DFT coefficients: coef(k) = (1/npts) sum_x f(x) e^{-2 pi i k.x/N},
/// axis frequencies k in [-N/2, N/2).
struct Spectrum {
  int m = 0;
  std::vector<int> shape;
  std::vector<std::complex<double>> coef;

  long npts() const;
  std::complex<double>& at(int c, long node) {
    return coef[static_cast<std::size_t>(c) * npts() + node];
  }
  std::complex<double> at(int c, long node) const {
    return coef[static_cast<std::size_t>(c) * npts() + node];
  }
};

Spectrum forward_fft(const PeriodicField& f);
PeriodicField inverse_fft(const Spectrum& s);

/// Integer frequency of a flattened mode index.
void mode_frequency(const std::vector<int>& shape, long node, std::vector<int>& k);
/// True if any axis index equals the unpaired Nyquist frequency -N/2.
bool is_nyquist(const std::vector<int>& shape, const std::vector<int>& k);

/// i A_eps(2 pi k) applied per mode; Nyquist rows zeroed, zero mode zeroed.
PeriodicField apply_operator(const DifferentialOperator& op, double eps, const PeriodicField& u);

double l2_norm(const PeriodicField& g);
/// sqrt( sum_{k!=0} |g^(k)|^2 / (1 + |2 pi k|^2) + |g^(0)|^2 ).
double h_minus1_norm(const PeriodicField& g);

struct ConstraintResidual {
  PeriodicField image;
  double h_minus1 = 0.0;
  double l2 = 0.0;
};

ConstraintResidual constraint_residual(const DifferentialOperator& op, double eps,
                                       const PeriodicField& u);

/// Mode-wise orthogonal projector onto ker of a symbol. Built once per
/// (symbol, grid) pair and reused across solver iterations.
class ModeProjector {
 public:
  using SymbolFn = std::function<Matrix(const std::vector<int>& k)>;

  static ModeProjector for_operator(const DifferentialOperator& op, double eps,
                                    std::vector<int> shape, bool require_constant_rank = true);
  static ModeProjector for_symbol(SymbolFn symbol, int m, std::vector<int> shape);

  /// Projects every nonzero mode; the zero mode is kept or zeroed.
  PeriodicField apply(const PeriodicField& u, bool keep_mean) const;
  /// i S(2 pi k) u^(k) per mode (the constraint image for this symbol).
  PeriodicField apply_symbol(const PeriodicField& u) const;
  int image_rows() const { return l_; }

 private:
  std::vector<int> shape_;
  int m_ = 0;
  int l_ = 0;
  std::vector<double> proj_;    // npts * m * m
  SymbolFn symbol_;
};

PeriodicField project_afree(const DifferentialOperator& op, double eps, const PeriodicField& u,
                            bool keep_mean);

struct ProjectionBoundCheck {
  double lhs = 0.0;  // ||u - P u||_L2
  double rhs = 0.0;  // ||A_eps u||_{H^-1}
  double ratio = 0.0;
};

ProjectionBoundCheck projection_error_bound_check(const DifferentialOperator& op, double eps,
                                                  const PeriodicField& u);

/// Average of n^d copies shifted by k/n over all axes; (1/n)-periodic output.
PeriodicField sharp_average(const PeriodicField& v, int n);
/// Shifted-copy average over the first d-1 axes only.
PeriodicField sharp_average_xprime(const PeriodicField& v, int j);
/// For a (1/tau_inverse)-periodic-in-x' field, its x'-cell average per x_d level.
PeriodicField cell_average_xprime(const PeriodicField& v, int tau_inverse);

/// Max node defect of (1/q)-periodicity along the given axis.
double periodicity_defect(const PeriodicField& v, int axis, int q);

/// Pointwise x -> eta_d(x_d) rho'(x') v(x). Profiles must map into [0, 1] and
/// vanish at the cell boundary.
PeriodicField cutoff_glue(const PeriodicField& v, const std::function<double(double)>& eta_d,
                          const std::function<double(std::span<const double>)>& rho_prime);

PeriodicField jump_field(std::vector<int> shape, int normal_axis, double threshold,
                         const Vector& minus, const Vector& plus);

/// Samples v(x'/eps^alpha, x_d/eps^{alpha-1}) on the target grid. Scale
/// factors must be integers or reciprocals of integers matching the grids
/// (constant axes are exempt), so the sampling is alias-free.
PeriodicField oscillation_sample(const PeriodicField& v, double eps, double alpha,
                                 std::vector<int> target_shape);

/// Stretches one x'-microcell of a (1/j)-periodic-in-x' field to the full
/// cell: output(x) = v(x'/j, x_d) on the shape (N'/j, N_d).
PeriodicField rescale_xprime(const PeriodicField& v, int j);

}  // namespace filmlab
