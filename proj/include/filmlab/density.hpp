#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>

#include "filmlab/envelope.hpp"
#include "filmlab/operator.hpp"

namespace filmlab {

/// Energy density f(z, v) >= 0 with gradient in v, unit-cell periodic in z.
/// z always carries the full spatial dimension d; reduced solvers pass 0.5
/// for the suppressed coordinates (legitimate whenever the matching
/// independence flag is set).
class EnergyDensity {
 public:
  virtual ~EnergyDensity() = default;

  virtual double value(std::span<const double> z, std::span<const double> v) const = 0;
  virtual void gradient(std::span<const double> z, std::span<const double> v,
                        std::span<double> out) const = 0;

  int d = 0;
  int m = 0;
  double p = 2.0;
  double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0;
  /// Optional curvature bound for the solver step rule; 0 means "derive from
  /// c4". Tabulated densities set it from measured second differences.
  double grad_lipschitz_hint = 0.0;
  bool independent_of_zd = false;
  bool independent_of_zprime = false;
  bool certified_convex = false;
};

using DensityPtr = std::shared_ptr<const EnergyDensity>;

/// f(z, v) = 1/2 v . C(z) v with C symmetric positive definite.
DensityPtr quadratic_density(int d, int m,
                             const std::function<Matrix(std::span<const double> z)>& coefficient,
                             int spd_check_samples = 64);

/// z-independent 1/2 |v|^2.
DensityPtr quadratic_identity(int d, int m);

/// Two-phase scalar laminate a(z_axis) in {a_lo, a_hi} (half/half) times the
/// identity, f = 1/2 a |v|^2.
DensityPtr quadratic_laminate(int d, int m, int axis, double a_lo, double a_hi);

/// Anisotropic two-phase laminate with an off-diagonal coupling in the first
/// two components; used to make correctors genuinely value-dependent.
DensityPtr quadratic_laminate_coupled(int d, int m, int axis, double a_lo, double a_hi,
                                      double coupling);

/// Raw two-phase product density g of the nonlocality construction:
/// |v-xi_i|^{p/2} |v-sigma_i|^{p/2} with the phase switching across
/// frac(z_axis) = 1/2; 1-periodic in z'. Not convex.
class TwoPhaseProductDensity {
 public:
  TwoPhaseProductDensity(Vector xi1, Vector xi2, Vector sigma1, Vector sigma2, int stripe_axis,
                         double p);
  double value(std::span<const double> z, std::span<const double> v) const;
  int phase(std::span<const double> z) const;

  Vector xi1, xi2, sigma1, sigma2;
  int stripe_axis = 0;
  double p = 2.0;
};

struct QuartetVectors {
  Vector xi1, xi2, sigma1, sigma2;
  int axis = 0;  // stripe direction (0-based, < d-1)
};

ConvexEnvelopeTable convexify_pair(const Vector& a, const Vector& b, double p, int resolution,
                                   double box_radius);

/// Phase-wise convexification f = g^c of the two-phase product density;
/// independent of z_d by construction.
DensityPtr counterexample_density(const QuartetVectors& quartet, int d, double p = 2.0,
                                  int resolution = 257, double box_radius = 0.0);

struct HypothesisReport {
  bool passed = true;
  std::string failed;               // name of the first violated hypothesis
  double margin_growth = 0.0;       // min over samples of c1(1+|v|^p) - f
  double margin_coercivity = 0.0;   // min of f - c2 |v|^p + c3
  double margin_convexity = 0.0;    // min of (f(v)+f(w))/2 - f((v+w)/2)
  double margin_lipschitz = 0.0;    // min of c4 (|v|+|w|)^{p-1} |v-w| - |f(v)-f(w)|
  double margin_nonneg = 0.0;       // min of f
  int samples = 0;
};

/// Samples z over the cell and v in a ball of radius 10; reports worst-case
/// margins for (H3), (H4), (H5), nonnegativity and the p-Lipschitz bound.
/// Deterministic under seed.
HypothesisReport verify_hypotheses(const EnergyDensity& f, int n_samples, std::uint64_t seed);

}  // namespace filmlab
