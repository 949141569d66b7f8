#pragma once

#include <span>
#include <vector>

#include "filmlab/operator.hpp"

namespace filmlab {

/// Convex envelope of h(v) = |v-a|^{p/2} |v-b|^{p/2}, tabulated on the 2D
/// reduction (s, r) = (coordinate along b-a, transverse radius). The s-grid
/// is aligned so that +-|b-a|/2 are nodes, which pins the envelope to exact
/// zeros on the segment [a, b].
class ConvexEnvelopeTable {
 public:
  ConvexEnvelopeTable(Vector a, Vector b, double p, int resolution, double box_radius);

  double value(std::span<const double> v) const;
  void gradient(std::span<const double> v, std::span<double> out) const;

  double raw(std::span<const double> v) const;
  double value_sr(double s, double r) const;
  double raw_sr(double s, double r) const;

  double box_radius() const { return S_; }
  double spacing() const { return h_; }
  double half_distance() const { return u_; }
  const Vector& point_a() const { return a_; }
  const Vector& point_b() const { return b_; }
  double exponent() const { return p_; }

  /// Largest envelope value on tabulated segment nodes (should be ~0).
  double segment_defect() const;
  /// Largest amount by which the table exceeds the raw density (should be <= 0 up to roundoff).
  double dominance_defect() const;

  const std::vector<double>& table() const { return env_; }
  int segment_cells() const { return ks_; }
  int box_cells() const { return (ns_ - 1) / 2; }
  /// Rebuilds a table from serialized pieces (no recomputation).
  static ConvexEnvelopeTable restore(Vector a, Vector b, double p, int segment_cells,
                                     int box_cells, std::vector<double> values);

 private:
  ConvexEnvelopeTable() = default;
  void to_sr(std::span<const double> v, double& s, double& r) const;
  double node_s(int is) const { return -S_ + h_ * is; }
  double node_r(int ir) const { return -S_ + h_ * ir; }
  double env_at(int ir, int is) const { return env_[static_cast<std::size_t>(ir) * ns_ + is]; }
  double interp(double s, double r) const;

  Vector a_, b_, mid_, axis_;
  double u_ = 0.0;  // |b-a|/2
  double p_ = 2.0;
  double S_ = 0.0;
  double h_ = 0.0;
  int ns_ = 0, nr_ = 0;  // node counts (odd; grids symmetric about 0)
  int ks_ = 0;           // u_ = ks_ * h_
  double snap_ = 0.0;
  std::vector<double> env_;
};

/// Discrete Legendre transform of uniformly sampled data: out[j] =
/// max_i (qs[j] x_i - f_i) with x_i = x0 + i h and qs ascending.
void legendre_transform_1d(const double* f, int n, double x0, double h, const double* qs, int nq,
                           double* out);

}  // namespace filmlab
