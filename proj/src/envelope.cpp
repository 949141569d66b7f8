#include "filmlab/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace filmlab {

void legendre_transform_1d(const double* f, int n, double x0, double h, const double* qs, int nq,
                           double* out) {
  // Lower convex hull of (x_i, f_i); the argmax index is nondecreasing in q.
  std::vector<int> hull;
  hull.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    while (hull.size() >= 2) {
      const int i1 = hull[hull.size() - 2];
      const int i2 = hull[hull.size() - 1];
      // keep i2 only if it lies strictly below segment (i1, i)
      const double lhs = (f[i2] - f[i1]) * (i - i1);
      const double rhs = (f[i] - f[i1]) * (i2 - i1);
      if (lhs < rhs) break;
      hull.pop_back();
    }
    hull.push_back(i);
  }
  int ptr = 0;
  const int hn = static_cast<int>(hull.size());
  for (int j = 0; j < nq; ++j) {
    const double q = qs[j];
    while (ptr + 1 < hn) {
      const int i1 = hull[static_cast<std::size_t>(ptr)];
      const int i2 = hull[static_cast<std::size_t>(ptr) + 1];
      const double v1 = q * (x0 + h * i1) - f[i1];
      const double v2 = q * (x0 + h * i2) - f[i2];
      if (v2 >= v1)
        ++ptr;
      else
        break;
    }
    const int i = hull[static_cast<std::size_t>(ptr)];
    out[j] = q * (x0 + h * i) - f[i];
  }
}

namespace {

// Two-pass 2D transform: rows indexed by y (count ny, origin y0, step hy),
// columns by x (count nx, origin x0, step hx). Returns g[jy][jx] =
// max_{x,y} (qx x + qy y - F).
std::vector<double> legendre_transform_2d(const std::vector<double>& F, int ny, int nx, double y0,
                                          double hy, double x0, double hx,
                                          const std::vector<double>& qx,
                                          const std::vector<double>& qy) {
  const int nqx = static_cast<int>(qx.size());
  const int nqy = static_cast<int>(qy.size());
  std::vector<double> stage(static_cast<std::size_t>(ny) * nqx);
  std::vector<double> row_out(static_cast<std::size_t>(nqx));
  for (int iy = 0; iy < ny; ++iy) {
    legendre_transform_1d(F.data() + static_cast<std::size_t>(iy) * nx, nx, x0, hx, qx.data(), nqx,
                          row_out.data());
    for (int j = 0; j < nqx; ++j) stage[static_cast<std::size_t>(iy) * nqx + j] = row_out[j];
  }
  std::vector<double> out(static_cast<std::size_t>(nqy) * nqx);
  std::vector<double> col(static_cast<std::size_t>(ny));
  std::vector<double> col_out(static_cast<std::size_t>(nqy));
  for (int j = 0; j < nqx; ++j) {
    for (int iy = 0; iy < ny; ++iy)
      col[static_cast<std::size_t>(iy)] = -stage[static_cast<std::size_t>(iy) * nqx + j];
    legendre_transform_1d(col.data(), ny, y0, hy, qy.data(), nqy, col_out.data());
    for (int jy = 0; jy < nqy; ++jy) out[static_cast<std::size_t>(jy) * nqx + j] = col_out[jy];
  }
  return out;
}

}  // namespace

ConvexEnvelopeTable::ConvexEnvelopeTable(Vector a, Vector b, double p, int resolution,
                                         double box_radius)
    : a_(std::move(a)), b_(std::move(b)), p_(p) {
  if (a_.size() != b_.size()) throw std::invalid_argument("envelope endpoints must share length");
  const Vector diff = b_ - a_;
  if (diff.norm() == 0.0) throw std::invalid_argument("envelope endpoints must differ");
  u_ = diff.norm() / 2.0;
  if (!(box_radius >= 2.0 * diff.norm()))
    throw std::invalid_argument("box radius must be at least 2 |b-a|");
  mid_ = (a_ + b_) / 2.0;
  axis_ = diff / diff.norm();
  if (resolution < 32) resolution = 32;

  // u-aligned spacing: h = u / ks with +-u and 0 exact nodes.
  ks_ = std::max(4, static_cast<int>(std::ceil(u_ * (resolution - 1) / (2.0 * box_radius))));
  h_ = u_ / ks_;
  const int K = static_cast<int>(std::ceil(box_radius / h_));
  S_ = K * h_;
  ns_ = 2 * K + 1;
  nr_ = ns_;
  snap_ = 1e-12 * std::pow(std::max(1.0, 2.0 * u_), p_);

  std::vector<double> raw_grid(static_cast<std::size_t>(nr_) * ns_);
  double max_abs_ds = 0.0, max_abs_dr = 0.0;
  for (int ir = 0; ir < nr_; ++ir)
    for (int is = 0; is < ns_; ++is)
      raw_grid[static_cast<std::size_t>(ir) * ns_ + is] = raw_sr(node_s(is), node_r(ir));
  for (int ir = 0; ir < nr_; ++ir)
    for (int is = 0; is + 1 < ns_; ++is)
      max_abs_ds = std::max(max_abs_ds,
                            std::abs(raw_grid[static_cast<std::size_t>(ir) * ns_ + is + 1] -
                                     raw_grid[static_cast<std::size_t>(ir) * ns_ + is]) /
                                h_);
  for (int ir = 0; ir + 1 < nr_; ++ir)
    for (int is = 0; is < ns_; ++is)
      max_abs_dr = std::max(max_abs_dr,
                            std::abs(raw_grid[(static_cast<std::size_t>(ir) + 1) * ns_ + is] -
                                     raw_grid[static_cast<std::size_t>(ir) * ns_ + is]) /
                                h_);

  auto slope_grid = [](double qmax, int count) {
    std::vector<double> q(static_cast<std::size_t>(2 * count + 1));
    for (int j = -count; j <= count; ++j)
      q[static_cast<std::size_t>(j + count)] = qmax * static_cast<double>(j) / count;
    return q;
  };
  const std::vector<double> qs = slope_grid(1.1 * max_abs_ds + 1e-9, ns_);
  const std::vector<double> qr = slope_grid(1.1 * max_abs_dr + 1e-9, nr_);

  // f* on (qr, qs), then back onto the (r, s) grid.
  const std::vector<double> fstar =
      legendre_transform_2d(raw_grid, nr_, ns_, -S_, h_, -S_, h_, qs, qr);
  std::vector<double> xs(static_cast<std::size_t>(ns_)), xr(static_cast<std::size_t>(nr_));
  for (int is = 0; is < ns_; ++is) xs[static_cast<std::size_t>(is)] = node_s(is);
  for (int ir = 0; ir < nr_; ++ir) xr[static_cast<std::size_t>(ir)] = node_r(ir);
  env_ = legendre_transform_2d(fstar, static_cast<int>(qr.size()), static_cast<int>(qs.size()),
                               qr.front(), qr[1] - qr[0], qs.front(), qs[1] - qs[0], xs, xr);

  // Symmetrize in r, clamp below at zero, snap dust.
  for (int ir = 0; ir < nr_; ++ir) {
    const int mir = nr_ - 1 - ir;
    if (mir < ir) break;
    for (int is = 0; is < ns_; ++is) {
      double v = 0.5 * (env_[static_cast<std::size_t>(ir) * ns_ + is] +
                        env_[static_cast<std::size_t>(mir) * ns_ + is]);
      if (v < snap_) v = 0.0;
      env_[static_cast<std::size_t>(ir) * ns_ + is] = v;
      env_[static_cast<std::size_t>(mir) * ns_ + is] = v;
    }
  }

  const double seg = segment_defect();
  const double seg_tol = 1e-3 * std::pow(S_, p_);
  if (seg > seg_tol)
    throw std::runtime_error("envelope grid too coarse: nonzero on the segment");
  const double dom = dominance_defect();
  if (dom > 1e-9 * std::max(1.0, std::pow(2.0 * S_, p_)))
    throw std::runtime_error("envelope grid too coarse: exceeds the raw density");
}

double ConvexEnvelopeTable::raw_sr(double s, double r) const {
  const double da = (s + u_) * (s + u_) + r * r;
  const double db = (s - u_) * (s - u_) + r * r;
  return std::pow(da, p_ / 4.0) * std::pow(db, p_ / 4.0);
}

double ConvexEnvelopeTable::raw(std::span<const double> v) const {
  double s, r;
  to_sr(v, s, r);
  return raw_sr(s, r);
}

void ConvexEnvelopeTable::to_sr(std::span<const double> v, double& s, double& r) const {
  const int m = static_cast<int>(a_.size());
  s = 0.0;
  double res2 = 0.0;
  for (int c = 0; c < m; ++c) s += (v[static_cast<std::size_t>(c)] - mid_[c]) * axis_[c];
  for (int c = 0; c < m; ++c) {
    const double t = v[static_cast<std::size_t>(c)] - mid_[c] - s * axis_[c];
    res2 += t * t;
  }
  r = std::sqrt(res2);
}

double ConvexEnvelopeTable::interp(double s, double r) const {
  // bilinear on (|r|, s); mirror symmetry in r
  r = std::abs(r);
  const double gs = (s + S_) / h_;
  const double gr = (r + S_) / h_;
  int is = static_cast<int>(std::floor(gs));
  int ir = static_cast<int>(std::floor(gr));
  is = std::clamp(is, 0, ns_ - 2);
  ir = std::clamp(ir, 0, nr_ - 2);
  const double ws = gs - is;
  const double wr = gr - ir;
  const double v00 = env_at(ir, is), v01 = env_at(ir, is + 1);
  const double v10 = env_at(ir + 1, is), v11 = env_at(ir + 1, is + 1);
  return (1 - wr) * ((1 - ws) * v00 + ws * v01) + wr * ((1 - ws) * v10 + ws * v11);
}

double ConvexEnvelopeTable::value_sr(double s, double r) const {
  if (std::abs(s) > S_ || std::abs(r) > S_) return raw_sr(s, r);
  double v = interp(s, r);
  if (v < snap_) v = 0.0;
  return v;
}

double ConvexEnvelopeTable::value(std::span<const double> v) const {
  double s, r;
  to_sr(v, s, r);
  return value_sr(s, r);
}

void ConvexEnvelopeTable::gradient(std::span<const double> v, std::span<double> out) const {
  double s, r;
  to_sr(v, s, r);
  const int m = static_cast<int>(a_.size());
  if (std::abs(s) > S_ - h_ || r > S_ - h_) {
    // outside the tabulated box: raw-density gradient
    const double da = (s + u_) * (s + u_) + r * r;
    const double db = (s - u_) * (s - u_) + r * r;
    const double fa = std::pow(da, p_ / 4.0), fb = std::pow(db, p_ / 4.0);
    const double dfa_ds = (p_ / 2.0) * (s + u_) * std::pow(da, p_ / 4.0 - 1.0);
    const double dfb_ds = (p_ / 2.0) * (s - u_) * std::pow(db, p_ / 4.0 - 1.0);
    const double dfa_dr = (p_ / 2.0) * r * std::pow(da, p_ / 4.0 - 1.0);
    const double dfb_dr = (p_ / 2.0) * r * std::pow(db, p_ / 4.0 - 1.0);
    const double ds = dfa_ds * fb + fa * dfb_ds;
    const double dr = dfa_dr * fb + fa * dfb_dr;
    for (int c = 0; c < m; ++c) {
      const double trans = r > 1e-14 ? (v[static_cast<std::size_t>(c)] - mid_[c] - s * axis_[c]) / r : 0.0;
      out[static_cast<std::size_t>(c)] = ds * axis_[c] + dr * trans;
    }
    return;
  }
  const double ds = (value_sr(s + h_, r) - value_sr(s - h_, r)) / (2.0 * h_);
  // within one cell of the rotation axis the mirrored central difference
  // vanishes like r/h and loses the transverse slope; use the cell slope there
  const double dr = r < h_ ? (value_sr(s, r + h_) - value_sr(s, r)) / h_
                           : (value_sr(s, r + h_) - value_sr(s, r - h_)) / (2.0 * h_);
  for (int c = 0; c < m; ++c) {
    const double trans = r > 1e-14 ? (v[static_cast<std::size_t>(c)] - mid_[c] - s * axis_[c]) / r : 0.0;
    out[static_cast<std::size_t>(c)] = ds * axis_[c] + dr * trans;
  }
}

ConvexEnvelopeTable ConvexEnvelopeTable::restore(Vector a, Vector b, double p, int segment_cells,
                                                 int box_cells, std::vector<double> values) {
  ConvexEnvelopeTable t;
  t.a_ = std::move(a);
  t.b_ = std::move(b);
  const Vector diff = t.b_ - t.a_;
  if (diff.norm() == 0.0 || segment_cells < 1 || box_cells < segment_cells)
    throw std::invalid_argument("invalid envelope table data");
  t.u_ = diff.norm() / 2.0;
  t.mid_ = (t.a_ + t.b_) / 2.0;
  t.axis_ = diff / diff.norm();
  t.p_ = p;
  t.ks_ = segment_cells;
  t.h_ = t.u_ / segment_cells;
  t.S_ = box_cells * t.h_;
  t.ns_ = 2 * box_cells + 1;
  t.nr_ = t.ns_;
  t.snap_ = 1e-12 * std::pow(std::max(1.0, 2.0 * t.u_), p);
  if (values.size() != static_cast<std::size_t>(t.ns_) * t.nr_)
    throw std::invalid_argument("envelope table payload has the wrong size");
  t.env_ = std::move(values);
  return t;
}

double ConvexEnvelopeTable::segment_defect() const {
  double worst = 0.0;
  const int ir0 = (nr_ - 1) / 2;  // r = 0 row
  const int is_mid = (ns_ - 1) / 2;
  for (int is = is_mid - ks_; is <= is_mid + ks_; ++is)
    worst = std::max(worst, std::abs(env_at(ir0, is)));
  return worst;
}

double ConvexEnvelopeTable::dominance_defect() const {
  double worst = -std::numeric_limits<double>::infinity();
  for (int ir = 0; ir < nr_; ++ir)
    for (int is = 0; is < ns_; ++is)
      worst = std::max(worst, env_at(ir, is) - raw_sr(node_s(is), node_r(ir)));
  return worst;
}

}  // namespace filmlab
