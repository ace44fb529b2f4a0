#include "gyrosl/bspline.hpp"

#include <algorithm>
#include <string>

namespace gyrosl {

namespace {

void check_axis(const SplineAxis& ax) {
  if (ax.n < 4) throw DomainError("spline axis needs at least 4 nodes, got " + std::to_string(ax.n));
  if (!(ax.spacing > 0.0)) throw DomainError("spline axis spacing must be > 0");
}

inline int wrap(int k, int n) {
  k %= n;
  return k < 0 ? k + n : k;
}

}  // namespace

SplineFactorization::SplineFactorization(const SplineAxis& axis) : axis_(axis) {
  check_axis(axis);
  const int n = axis.n;
  std::vector<double> lower(n, 1.0 / 6.0), diag(n, 4.0 / 6.0), upper(n, 1.0 / 6.0);
  if (axis.periodic()) {
    // Cyclic system A = T + u v^T with u = (gamma, 0.., corner), v = (1, 0.., corner / gamma).
    const double corner = 1.0 / 6.0;
    gamma_ = -diag[0];
    diag[0] -= gamma_;
    diag[n - 1] -= corner * corner / gamma_;
    corner_ = corner / gamma_;
  } else {
    const double a = axis.ghost_a(), b = axis.ghost_b();
    diag[0] = (4.0 + a) / 6.0;
    upper[0] = (1.0 + b) / 6.0;
    diag[n - 1] = (4.0 + a) / 6.0;
    lower[n - 1] = (1.0 + b) / 6.0;
  }
  sub_ = lower;
  inv_.resize(n);
  cp_.resize(n);
  inv_[0] = 1.0 / diag[0];
  cp_[0] = upper[0] * inv_[0];
  for (int i = 1; i < n; ++i) {
    const double den = diag[i] - lower[i] * cp_[i - 1];
    if (den == 0.0) throw NumericalError("singular spline interpolation matrix");
    inv_[i] = 1.0 / den;
    cp_[i] = upper[i] * inv_[i];
  }
  if (axis.periodic()) {
    z_.assign(n, 0.0);
    z_[0] = gamma_;
    z_[n - 1] = 1.0 / 6.0;
    // Thomas sweep on z with the modified T.
    z_[0] *= inv_[0];
    for (int i = 1; i < n; ++i) z_[i] = (z_[i] - sub_[i] * z_[i - 1]) * inv_[i];
    for (int i = n - 2; i >= 0; --i) z_[i] -= cp_[i] * z_[i + 1];
    sm_factor_ = 1.0 / (1.0 + z_[0] + corner_ * z_[n - 1]);
  }
}

void SplineFactorization::solve(double* d, std::ptrdiff_t stride) const {
  const int n = axis_.n;
  d[0] *= inv_[0];
  for (int i = 1; i < n; ++i) d[i * stride] = (d[i * stride] - sub_[i] * d[(i - 1) * stride]) * inv_[i];
  for (int i = n - 2; i >= 0; --i) d[i * stride] -= cp_[i] * d[(i + 1) * stride];
  if (axis_.periodic()) {
    const double s = (d[0] + corner_ * d[(n - 1) * stride]) * sm_factor_;
    for (int i = 0; i < n; ++i) d[i * stride] -= s * z_[i];
  }
}

void SplineFactorization::solve_batch(double* d, std::size_t batch) const {
  const int n = axis_.n;
  for (std::size_t b = 0; b < batch; ++b) d[b] *= inv_[0];
  for (int i = 1; i < n; ++i) {
    double* cur = d + i * batch;
    const double* prev = cur - batch;
    const double l = sub_[i], iv = inv_[i];
    for (std::size_t b = 0; b < batch; ++b) cur[b] = (cur[b] - l * prev[b]) * iv;
  }
  for (int i = n - 2; i >= 0; --i) {
    double* cur = d + i * batch;
    const double* next = cur + batch;
    const double c = cp_[i];
    for (std::size_t b = 0; b < batch; ++b) cur[b] -= c * next[b];
  }
  if (axis_.periodic()) {
    const double* last = d + (n - 1) * batch;
    for (std::size_t b = 0; b < batch; ++b) {
      const double s = (d[b] + corner_ * last[b]) * sm_factor_;
      for (int i = 0; i < n; ++i) d[i * batch + b] -= s * z_[i];
    }
  }
}

SplineRep1D::SplineRep1D(SplineAxis axis, std::vector<double> coeffs)
    : axis_(axis), coeffs_(std::move(coeffs)) {
  if (static_cast<int>(coeffs_.size()) != axis_.n) throw DomainError("coefficient count does not match axis");
}

double SplineRep1D::coeff(int k) const {
  const int n = axis_.n;
  if (axis_.periodic()) return coeffs_[wrap(k, n)];
  if (k == -1) return axis_.ghost_a() * coeffs_[0] + axis_.ghost_b() * coeffs_[1];
  if (k == n) return axis_.ghost_a() * coeffs_[n - 1] + axis_.ghost_b() * coeffs_[n - 2];
  return coeffs_[k];
}

double SplineRep1D::eval(double x, EvalStats* stats) const {
  double t;
  bool clamped;
  const int i0 = locate(axis_, x, t, clamped);
  if (stats && clamped) ++stats->clamped;
  double w[4];
  bspline_weights(t, w);
  double sum = 0.0;
  for (int a = 0; a < 4; ++a) sum += w[a] * coeff(i0 - 1 + a);
  return sum;
}

double SplineRep1D::eval_derivative(double x) const {
  double t;
  bool clamped;
  const int i0 = locate(axis_, x, t, clamped);
  double w[4], dw[4];
  bspline_weights_deriv(t, w, dw);
  double sum = 0.0;
  for (int a = 0; a < 4; ++a) sum += dw[a] * coeff(i0 - 1 + a);
  return sum / axis_.spacing;
}

SplineRep1D solve_coeffs_1d(std::span<const double> values, const SplineAxis& axis) {
  if (static_cast<int>(values.size()) != axis.n) throw DomainError("value count does not match axis");
  std::vector<double> c(values.begin(), values.end());
  SplineFactorization(axis).solve(c.data());
  return SplineRep1D(axis, std::move(c));
}

SplineRep2D::SplineRep2D(SplineAxis axis0, SplineAxis axis1, std::vector<double> coeffs)
    : ax0_(axis0), ax1_(axis1), coeffs_(std::move(coeffs)) {
  if (coeffs_.size() != static_cast<std::size_t>(ax0_.n) * ax1_.n)
    throw DomainError("coefficient count does not match axes");
  build_extended();
}

namespace {

// Fills an extended line e[0..n+2] (basis index k at e[k+1]) from its interior.
template <class Get>
void extend_line(const SplineAxis& ax, Get&& get, double* e, std::ptrdiff_t stride) {
  const int n = ax.n;
  for (int k = 0; k < n; ++k) e[(k + 1) * stride] = get(k);
  if (ax.periodic()) {
    e[0] = get(n - 1);
    e[(n + 1) * stride] = get(0);
    e[(n + 2) * stride] = get(1);
  } else {
    const double a = ax.ghost_a(), b = ax.ghost_b();
    e[0] = a * get(0) + b * get(1);
    e[(n + 1) * stride] = a * get(n - 1) + b * get(n - 2);
    e[(n + 2) * stride] = 0.0;
  }
}

}  // namespace

void SplineRep2D::build_extended() {
  const int n0 = ax0_.n, n1 = ax1_.n;
  ext_stride_ = static_cast<std::size_t>(n1) + 3;
  ext_.assign((static_cast<std::size_t>(n0) + 3) * ext_stride_, 0.0);
  for (int k = 0; k < n0; ++k) {
    const double* row = coeffs_.data() + static_cast<std::size_t>(k) * n1;
    extend_line(ax1_, [row](int l) { return row[l]; }, ext_.data() + (k + 1) * ext_stride_, 1);
  }
  const auto stride = static_cast<std::ptrdiff_t>(ext_stride_);
  for (std::size_t col = 0; col < ext_stride_; ++col) {
    double* e = ext_.data() + col;
    // Reads interior rows before ghost rows are written.
    std::vector<double> line(n0);
    for (int k = 0; k < n0; ++k) line[k] = e[(k + 1) * stride];
    extend_line(ax0_, [&line](int k) { return line[k]; }, e, stride);
  }
}

SplineRep2D solve_coeffs_2d(std::span<const double> values, const SplineAxis& axis0,
                            const SplineAxis& axis1) {
  if (values.size() != static_cast<std::size_t>(axis0.n) * axis1.n)
    throw DomainError("value count does not match axes");
  std::vector<double> c(values.begin(), values.end());
  solve_coeffs_2d_inplace(c, SplineFactorization(axis0), SplineFactorization(axis1));
  return SplineRep2D(axis0, axis1, std::move(c));
}

void solve_coeffs_2d_inplace(std::span<double> data, const SplineFactorization& f0,
                             const SplineFactorization& f1) {
  const int n0 = f0.axis().n, n1 = f1.axis().n;
  for (int k = 0; k < n0; ++k) f1.solve(data.data() + static_cast<std::size_t>(k) * n1);
  f0.solve_batch(data.data(), n1);
}

namespace {

// Particle list along one axis: basis index, owning node for displacement, and
// the linear combination of node weights that forms its coefficient.
struct AxisParticles {
  int first = 0, last = 0;  // basis index range, inclusive
};

AxisParticles particle_range(const SplineAxis& ax) {
  if (ax.periodic()) return {0, ax.n - 1};
  return {-1, ax.n};
}

inline int owner(const SplineAxis& ax, int k) {
  if (ax.periodic()) return k;
  return std::clamp(k, 0, ax.n - 1);
}

}  // namespace

DepositStats deposit_2d(const SplineAxis& axis0, const SplineAxis& axis1,
                        std::span<const double> weights, std::span<const double> disp0,
                        std::span<const double> disp1, std::span<double> out,
                        std::span<const double> row_weights) {
  check_axis(axis0);
  check_axis(axis1);
  const int n0 = axis0.n, n1 = axis1.n;
  const std::size_t total = static_cast<std::size_t>(n0) * n1;
  if (weights.size() != total || disp0.size() != total || disp1.size() != total || out.size() != total)
    throw DomainError("deposit: array sizes do not match axes");
  if (!row_weights.empty() && static_cast<int>(row_weights.size()) != n0)
    throw DomainError("deposit: row weight count does not match axis 0");

  // Extended weights so ghost particles carry w[-1] = a w[0] + b w[1].
  SplineRep2D ext(axis0, axis1, std::vector<double>(weights.begin(), weights.end()));
  std::fill(out.begin(), out.end(), 0.0);
  DepositStats st;
  const AxisParticles p0 = particle_range(axis0), p1 = particle_range(axis1);
  const double h0 = axis0.spacing, h1 = axis1.spacing;

  for (int k = p0.first; k <= p0.last; ++k) {
    const int kc = owner(axis0, k);
    for (int l = p1.first; l <= p1.last; ++l) {
      const int lc = owner(axis1, l);
      const double w = ext.ext_coeff(k, l);
      if (w == 0.0) continue;
      st.source_weight += w;
      const std::size_t own = static_cast<std::size_t>(kc) * n1 + lc;
      const double u0 = k + disp0[own] / h0;
      const double u1 = l + disp1[own] / h1;
      const double fl0 = std::floor(u0), fl1 = std::floor(u1);
      const int i0 = static_cast<int>(fl0), j0 = static_cast<int>(fl1);
      double w0[4], w1[4];
      bspline_weights(u0 - fl0, w0);
      bspline_weights(u1 - fl1, w1);
      for (int a = 0; a < 4; ++a) {
        int i = i0 - 1 + a;
        if (axis0.periodic()) {
          i = wrap(i, n0);
        } else if (i < 0 || i >= n0) {
          st.lost_weight += w * w0[a];
          continue;
        }
        const double wa = w * w0[a];
        double* row = out.data() + static_cast<std::size_t>(i) * n1;
        double inside = 0.0;
        for (int b = 0; b < 4; ++b) {
          int j = j0 - 1 + b;
          if (axis1.periodic()) {
            j = wrap(j, n1);
          } else if (j < 0 || j >= n1) {
            st.lost_weight += wa * w1[b];
            continue;
          }
          row[j] += wa * w1[b];
          inside += wa * w1[b];
        }
        st.inside_weighted += inside * (row_weights.empty() ? 1.0 : row_weights[i]);
      }
    }
  }
  return st;
}

DepositStats deposit_1d(const SplineAxis& axis, std::span<const double> weights,
                        std::span<const double> disp, std::span<double> out,
                        std::span<const double> node_weights) {
  check_axis(axis);
  const int n = axis.n;
  if (static_cast<int>(weights.size()) != n || static_cast<int>(disp.size()) != n ||
      static_cast<int>(out.size()) != n)
    throw DomainError("deposit: array sizes do not match axis");
  if (!node_weights.empty() && static_cast<int>(node_weights.size()) != n)
    throw DomainError("deposit: node weight count does not match axis");
  SplineRep1D rep(axis, std::vector<double>(weights.begin(), weights.end()));
  std::fill(out.begin(), out.end(), 0.0);
  DepositStats st;
  const AxisParticles p = particle_range(axis);
  for (int k = p.first; k <= p.last; ++k) {
    const double w = rep.coeff(k);
    if (w == 0.0) continue;
    st.source_weight += w;
    const double u = k + disp[owner(axis, k)] / axis.spacing;
    const double fl = std::floor(u);
    const int i0 = static_cast<int>(fl);
    double ws[4];
    bspline_weights(u - fl, ws);
    for (int a = 0; a < 4; ++a) {
      int i = i0 - 1 + a;
      if (axis.periodic()) {
        i = wrap(i, n);
      } else if (i < 0 || i >= n) {
        st.lost_weight += w * ws[a];
        continue;
      }
      out[i] += w * ws[a];
      st.inside_weighted += w * ws[a] * (node_weights.empty() ? 1.0 : node_weights[i]);
    }
  }
  return st;
}

}  // namespace gyrosl
