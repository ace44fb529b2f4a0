#pragma once

// Uniform cubic B-splines: coefficient solves, tensor-product evaluation and
// mass-conserving deposition.
//
// Every axis carries exactly one coefficient per node. On non-periodic axes
// the two ghost coefficients beyond each end are eliminated through the
// boundary condition, w[-1] = a w[0] + b w[1]:
//   Natural (s'' = 0):          a = 2, b = -1
//   ClampedZeroSlope (s' = 0):  a = 0, b = 1
// so node 0 owns the basis S_0 + a S_{-1} and node 1 owns S_1 + b S_{-1}.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "gyrosl/error.hpp"

namespace gyrosl {

enum class BoundaryCondition { Periodic, Natural, ClampedZeroSlope };

struct SplineAxis {
  int n = 0;
  double origin = 0.0;
  double spacing = 1.0;
  BoundaryCondition bc = BoundaryCondition::Natural;

  bool periodic() const { return bc == BoundaryCondition::Periodic; }
  double node(int i) const { return origin + spacing * i; }
  double last() const { return node(n - 1); }
  double period() const { return spacing * n; }
  double ghost_a() const { return bc == BoundaryCondition::Natural ? 2.0 : 0.0; }
  double ghost_b() const { return bc == BoundaryCondition::Natural ? -1.0 : 1.0; }
};

// Cubic B-spline with unit knot spacing, support (-2, 2).
inline double cubic_bspline(double x) {
  x = std::abs(x);
  if (x >= 2.0) return 0.0;
  if (x >= 1.0) {
    const double y = 2.0 - x;
    return y * y * y / 6.0;
  }
  return (3.0 * x * x * x - 6.0 * x * x + 4.0) / 6.0;
}

// Basis values for the nodes i0-1 .. i0+2 at fractional offset t in [0, 1].
inline void bspline_weights(double t, double w[4]) {
  const double s = 1.0 - t;
  const double t2 = t * t;
  const double t3 = t2 * t;
  w[0] = s * s * s / 6.0;
  w[1] = (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0;
  w[2] = (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0;
  w[3] = t3 / 6.0;
}

inline void bspline_weights_deriv(double t, double w[4], double dw[4]) {
  bspline_weights(t, w);
  const double s = 1.0 - t;
  dw[0] = -0.5 * s * s;
  dw[1] = 0.5 * (3.0 * t * t - 4.0 * t);
  dw[2] = 0.5 * (-3.0 * t * t + 2.0 * t + 1.0);
  dw[3] = 0.5 * t * t;
}

// Locates x on an axis: returns the cell index i0 (stencil i0-1..i0+2) and
// the fractional offset. Non-periodic positions are clamped to the end nodes;
// `clamped` is set when that happens.
inline int locate(const SplineAxis& ax, double x, double& t, bool& clamped) {
  double u = (x - ax.origin) / ax.spacing;
  clamped = false;
  if (ax.periodic()) {
    u -= ax.n * std::floor(u / ax.n);
    int i0 = static_cast<int>(u);
    if (i0 >= ax.n) i0 = ax.n - 1;  // u == n after rounding
    t = u - i0;
    return i0;
  }
  const double umax = ax.n - 1;
  if (u < 0.0) {
    u = 0.0;
    clamped = true;
  } else if (u > umax) {
    u = umax;
    clamped = true;
  }
  int i0 = static_cast<int>(u);
  if (i0 > ax.n - 2) i0 = ax.n - 2;
  t = u - i0;
  return i0;
}

// Prefactored interpolation matrix for one axis; solves many right-hand sides.
class SplineFactorization {
 public:
  SplineFactorization() = default;
  explicit SplineFactorization(const SplineAxis& axis);

  const SplineAxis& axis() const { return axis_; }

  // One line with arbitrary stride, in place: values -> coefficients.
  void solve(double* data, std::ptrdiff_t stride = 1) const;
  // `batch` independent lines stored as data[i * batch + b], in place.
  void solve_batch(double* data, std::size_t batch) const;

 private:
  SplineAxis axis_;
  std::vector<double> sub_, inv_, cp_;
  // Sherman-Morrison correction for the cyclic system.
  std::vector<double> z_;
  double gamma_ = 0.0;
  double corner_ = 0.0;
  double sm_factor_ = 0.0;
};

struct EvalStats {
  std::size_t clamped = 0;
};

class SplineRep1D {
 public:
  SplineRep1D() = default;
  SplineRep1D(SplineAxis axis, std::vector<double> coeffs);

  const SplineAxis& axis() const { return axis_; }
  const std::vector<double>& coefficients() const { return coeffs_; }

  // Extended coefficient at basis index k in [-1, n] (non-periodic) or any k (periodic).
  double coeff(int k) const;
  double eval(double x, EvalStats* stats = nullptr) const;
  double eval_derivative(double x) const;

 private:
  SplineAxis axis_;
  std::vector<double> coeffs_;
};

SplineRep1D solve_coeffs_1d(std::span<const double> values, const SplineAxis& axis);

// Tensor-product spline over a (axis0, axis1) slice stored row-major with
// axis1 contiguous.
class SplineRep2D {
 public:
  SplineRep2D() = default;
  SplineRep2D(SplineAxis axis0, SplineAxis axis1, std::vector<double> coeffs);

  const SplineAxis& axis0() const { return ax0_; }
  const SplineAxis& axis1() const { return ax1_; }
  const std::vector<double>& coefficients() const { return coeffs_; }

  double eval(double x, double y, EvalStats* stats = nullptr) const {
    double t0, t1;
    bool c0, c1;
    const int i0 = locate(ax0_, x, t0, c0);
    const int j0 = locate(ax1_, y, t1, c1);
    if (stats && (c0 || c1)) ++stats->clamped;
    double w0[4], w1[4];
    bspline_weights(t0, w0);
    bspline_weights(t1, w1);
    return contract(i0, j0, w0, w1);
  }

  // Value and gradient with respect to the axis coordinates.
  void eval_grad(double x, double y, double& value, double& d0, double& d1) const {
    double t0, t1;
    bool c0, c1;
    const int i0 = locate(ax0_, x, t0, c0);
    const int j0 = locate(ax1_, y, t1, c1);
    double w0[4], dw0[4], w1[4], dw1[4];
    bspline_weights_deriv(t0, w0, dw0);
    bspline_weights_deriv(t1, w1, dw1);
    value = 0.0;
    d0 = 0.0;
    d1 = 0.0;
    const double* base = ext_.data() + static_cast<std::size_t>(i0) * ext_stride_ + j0;
    for (int a = 0; a < 4; ++a) {
      const double* row = base + a * ext_stride_;
      double rv = 0.0, rd = 0.0;
      for (int b = 0; b < 4; ++b) {
        rv += w1[b] * row[b];
        rd += dw1[b] * row[b];
      }
      value += w0[a] * rv;
      d0 += dw0[a] * rv;
      d1 += w0[a] * rd;
    }
    d0 /= ax0_.spacing;
    d1 /= ax1_.spacing;
  }

  // Extended coefficient at basis index (k, l), k in [-1, n0+1], l in [-1, n1+1].
  double ext_coeff(int k, int l) const {
    return ext_[static_cast<std::size_t>(k + 1) * ext_stride_ + static_cast<std::size_t>(l + 1)];
  }

  double contract(int i0, int j0, const double w0[4], const double w1[4]) const {
    const double* base = ext_.data() + static_cast<std::size_t>(i0) * ext_stride_ + j0;
    double sum = 0.0;
    for (int a = 0; a < 4; ++a) {
      const double* row = base + a * ext_stride_;
      sum += w0[a] * (w1[0] * row[0] + w1[1] * row[1] + w1[2] * row[2] + w1[3] * row[3]);
    }
    return sum;
  }

 private:
  void build_extended();

  SplineAxis ax0_, ax1_;
  std::vector<double> coeffs_;
  // Coefficients over basis indices [-1, n+1] in both axes with ghost and
  // periodic images filled in; entry (k, l) lives at (k+1, l+1).
  std::vector<double> ext_;
  std::size_t ext_stride_ = 0;
};

SplineRep2D solve_coeffs_2d(std::span<const double> values, const SplineAxis& axis0,
                            const SplineAxis& axis1);

// Same solve with caller-owned factorizations and storage (hot path).
void solve_coeffs_2d_inplace(std::span<double> data, const SplineFactorization& f0,
                             const SplineFactorization& f1);

struct DepositStats {
  double source_weight = 0.0;  // sum of weights times basis mass (1 + ghost factor)
  double lost_weight = 0.0;    // stencil weight landing outside non-periodic node range
  double inside_weighted = 0.0;  // sum over deposits of (axis0 quadrature weight) x S x S
};

// out(i, j) = sum_kl w_kl S(x_i - x*_k) S(y_j - y*_l) with x*_k = x_k + disp0(k, l)
// and y*_l = y_l + disp1(k, l). `out` is overwritten. `row_weights`, when
// non-empty, gives per-row quadrature weights for `inside_weighted`.
DepositStats deposit_2d(const SplineAxis& axis0, const SplineAxis& axis1,
                        std::span<const double> weights, std::span<const double> disp0,
                        std::span<const double> disp1, std::span<double> out,
                        std::span<const double> row_weights = {});

// One-dimensional deposition along a single line.
DepositStats deposit_1d(const SplineAxis& axis, std::span<const double> weights,
                        std::span<const double> disp, std::span<double> out,
                        std::span<const double> node_weights = {});

}  // namespace gyrosl
