#pragma once

// Analytic circular-flux-surface equilibrium, normalization constants, the
// phase-space grid, radial profiles, and the motion invariants psi, P_phi, E.
//
// Coordinates (r, theta, phi) are treated as a right-handed orthogonal system
// with scale factors (1, r, R). All quantities are in normalized units:
// m_s = e_s = B0 = T0 = 1, lengths in rho_s, time in 1/Omega.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "gyrosl/dual.hpp"
#include "gyrosl/error.hpp"

namespace gyrosl {

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

struct Units {
  double rho_star = 0.01;
  double m_s = 1.0;
  double e_s = 1.0;
  double B0 = 1.0;
  double T0 = 1.0;

  double v_th0() const { return std::sqrt(T0 / m_s); }
  double omega() const { return e_s * B0 / m_s; }
  double minor_radius() const { return 1.0 / rho_star; }
  double mass_over_charge() const { return m_s / e_s; }
};

enum class GeometryKind { Cylindrical, Toroidal };

struct GeometryParams {
  GeometryKind kind = GeometryKind::Toroidal;
  double rho_star = 0.01;
  double aspect_ratio = 3.0;  // R0 / a
  double q0 = 1.5;
  double qa = 2.8;
  double q_exponent = 2.0;
  double r_min_over_a = 0.1;
  double r_max_over_a = 1.0;
  // Toroidal field function entering P_phi; defaults to B0 * R0.
  std::optional<double> toroidal_flux_function;
  // Gauss-Legendre panels for psi when no closed form applies.
  int psi_panels = 64;

  void validate() const;
};

enum class Coordinate { R, Theta, Phi };

struct FieldVector {
  double r = 0.0;
  double theta = 0.0;
  double phi = 0.0;
  double norm = 0.0;
};

// Everything the drift equations need at one poloidal point.
template <class T>
struct LocalField {
  T R;          // metric factor of phi (R0 in the cylinder)
  T B_theta;    // physical components
  T B_phi;
  T B;          // |B|
  T dB_dr;
  T dB_dtheta;
  T mu0_J_phi;  // toroidal current density; the only nonzero component
  T jacobian;   // J_s
};

class MagneticModel {
 public:
  explicit MagneticModel(const GeometryParams& params);

  const GeometryParams& params() const { return params_; }
  const Units& units() const { return units_; }
  GeometryKind kind() const { return params_.kind; }
  double minor_radius() const { return a_; }
  double major_radius() const { return R0_; }
  double B0() const { return units_.B0; }
  double toroidal_flux_function() const { return I_; }
  double r_min() const { return r_min_; }
  double r_max() const { return r_max_; }

  template <class T>
  T q(const T& r) const {
    using std::pow;
    if (params_.q_exponent == 2.0) {
      T x = r / a_;
      return params_.q0 + (params_.qa - params_.q0) * (x * x);
    }
    return params_.q0 + (params_.qa - params_.q0) * pow(r / a_, params_.q_exponent);
  }

  template <class T>
  T dq_dr(const T& r) const {
    using std::pow;
    if (params_.q_exponent == 2.0) return (params_.qa - params_.q0) * 2.0 * r / (a_ * a_);
    return (params_.qa - params_.q0) * params_.q_exponent *
           pow(r / a_, params_.q_exponent - 1.0) / a_;
  }

  // Unchecked evaluation; valid for any r > 0 with R > 0, including ghost
  // positions outside [r_min, r_max].
  template <class T>
  LocalField<T> local(const T& r, const T& theta) const {
    using std::cos;
    using std::sin;
    using std::sqrt;
    const double B0 = units_.B0;
    LocalField<T> L;
    if (params_.kind == GeometryKind::Cylindrical) {
      L.R = T(R0_);
      L.B_theta = T(0.0);
      L.B_phi = T(B0);
      L.B = T(B0);
      L.dB_dr = T(0.0);
      L.dB_dtheta = T(0.0);
      L.mu0_J_phi = T(0.0);
      L.jacobian = r;
      return L;
    }
    T c = cos(theta);
    T s = sin(theta);
    T R = R0_ + r * c;
    T qr = q(r);
    T dq = dq_dr(r);
    T g = sqrt(R0_ * R0_ + (r * r) / (qr * qr));
    T dg = (r / (qr * qr) - (r * r) * dq / (qr * qr * qr)) / g;
    L.R = R;
    L.B_phi = B0 * R0_ / R;
    L.B_theta = B0 * r / (qr * R);
    L.B = B0 * g / R;
    L.dB_dr = B0 * (dg / R - g * c / (R * R));
    L.dB_dtheta = B0 * g * r * s / (R * R);
    L.mu0_J_phi = B0 * (2.0 / (qr * R) - r * dq / (qr * qr * R) - r * c / (qr * R * R));
    L.jacobian = r * R / R0_;
    return L;
  }

  // Checked against [r_min, r_max]; throws DomainError outside.
  FieldVector magnetic_field(double r, double theta) const;
  double field_norm(double r, double theta) const;
  double mu0_J_phi(double r, double theta) const;
  double b_dot_mu0J(double r, double theta) const;
  double b_star_parallel(double r, double theta, double v_par) const;
  double psi(double r) const;
  double psi_quadrature(double r, int panels) const;
  double p_phi(double r, double theta, double v_par) const;
  double energy(double r, double theta, double v_par, double mu) const;
  double poisson_bracket_B(double r, double theta, Coordinate target) const;
  double jacobian_space(double r, double theta) const;

  void check_radius(double r) const;

 private:
  GeometryParams params_;
  Units units_;
  double a_ = 0.0;
  double R0_ = 0.0;
  double I_ = 0.0;
  double r_min_ = 0.0;
  double r_max_ = 0.0;
};

// Poisson bracket [F, G] = b . (grad F x grad G) for physical gradient
// components (d_r, (1/r) d_theta, (1/R) d_phi); b has no radial component.
inline double poisson_bracket(double b_theta, double b_phi, const double gradF[3],
                              const double gradG[3]) {
  const double cross_theta = gradF[2] * gradG[0] - gradF[0] * gradG[2];
  const double cross_phi = gradF[0] * gradG[1] - gradF[1] * gradG[0];
  return b_theta * cross_theta + b_phi * cross_phi;
}

// Grid in (r, theta, phi, v_par). Storage order is [v][phi][r][theta].
struct Grid4D {
  int Nr = 0;
  int Ntheta = 0;
  int Nphi = 1;
  int Nv = 1;
  double r_min = 0.0;
  double r_max = 1.0;
  double v_min = -5.0;
  double v_max = 5.0;

  double dr() const { return (r_max - r_min) / (Nr - 1); }
  double dtheta() const { return kTwoPi / Ntheta; }
  double dphi() const { return kTwoPi / Nphi; }
  // Quadrature weight of a single v node when Nv == 1.
  double dv() const { return Nv > 1 ? (v_max - v_min) / (Nv - 1) : 1.0; }

  double r(int i) const { return r_min + dr() * i; }
  double theta(int j) const { return dtheta() * j; }
  double phi(int k) const { return dphi() * k; }
  double v(int m) const { return Nv > 1 ? v_min + dv() * m : v_min; }

  std::size_t slice_size() const { return static_cast<std::size_t>(Nr) * Ntheta; }
  std::size_t plane_size() const { return slice_size() * Nphi; }
  std::size_t size() const { return plane_size() * Nv; }
  std::size_t index(int ir, int it, int ip, int iv) const {
    return ((static_cast<std::size_t>(iv) * Nphi + ip) * Nr + ir) * Ntheta + it;
  }

  // Trapezoid weights (half at non-periodic edges), excluding the spacing.
  double radial_weight(int i) const { return (i == 0 || i == Nr - 1) ? 0.5 : 1.0; }
  double v_weight(int m) const {
    if (Nv == 1) return 1.0;
    return (m == 0 || m == Nv - 1) ? 0.5 : 1.0;
  }
  double cell_volume() const { return dr() * dtheta() * dphi() * dv(); }

  bool same_shape(const Grid4D& o) const {
    return Nr == o.Nr && Ntheta == o.Ntheta && Nphi == o.Nphi && Nv == o.Nv &&
           r_min == o.r_min && r_max == o.r_max && v_min == o.v_min && v_max == o.v_max;
  }

  void validate() const;
};

// n0'/n0 = -(kappa/a) cosh^-2((r - r_p)/dr), normalized to 1 at r_p.
struct ProfileParams {
  double kappa_n = 0.0;
  double kappa_Ti = 0.0;
  double kappa_Te = 0.0;
  double center_over_a = 0.55;
  double width_over_a = 0.1;
};

class Profiles {
 public:
  Profiles() = default;
  Profiles(const ProfileParams& params, double minor_radius, const Grid4D& grid);

  static Profiles flat(const Grid4D& grid);

  double n0(double r) const { return generate(params_.kappa_n, r); }
  double Ti(double r) const { return generate(params_.kappa_Ti, r); }
  double Te(double r) const { return generate(params_.kappa_Te, r); }

  const std::vector<double>& n0_nodes() const { return n0_; }
  const std::vector<double>& Ti_nodes() const { return Ti_; }
  const std::vector<double>& Te_nodes() const { return Te_; }
  const ProfileParams& params() const { return params_; }

 private:
  double generate(double kappa, double r) const;

  ProfileParams params_;
  double a_ = 1.0;
  std::vector<double> n0_, Ti_, Te_;
};

}  // namespace gyrosl
