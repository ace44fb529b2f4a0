#pragma once

// Advection fields of the linear (magnetic drift + parallel streaming) and
// nonlinear (E x B + parallel acceleration) operators, and foot finding.
//
// Velocities are coordinate rates (dr/dt, dtheta/dt, dphi/dt, dv/dt).

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gyrosl/bspline.hpp"
#include "gyrosl/geometry.hpp"

namespace gyrosl {

enum class Direction { Backward, Forward };
enum class FootMethod { Taylor, Precomputed };

struct Velocity3 {
  double r = 0.0;
  double theta = 0.0;
  double phi = 0.0;
};

struct Displacement {
  double r = 0.0;
  double theta = 0.0;
};

// (dr/dt, dtheta/dt) of the linear operator. Unchecked in r so that it can be
// evaluated on ghost rows and along trajectories leaving the grid.
template <class T>
void linear_velocity_rtheta(const MagneticModel& model, const T& r, const T& theta, double v,
                            T& r_dot, T& theta_dot) {
  if (model.kind() == GeometryKind::Cylindrical) {
    r_dot = T(0.0);
    theta_dot = T(0.0);
    return;
  }
  const auto L = model.local(r, theta);
  const T b_phi = L.B_phi / L.B;
  const T b_star = L.B + v * (b_phi * L.mu0_J_phi) / L.B;
  const T curv = (v * v) / (b_star * L.B);
  r_dot = curv * (-(b_phi * L.dB_dtheta) / r);
  theta_dot = v * L.B_theta / (r * b_star) + curv * (b_phi * L.dB_dr / r);
}

inline double linear_velocity_phi(const MagneticModel& model, double r, double theta, double v) {
  const auto L = model.local(r, theta);
  const double b_theta = L.B_theta / L.B;
  const double b_phi = L.B_phi / L.B;
  const double b_star = L.B + v * (b_phi * L.mu0_J_phi) / L.B;
  return v * L.B_phi / (L.R * b_star) + v * v * L.mu0_J_phi / (L.R * b_star * L.B) +
         v * v / (b_star * L.B) * (-b_theta * L.dB_dr / L.R);
}

// Checked against the radial domain.
Velocity3 linear_advection_field(const MagneticModel& model, double r, double theta, double v);

// Second-order expansion of the steady characteristic through (r, theta) for
// a planar field alpha(r, theta, ar, at) that accepts Dual<double> arguments.
// Returns foot - node.
template <class F>
Displacement taylor_displacement_of(F&& alpha, double r, double theta, double dt, Direction dir) {
  using D = Dual<double>;
  D ar, at;
  alpha(D::variable(r), D(theta), ar, at);
  const double a_r = ar.val, a_t = at.val;
  const double dar_dr = ar.der, dat_dr = at.der;
  alpha(D(r), D::variable(theta), ar, at);
  const double adv_r = a_r * dar_dr + a_t * ar.der;
  const double adv_t = a_r * dat_dr + a_t * at.der;
  const double s = dir == Direction::Backward ? -dt : dt;
  return {s * a_r + 0.5 * dt * dt * adv_r, s * a_t + 0.5 * dt * dt * adv_t};
}

// M midpoint-RK2 substeps of +alpha (Forward) or -alpha (Backward).
// Trajectories leaving [r_lo, r_hi] are frozen at the crossing and `exited`
// is set.
template <class F>
Displacement rk2_displacement_of(F&& alpha, double r, double theta, double dt, int M, Direction dir,
                                 double r_lo, double r_hi, bool& exited) {
  exited = false;
  const double h = (dir == Direction::Backward ? -dt : dt) / M;
  double x = r, y = theta;
  for (int k = 0; k < M; ++k) {
    double ur, ut;
    alpha(x, y, ur, ut);
    double xh = x + 0.5 * h * ur;
    xh = xh < r_lo ? r_lo : (xh > r_hi ? r_hi : xh);
    const double yh = y + 0.5 * h * ut;
    alpha(xh, yh, ur, ut);
    const double xn = x + h * ur;
    const double yn = y + h * ut;
    if (xn < r_lo || xn > r_hi) {
      const double bound = xn < r_lo ? r_lo : r_hi;
      y += (bound - x) / (xn - x) * (yn - y);
      x = bound;
      exited = true;
      break;
    }
    x = xn;
    y = yn;
  }
  return {x - r, y - theta};
}

Displacement taylor_displacement(const MagneticModel& model, double r, double theta, double v, double dt,
                                 Direction dir);
Displacement rk2_displacement(const MagneticModel& model, double r, double theta, double v, double dt, int M,
                              Direction dir, double r_lo, double r_hi, bool& exited);

// Per-node displacements for one macro step of the (r, theta) linear
// advection. Covers `ghost` extra radial rows beyond each end so that padded
// particles have feet too.
class FootTable {
 public:
  FootTable() = default;
  FootTable(const Grid4D& grid, int ghost, double dt, int M, Direction dir, FootMethod method);

  const Grid4D& grid() const { return grid_; }
  int ghost() const { return ghost_; }
  int padded_Nr() const { return grid_.Nr + 2 * ghost_; }
  double dt() const { return dt_; }
  int substeps() const { return M_; }
  Direction direction() const { return dir_; }
  FootMethod method() const { return method_; }
  std::size_t flagged() const { return flagged_; }
  std::size_t& flagged() { return flagged_; }

  // ir_padded in [0, padded_Nr): row ir_padded is radius r_min + (ir_padded - ghost) dr.
  std::size_t index(int iv, int ir_padded, int it) const {
    return (static_cast<std::size_t>(iv) * padded_Nr() + ir_padded) * grid_.Ntheta + it;
  }
  std::size_t slice_size() const { return static_cast<std::size_t>(padded_Nr()) * grid_.Ntheta; }
  const double* disp_r(int iv) const { return dr_.data() + index(iv, 0, 0); }
  const double* disp_theta(int iv) const { return dth_.data() + index(iv, 0, 0); }
  double* disp_r(int iv) { return dr_.data() + index(iv, 0, 0); }
  double* disp_theta(int iv) { return dth_.data() + index(iv, 0, 0); }
  const std::vector<double>& all_r() const { return dr_; }
  const std::vector<double>& all_theta() const { return dth_; }

 private:
  Grid4D grid_;
  int ghost_ = 0;
  double dt_ = 0.0;
  int M_ = 1;
  Direction dir_ = Direction::Backward;
  FootMethod method_ = FootMethod::Precomputed;
  std::vector<double> dr_, dth_;
  std::size_t flagged_ = 0;
};

FootTable build_foot_table(const MagneticModel& model, const Grid4D& grid, int ghost, double dt, int M,
                           Direction dir, FootMethod method);

std::uint64_t foot_table_key(const GeometryParams& geometry, const Grid4D& grid, int ghost, double dt, int M,
                             Direction dir, FootMethod method);
void save_foot_table(const FootTable& table, std::uint64_t key, const std::string& path);
// Returns false when the file is missing or was written for another key.
bool load_foot_table(const std::string& path, std::uint64_t key, FootTable& table);

// Midpoint rule for a general planar field, solved by two fixed-point
// iterations: backward x* = x - dt a((x + x*)/2), forward x* = x + dt a((x + x*)/2).
template <class F>
Displacement midpoint_displacement(F&& alpha, double r, double theta, double dt, Direction dir) {
  const double s = dir == Direction::Backward ? -dt : dt;
  double ar, at;
  alpha(r, theta, ar, at);
  double dr = s * ar, dth = s * at;
  for (int it = 0; it < 2; ++it) {
    alpha(r + 0.5 * dr, theta + 0.5 * dth, ar, at);
    dr = s * ar;
    dth = s * at;
  }
  return {dr, dth};
}

// Electrostatic potential on the (r, theta, phi) grid with per-plane splines
// of Phi and of d Phi / d phi (centered differences, or an injected exact
// derivative).
class PotentialField {
 public:
  using PhiDerivative = std::function<double(double r, double theta, double phi)>;

  PotentialField() = default;
  // phi_nodal has layout [phi][r][theta].
  PotentialField(const Grid4D& grid, std::vector<double> phi_nodal, PhiDerivative exact_dphi = {});

  const Grid4D& grid() const { return grid_; }
  const std::vector<double>& nodal() const { return phi_; }
  bool zero() const { return zero_; }

  // Derivatives (d_r, d_theta, d_phi) at (r, theta) in toroidal plane k.
  void gradient(int k, double r, double theta, double& d_r, double& d_theta, double& d_phi) const;
  double value(int k, double r, double theta) const;

 private:
  Grid4D grid_;
  std::vector<double> phi_;
  std::vector<SplineRep2D> planes_, dphi_planes_;
  PhiDerivative exact_dphi_;
  bool zero_ = true;
};

struct Velocity4 {
  double r = 0.0;
  double theta = 0.0;
  double phi = 0.0;
  double v = 0.0;
};

// E x B rates and parallel acceleration for a potential gradient (coordinate
// derivatives) at a point with local field L.
inline Velocity4 nonlinear_velocity(const LocalField<double>& L, double r, double d_r, double d_theta,
                                    double d_phi, double v) {
  const double b_theta = L.B_theta / L.B;
  const double b_phi = L.B_phi / L.B;
  const double jpar = b_phi * L.mu0_J_phi;
  const double b_star = L.B + v * jpar / L.B;
  const double g_t = d_theta / r, g_p = d_phi / L.R;  // physical gradient components
  const double gB_t = L.dB_dtheta / r;
  Velocity4 u;
  u.r = (b_theta * g_p - b_phi * g_t) / b_star;
  u.theta = (b_phi * d_r / r) / b_star;
  u.phi = (-b_theta * d_r / L.R) / b_star;
  const double bracket_B_phi = b_theta * (-L.dB_dr * g_p) + b_phi * (L.dB_dr * g_t - gB_t * d_r);
  const double b_dot_grad = L.B_theta * g_t + L.B_phi * g_p + v * L.mu0_J_phi * g_p / L.B;
  u.v = -(b_dot_grad + v * bracket_B_phi / L.B) / b_star;
  return u;
}

Velocity4 nonlinear_advection_field(const MagneticModel& model, const PotentialField& phi, double r,
                                    double theta, int k, double v);

}  // namespace gyrosl
