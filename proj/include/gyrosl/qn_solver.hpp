#pragma once

// Quasineutrality: Fourier in (theta, phi), second-order finite differences in
// r with Phi = 0 at both radial ends. Arrays of (r, theta, phi) fields use the
// layout [phi][r][theta].

#include <memory>
#include <span>
#include <vector>

#include "gyrosl/geometry.hpp"

namespace gyrosl {

// rho(r, theta, phi) = (omega / n0(r)) sum_v w_v (f - f_eq) dv
std::vector<double> compute_rho(std::span<const double> f, std::span<const double> f_eq, const Grid4D& grid,
                                const Profiles& profiles, double omega_mu);

// Jacobian-weighted average over (theta, phi) at each radius.
std::vector<double> flux_surface_average(std::span<const double> field, const MagneticModel& model,
                                         const Grid4D& grid);

class QuasiNeutralitySolver {
 public:
  QuasiNeutralitySolver(const Grid4D& grid, const Profiles& profiles, double B0 = 1.0);
  ~QuasiNeutralitySolver();
  QuasiNeutralitySolver(const QuasiNeutralitySolver&) = delete;
  QuasiNeutralitySolver& operator=(const QuasiNeutralitySolver&) = delete;
  QuasiNeutralitySolver(QuasiNeutralitySolver&&) noexcept;
  QuasiNeutralitySolver& operator=(QuasiNeutralitySolver&&) noexcept;

  std::vector<double> solve(std::span<const double> rho) const;

  // Radial operator for one poloidal mode number applied to nodal values
  // (boundary entries of the result are the Dirichlet rows, i.e. identity).
  std::vector<double> apply_radial(int m, bool adiabatic, std::span<const double> phi_r) const;
  // Solves the radial problem for one mode with real data.
  std::vector<double> solve_radial(int m, bool adiabatic, std::span<const double> rhs) const;

  const Grid4D& grid() const { return grid_; }

 private:
  struct Tridiag {
    std::vector<double> lower, diag, upper;
  };
  struct Factor {
    std::vector<double> lower, inv, cp;
  };
  Tridiag assemble(int m, bool adiabatic) const;
  Factor factor(int m, int n, bool adiabatic) const;
  template <class T>
  void solve_factored(const Factor& F, T* x) const;

  Grid4D grid_;
  double B0_;
  std::vector<double> n0_, Te_, n0_half_;
  std::vector<Factor> modes_;  // indexed by m, with the adiabatic term
  Factor zonal_;               // (m, n) = (0, 0)
  struct Plans;
  std::unique_ptr<Plans> plans_;
};

}  // namespace gyrosl
