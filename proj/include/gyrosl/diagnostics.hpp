#pragma once

// Conservation diagnostics. Every integral uses the same trapezoid rule in r
// and v (half weights at the ends, rectangle rule on periodic axes) and the
// phase-space volume element J_s B*_par dr dtheta dphi dv. Sums run in a
// fixed order so results do not depend on the thread count.

#include <span>
#include <vector>

#include "gyrosl/geometry.hpp"

namespace gyrosl {

// Quadrature weights W(v, r, theta) including J_s B*_par and the cell volume;
// constant along phi.
class PhaseSpaceWeights {
 public:
  PhaseSpaceWeights() = default;
  PhaseSpaceWeights(const MagneticModel& model, const Grid4D& grid);

  const Grid4D& grid() const { return grid_; }
  double at(int iv, int ir, int it) const { return w_[(static_cast<std::size_t>(iv) * grid_.Nr + ir) * grid_.Ntheta + it]; }
  // Weights of one (phi, v) slice, length Nr * Ntheta.
  const double* slice(int iv) const { return w_.data() + static_cast<std::size_t>(iv) * grid_.slice_size(); }
  // J_s B*_par alone (no quadrature factors).
  const double* jacobian_slice(int iv) const { return jb_.data() + static_cast<std::size_t>(iv) * grid_.slice_size(); }

  // sum_nodes W f
  double integrate(std::span<const double> f) const;
  // sum over one (phi, v) slice
  double integrate_slice(const double* f, int iv) const;

 private:
  Grid4D grid_;
  std::vector<double> w_, jb_;
};

struct MassMax {
  double mass = 0.0;
  double fmax = 0.0;
};

struct Norms {
  double u1 = 0.0;
  double uinf = 0.0;
};

struct Energies {
  double kinetic = 0.0;
  double potential = 0.0;
};

MassMax mass_and_max(std::span<const double> f, const PhaseSpaceWeights& w);
Norms norms_vs_initial(std::span<const double> f, std::span<const double> f0, const PhaseSpaceWeights& w);

// E_kin = int (v^2/2)(f - f_eq) dV dv with the phase-space weights;
// E_pot = 1/2 int Phi rho n0 J_s dr dtheta dphi (Phi and rho in [phi][r][theta]).
Energies energies(std::span<const double> f, std::span<const double> f_eq, std::span<const double> phi,
                  std::span<const double> rho, const PhaseSpaceWeights& w, const MagneticModel& model,
                  const Profiles& profiles);

}  // namespace gyrosl
