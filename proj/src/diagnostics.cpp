#include "gyrosl/diagnostics.hpp"

#include <algorithm>
#include <cmath>

namespace gyrosl {

PhaseSpaceWeights::PhaseSpaceWeights(const MagneticModel& model, const Grid4D& grid) : grid_(grid) {
  grid_.validate();
  const std::size_t slice = grid_.slice_size();
  w_.resize(slice * grid_.Nv);
  jb_.resize(slice * grid_.Nv);
  const double cell = grid_.cell_volume();
  for (int iv = 0; iv < grid_.Nv; ++iv) {
    const double v = grid_.v(iv);
    for (int ir = 0; ir < grid_.Nr; ++ir) {
      const double r = grid_.r(ir);
      for (int it = 0; it < grid_.Ntheta; ++it) {
        const auto L = model.local(r, grid_.theta(it));
        const double b_star = L.B + v * (L.B_phi / L.B) * L.mu0_J_phi / L.B;
        const std::size_t s = static_cast<std::size_t>(iv) * slice + static_cast<std::size_t>(ir) * grid_.Ntheta + it;
        jb_[s] = L.jacobian * b_star;
        w_[s] = jb_[s] * grid_.radial_weight(ir) * grid_.v_weight(iv) * cell;
      }
    }
  }
}

double PhaseSpaceWeights::integrate_slice(const double* f, int iv) const {
  const double* w = slice(iv);
  double sum = 0.0;
  for (std::size_t s = 0, n = grid_.slice_size(); s < n; ++s) sum += w[s] * f[s];
  return sum;
}

double PhaseSpaceWeights::integrate(std::span<const double> f) const {
  if (f.size() != grid_.size()) throw DomainError("integrate: array does not match the grid");
  const int nslices = grid_.Nv * grid_.Nphi;
  const std::size_t slice = grid_.slice_size();
  std::vector<double> partial(nslices);
#pragma omp parallel for schedule(static)
  for (int s = 0; s < nslices; ++s) partial[s] = integrate_slice(f.data() + s * slice, s / grid_.Nphi);
  double sum = 0.0;
  for (double p : partial) sum += p;
  return sum;
}

MassMax mass_and_max(std::span<const double> f, const PhaseSpaceWeights& w) {
  MassMax out;
  out.mass = w.integrate(f);
  for (double x : f) out.fmax = std::max(out.fmax, std::abs(x));
  return out;
}

Norms norms_vs_initial(std::span<const double> f, std::span<const double> f0, const PhaseSpaceWeights& w) {
  const Grid4D& g = w.grid();
  if (f.size() != g.size() || f0.size() != g.size()) throw DomainError("norms: arrays do not match the grid");
  const int nslices = g.Nv * g.Nphi;
  const std::size_t slice = g.slice_size();
  std::vector<double> l1(nslices), linf(nslices);
#pragma omp parallel for schedule(static)
  for (int s = 0; s < nslices; ++s) {
    const double* a = f.data() + s * slice;
    const double* b = f0.data() + s * slice;
    const double* ws = w.slice(s / g.Nphi);
    double sum = 0.0, mx = 0.0;
    for (std::size_t k = 0; k < slice; ++k) {
      const double d = std::abs(a[k] - b[k]);
      sum += ws[k] * d;
      mx = std::max(mx, d);
    }
    l1[s] = sum;
    linf[s] = mx;
  }
  Norms n;
  for (int s = 0; s < nslices; ++s) {
    n.u1 += l1[s];
    n.uinf = std::max(n.uinf, linf[s]);
  }
  return n;
}

Energies energies(std::span<const double> f, std::span<const double> f_eq, std::span<const double> phi,
                  std::span<const double> rho, const PhaseSpaceWeights& w, const MagneticModel& model,
                  const Profiles& profiles) {
  const Grid4D& g = w.grid();
  if (f.size() != g.size() || f_eq.size() != g.size()) throw DomainError("energies: arrays do not match the grid");
  const int nslices = g.Nv * g.Nphi;
  const std::size_t slice = g.slice_size();
  std::vector<double> part(nslices);
#pragma omp parallel for schedule(static)
  for (int s = 0; s < nslices; ++s) {
    const int iv = s / g.Nphi;
    const double v = g.v(iv);
    const double* a = f.data() + s * slice;
    const double* b = f_eq.data() + s * slice;
    const double* ws = w.slice(iv);
    double sum = 0.0;
    for (std::size_t k = 0; k < slice; ++k) sum += ws[k] * (a[k] - b[k]);
    part[s] = 0.5 * v * v * sum;
  }
  Energies e;
  for (double p : part) e.kinetic += p;

  if (phi.empty()) return e;
  if (phi.size() != g.plane_size() || rho.size() != g.plane_size())
    throw DomainError("energies: potential arrays do not match the grid");
  const auto& n0 = profiles.n0_nodes();
  const double dvol = g.dr() * g.dtheta() * g.dphi();
  double sum = 0.0;
  for (int ip = 0; ip < g.Nphi; ++ip)
    for (int ir = 0; ir < g.Nr; ++ir) {
      const double wr = g.radial_weight(ir) * n0[ir] * dvol;
      for (int it = 0; it < g.Ntheta; ++it) {
        const std::size_t s = (static_cast<std::size_t>(ip) * g.Nr + ir) * g.Ntheta + it;
        sum += wr * model.local(g.r(ir), g.theta(it)).jacobian * phi[s] * rho[s];
      }
    }
  e.potential = 0.5 * sum;
  return e;
}

}  // namespace gyrosl
