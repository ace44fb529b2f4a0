#include "gyrosl/qn_solver.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <sstream>

namespace gyrosl {

std::vector<double> compute_rho(std::span<const double> f, std::span<const double> f_eq, const Grid4D& grid,
                                const Profiles& profiles, double omega_mu) {
  if (f.size() != grid.size() || f_eq.size() != grid.size())
    throw DomainError("compute_rho: distribution arrays do not match the grid");
  const std::size_t plane = grid.plane_size();
  std::vector<double> rho(plane, 0.0);
  for (int iv = 0; iv < grid.Nv; ++iv) {
    const double w = grid.v_weight(iv) * grid.dv();
    const std::size_t off = static_cast<std::size_t>(iv) * plane;
    for (std::size_t s = 0; s < plane; ++s) rho[s] += w * (f[off + s] - f_eq[off + s]);
  }
  const auto& n0 = profiles.n0_nodes();
  for (int ip = 0; ip < grid.Nphi; ++ip)
    for (int ir = 0; ir < grid.Nr; ++ir) {
      const double scale = omega_mu / n0[ir];
      double* row = rho.data() + (static_cast<std::size_t>(ip) * grid.Nr + ir) * grid.Ntheta;
      for (int it = 0; it < grid.Ntheta; ++it) row[it] *= scale;
    }
  return rho;
}

std::vector<double> flux_surface_average(std::span<const double> field, const MagneticModel& model,
                                         const Grid4D& grid) {
  if (field.size() != grid.plane_size()) throw DomainError("flux_surface_average: array does not match the grid");
  std::vector<double> avg(grid.Nr);
  std::vector<double> jac(grid.Ntheta);
  for (int ir = 0; ir < grid.Nr; ++ir) {
    double wsum = 0.0;
    for (int it = 0; it < grid.Ntheta; ++it) {
      jac[it] = model.local(grid.r(ir), grid.theta(it)).jacobian;
      wsum += jac[it];
    }
    double sum = 0.0;
    for (int ip = 0; ip < grid.Nphi; ++ip) {
      const double* row = field.data() + (static_cast<std::size_t>(ip) * grid.Nr + ir) * grid.Ntheta;
      for (int it = 0; it < grid.Ntheta; ++it) sum += row[it] * jac[it];
    }
    avg[ir] = sum / (wsum * grid.Nphi);
  }
  return avg;
}

struct QuasiNeutralitySolver::Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  ~Plans() {
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
    if (real) fftw_free(real);
    if (spec) fftw_free(spec);
  }
};

QuasiNeutralitySolver::QuasiNeutralitySolver(const Grid4D& grid, const Profiles& profiles, double B0)
    : grid_(grid), B0_(B0), n0_(profiles.n0_nodes()), Te_(profiles.Te_nodes()) {
  grid_.validate();
  if (static_cast<int>(n0_.size()) != grid_.Nr) throw DomainError("profiles do not match the radial grid");
  n0_half_.resize(grid_.Nr - 1);
  for (int i = 0; i + 1 < grid_.Nr; ++i) n0_half_[i] = profiles.n0(grid_.r(i) + 0.5 * grid_.dr());
  const int mmax = grid_.Ntheta / 2;
  modes_.reserve(mmax + 1);
  for (int m = 0; m <= mmax; ++m) modes_.push_back(factor(m, -1, true));
  zonal_ = factor(0, 0, false);

  plans_ = std::make_unique<Plans>();
  const int nc = grid_.Ntheta / 2 + 1;
  plans_->real = fftw_alloc_real(static_cast<std::size_t>(grid_.Nphi) * grid_.Ntheta);
  plans_->spec = fftw_alloc_complex(static_cast<std::size_t>(grid_.Nphi) * nc);
  // FFTW_ESTIMATE keeps the algorithm choice, and so the rounding, fixed.
  plans_->forward = fftw_plan_dft_r2c_2d(grid_.Nphi, grid_.Ntheta, plans_->real, plans_->spec, FFTW_ESTIMATE);
  plans_->backward = fftw_plan_dft_c2r_2d(grid_.Nphi, grid_.Ntheta, plans_->spec, plans_->real, FFTW_ESTIMATE);
  if (!plans_->forward || !plans_->backward) throw NumericalError("FFT planning failed");
}

QuasiNeutralitySolver::~QuasiNeutralitySolver() = default;
QuasiNeutralitySolver::QuasiNeutralitySolver(QuasiNeutralitySolver&&) noexcept = default;
QuasiNeutralitySolver& QuasiNeutralitySolver::operator=(QuasiNeutralitySolver&&) noexcept = default;

QuasiNeutralitySolver::Tridiag QuasiNeutralitySolver::assemble(int m, bool adiabatic) const {
  const int N = grid_.Nr;
  const double dr = grid_.dr();
  Tridiag T;
  T.lower.assign(N, 0.0);
  T.diag.assign(N, 1.0);
  T.upper.assign(N, 0.0);
  for (int i = 1; i < N - 1; ++i) {
    const double r = grid_.r(i);
    const double wm = (r - 0.5 * dr) * n0_half_[i - 1];
    const double wp = (r + 0.5 * dr) * n0_half_[i];
    const double c = 1.0 / (n0_[i] * r * B0_ * dr * dr);
    T.lower[i] = i > 1 ? -c * wm : 0.0;
    T.upper[i] = i < N - 2 ? -c * wp : 0.0;
    T.diag[i] = c * (wm + wp) + static_cast<double>(m) * m / (r * r * B0_) + (adiabatic ? 1.0 / Te_[i] : 0.0);
  }
  return T;
}

QuasiNeutralitySolver::Factor QuasiNeutralitySolver::factor(int m, int n, bool adiabatic) const {
  const Tridiag T = assemble(m, adiabatic);
  const int N = grid_.Nr;
  Factor F;
  F.lower = T.lower;
  F.inv.resize(N);
  F.cp.resize(N);
  double den = T.diag[0];
  for (int i = 0; i < N; ++i) {
    if (i > 0) den = T.diag[i] - T.lower[i] * F.cp[i - 1];
    if (den == 0.0 || !std::isfinite(den)) {
      std::ostringstream os;
      os << "singular radial quasineutrality matrix for mode m=" << m;
      if (n >= 0) os << ", n=" << n;
      os << " at row " << i;
      throw NumericalError(os.str());
    }
    F.inv[i] = 1.0 / den;
    F.cp[i] = T.upper[i] * F.inv[i];
  }
  return F;
}

template <class T>
void QuasiNeutralitySolver::solve_factored(const Factor& F, T* x) const {
  const int N = grid_.Nr;
  x[0] = T(0.0);
  x[N - 1] = T(0.0);
  x[0] *= F.inv[0];
  for (int i = 1; i < N; ++i) x[i] = (x[i] - F.lower[i] * x[i - 1]) * F.inv[i];
  for (int i = N - 2; i >= 0; --i) x[i] -= F.cp[i] * x[i + 1];
}

std::vector<double> QuasiNeutralitySolver::apply_radial(int m, bool adiabatic, std::span<const double> phi) const {
  const Tridiag T = assemble(m, adiabatic);
  const int N = grid_.Nr;
  std::vector<double> out(N);
  for (int i = 0; i < N; ++i) {
    double s = T.diag[i] * phi[i];
    if (i > 0) s += T.lower[i] * phi[i - 1];
    if (i < N - 1) s += T.upper[i] * phi[i + 1];
    out[i] = s;
  }
  // Rows next to the boundary drop the neighbor term only because Phi = 0 there.
  if (N > 2) {
    const double dr = grid_.dr();
    const double c1 = 1.0 / (n0_[1] * grid_.r(1) * B0_ * dr * dr);
    out[1] -= c1 * (grid_.r(1) - 0.5 * dr) * n0_half_[0] * phi[0];
    const int j = N - 2;
    const double cj = 1.0 / (n0_[j] * grid_.r(j) * B0_ * dr * dr);
    out[j] -= cj * (grid_.r(j) + 0.5 * dr) * n0_half_[j] * phi[N - 1];
  }
  return out;
}

std::vector<double> QuasiNeutralitySolver::solve_radial(int m, bool adiabatic, std::span<const double> rhs) const {
  std::vector<double> x(rhs.begin(), rhs.end());
  const Factor F = (m == 0 && !adiabatic) ? zonal_ : factor(m, -1, adiabatic);
  solve_factored(F, x.data());
  return x;
}

std::vector<double> QuasiNeutralitySolver::solve(std::span<const double> rho) const {
  const int Nr = grid_.Nr, Nt = grid_.Ntheta, Np = grid_.Nphi;
  const int nc = Nt / 2 + 1;
  if (rho.size() != grid_.plane_size()) throw DomainError("qn_solve: rho does not match the grid");
  for (std::size_t s = 0; s < rho.size(); ++s)
    if (!std::isfinite(rho[s])) {
      std::ostringstream os;
      os << "non-finite charge density at flat index " << s;
      throw NumericalError(os.str());
    }

  using C = std::complex<double>;
  const std::size_t plane_c = static_cast<std::size_t>(Np) * nc;
  std::vector<C> spec(static_cast<std::size_t>(Nr) * plane_c);
  double* real = plans_->real;
  fftw_complex* sp = plans_->spec;
  for (int ir = 0; ir < Nr; ++ir) {
    for (int ip = 0; ip < Np; ++ip)
      for (int it = 0; it < Nt; ++it)
        real[ip * Nt + it] = rho[(static_cast<std::size_t>(ip) * Nr + ir) * Nt + it];
    fftw_execute_dft_r2c(plans_->forward, real, sp);
    for (std::size_t k = 0; k < plane_c; ++k) spec[ir * plane_c + k] = C(sp[k][0], sp[k][1]);
  }

  std::vector<C> col(Nr);
  for (int ip = 0; ip < Np; ++ip)
    for (int m = 0; m < nc; ++m) {
      const std::size_t k = static_cast<std::size_t>(ip) * nc + m;
      for (int ir = 0; ir < Nr; ++ir) col[ir] = spec[ir * plane_c + k];
      solve_factored((ip == 0 && m == 0) ? zonal_ : modes_[m], col.data());
      for (int ir = 0; ir < Nr; ++ir) spec[ir * plane_c + k] = col[ir];
    }

  std::vector<double> phi(grid_.plane_size());
  const double norm = 1.0 / (static_cast<double>(Np) * Nt);
  for (int ir = 0; ir < Nr; ++ir) {
    for (std::size_t k = 0; k < plane_c; ++k) {
      sp[k][0] = spec[ir * plane_c + k].real();
      sp[k][1] = spec[ir * plane_c + k].imag();
    }
    fftw_execute_dft_c2r(plans_->backward, sp, real);
    for (int ip = 0; ip < Np; ++ip)
      for (int it = 0; it < Nt; ++it)
        phi[(static_cast<std::size_t>(ip) * Nr + ir) * Nt + it] = real[ip * Nt + it] * norm;
  }
  return phi;
}

}  // namespace gyrosl
