#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "gyrosl/error.hpp"
#include "gyrosl/qn_solver.hpp"

using namespace gyrosl;

namespace {

Grid4D plane_grid(int Nr, int Nt, int Np) {
  Grid4D g;
  g.Nr = Nr;
  g.Ntheta = Nt;
  g.Nphi = Np;
  g.Nv = 1;
  g.r_min = 0.1;
  g.r_max = 1.0;
  g.v_min = g.v_max = 0.0;
  return g;
}

GeometryParams geom(GeometryKind kind) {
  GeometryParams p;
  p.kind = kind;
  p.rho_star = 0.5;
  return p;
}

// Phi* = sin(k (r - r_min)) cos(3 theta) with flat profiles, B0 = Te = 1:
// rho* = [k^2 sin + ... ] written from the continuous operator by hand.
struct Manufactured {
  double rmin, rmax;
  double k() const { return M_PI / (rmax - rmin); }
  double phi(double r, double th) const { return std::sin(k() * (r - rmin)) * std::cos(3 * th); }
  double rho(double r, double th) const {
    const double s = std::sin(k() * (r - rmin)), c = std::cos(k() * (r - rmin));
    // -(1/r)(r g')' = -(g'' + g'/r)
    const double lap = -(-k() * k() * s + k() * c / r);
    return (lap + 9.0 * s / (r * r) + s) * std::cos(3 * th);
  }
};

// Radii in units of rho_s, so the domain is [0.1 a, a].
double manufactured_error(int Nr, double a) {
  Grid4D g = plane_grid(Nr, 32, 1);
  g.r_min = 0.1 * a;
  g.r_max = a;
  const Profiles prof = Profiles::flat(g);
  QuasiNeutralitySolver qn(g, prof);
  Manufactured ms{g.r_min, g.r_max};
  std::vector<double> rho(g.plane_size()), ref(g.plane_size());
  for (int ir = 0; ir < g.Nr; ++ir)
    for (int it = 0; it < g.Ntheta; ++it) {
      rho[ir * g.Ntheta + it] = ms.rho(g.r(ir), g.theta(it));
      ref[ir * g.Ntheta + it] = ms.phi(g.r(ir), g.theta(it));
    }
  const auto phi = qn.solve(rho);
  double num = 0, den = 0;
  for (std::size_t s = 0; s < phi.size(); ++s) {
    num += (phi[s] - ref[s]) * (phi[s] - ref[s]);
    den += ref[s] * ref[s];
  }
  return std::sqrt(num / den);
}

// Amplitude of mode (m, n) at each radius by a direct sum.
std::complex<double> mode_amplitude(const std::vector<double>& f, const Grid4D& g, int ir, int m, int n) {
  std::complex<double> s = 0;
  for (int ip = 0; ip < g.Nphi; ++ip)
    for (int it = 0; it < g.Ntheta; ++it)
      s += f[(static_cast<std::size_t>(ip) * g.Nr + ir) * g.Ntheta + it] *
           std::polar(1.0, -(m * g.theta(it) + n * g.phi(ip)));
  return s / double(g.Nphi * g.Ntheta);
}

}  // namespace

TEST_CASE("rho from distribution") {
  Grid4D g = plane_grid(6, 8, 4);
  g.Nv = 5;
  g.v_min = -5.0;
  g.v_max = 5.0;
  ProfileParams pp;
  pp.kappa_n = 2.0;
  const Profiles prof(pp, 1.0, g);
  std::vector<double> feq(g.size(), 0.7), f = feq;
  SUBCASE("f equal to f_eq gives zero") {
    const auto rho = compute_rho(f, feq, g, prof, 1.0);
    for (double x : rho) CHECK(x == 0.0);
  }
  SUBCASE("uniform perturbation integrates with trapezoid weights") {
    for (auto& x : f) x += 0.01;
    const auto rho = compute_rho(f, feq, g, prof, 2.0);
    // sum of trapezoid weights times dv over [-5, 5] is 10
    for (int ip = 0; ip < g.Nphi; ++ip)
      for (int ir = 0; ir < g.Nr; ++ir)
        for (int it = 0; it < g.Ntheta; ++it)
          CHECK(rho[(ip * g.Nr + ir) * g.Ntheta + it] ==
                doctest::Approx(2.0 * 0.01 * 10.0 / prof.n0(g.r(ir))).epsilon(1e-13));
  }
  SUBCASE("size mismatch") {
    f.pop_back();
    CHECK_THROWS_AS(compute_rho(f, feq, g, prof, 1.0), DomainError);
  }
}

TEST_CASE("flux-surface average") {
  Grid4D g = plane_grid(5, 64, 4);
  g.r_min = 0.2;  // a = 2
  g.r_max = 2.0;
  std::vector<double> f(g.plane_size());
  for (int ip = 0; ip < g.Nphi; ++ip)
    for (int ir = 0; ir < g.Nr; ++ir)
      for (int it = 0; it < g.Ntheta; ++it) f[(ip * g.Nr + ir) * g.Ntheta + it] = std::cos(g.theta(it));
  SUBCASE("cylinder") {
    const MagneticModel m(geom(GeometryKind::Cylindrical));
    for (double x : flux_surface_average(f, m, g)) CHECK(std::abs(x) < 1e-13);
  }
  SUBCASE("torus weights by the Jacobian") {
    const MagneticModel m(geom(GeometryKind::Toroidal));
    const auto avg = flux_surface_average(f, m, g);
    for (int ir = 0; ir < g.Nr; ++ir)
      CHECK(avg[ir] == doctest::Approx(g.r(ir) / m.major_radius() / 2).epsilon(1e-12));
  }
  SUBCASE("constant is preserved") {
    std::vector<double> c(g.plane_size(), 3.25);
    const MagneticModel m(geom(GeometryKind::Toroidal));
    for (double x : flux_surface_average(c, m, g)) CHECK(x == doctest::Approx(3.25).epsilon(1e-14));
  }
}

TEST_CASE("qn: zero charge gives zero potential") {
  const Grid4D g = plane_grid(20, 16, 4);
  QuasiNeutralitySolver qn(g, Profiles::flat(g));
  const auto phi = qn.solve(std::vector<double>(g.plane_size(), 0.0));
  for (double x : phi) CHECK(x == 0.0);
}

TEST_CASE("qn: manufactured solution") {
  for (double a : {32.0, 40.0, 100.0}) {
    const double e64 = manufactured_error(64, a), e128 = manufactured_error(128, a),
                 e256 = manufactured_error(256, a);
    MESSAGE("a = " << a << ": relative L2 errors " << e64 << " " << e128 << " " << e256);
    CHECK(e256 < 1e-6);
    CHECK(std::log2(e128 / e256) == doctest::Approx(2.0).epsilon(0.05));
    CHECK(std::log2(e64 / e128) == doctest::Approx(2.0).epsilon(0.05));
  }
}

TEST_CASE("qn: zonal input stays zonal") {
  const Grid4D g = plane_grid(40, 16, 4);
  ProfileParams pp;
  pp.kappa_n = 2.2;
  pp.kappa_Te = 6.9;
  QuasiNeutralitySolver qn(g, Profiles(pp, 1.0, g));
  std::vector<double> rho(g.plane_size());
  for (int ip = 0; ip < g.Nphi; ++ip)
    for (int ir = 0; ir < g.Nr; ++ir)
      for (int it = 0; it < g.Ntheta; ++it)
        rho[(ip * g.Nr + ir) * g.Ntheta + it] = std::exp(-std::pow((g.r(ir) - 0.5) / 0.1, 2));
  const auto phi = qn.solve(rho);
  double peak = 0;
  for (double x : phi) peak = std::max(peak, std::abs(x));
  CHECK(peak > 0);
  for (int ip = 0; ip < g.Nphi; ++ip)
    for (int ir = 0; ir < g.Nr; ++ir)
      for (int it = 0; it < g.Ntheta; ++it)
        CHECK(phi[(ip * g.Nr + ir) * g.Ntheta + it] == doctest::Approx(phi[ir * g.Ntheta]).epsilon(1e-13));
  // the zonal mode carries no adiabatic term
  std::vector<double> col(g.Nr);
  for (int ir = 0; ir < g.Nr; ++ir) col[ir] = rho[ir * g.Ntheta];
  const auto ref = qn.solve_radial(0, false, col);
  for (int ir = 0; ir < g.Nr; ++ir) CHECK(phi[ir * g.Ntheta] == doctest::Approx(ref[ir]).epsilon(1e-12));
}

TEST_CASE("qn: single mode in, single mode out") {
  const Grid4D g = plane_grid(30, 16, 8);
  ProfileParams pp;
  pp.kappa_n = 2.2;
  QuasiNeutralitySolver qn(g, Profiles(pp, 1.0, g));
  const int m0 = 2, n0 = 3;
  std::vector<double> rho(g.plane_size());
  for (int ip = 0; ip < g.Nphi; ++ip)
    for (int ir = 0; ir < g.Nr; ++ir)
      for (int it = 0; it < g.Ntheta; ++it)
        rho[(ip * g.Nr + ir) * g.Ntheta + it] =
            std::sin(M_PI * (g.r(ir) - 0.1) / 0.9) * std::cos(m0 * g.theta(it) + n0 * g.phi(ip) + 0.3);
  const auto phi = qn.solve(rho);
  const int ir = g.Nr / 2;
  const double main = std::abs(mode_amplitude(phi, g, ir, m0, n0));
  CHECK(main > 1e-3);
  for (int m = 0; m <= g.Ntheta / 2; ++m)
    for (int n = -g.Nphi / 2 + 1; n <= g.Nphi / 2; ++n) {
      if (m == m0 && n == n0) continue;
      CHECK(std::abs(mode_amplitude(phi, g, ir, m, n)) < 1e-13 * main);
    }
  // the mode solves its own radial problem
  std::vector<double> col(g.Nr);
  for (int i = 0; i < g.Nr; ++i) col[i] = std::sin(M_PI * (g.r(i) - 0.1) / 0.9) / 2;
  const auto ref = qn.solve_radial(m0, true, col);
  CHECK(main == doctest::Approx(std::abs(ref[ir])).epsilon(1e-12));
}

TEST_CASE("qn: radial operator is symmetric with weight n0 r dr") {
  const Grid4D g = plane_grid(50, 16, 1);
  ProfileParams pp;
  pp.kappa_n = 2.2;
  pp.kappa_Te = 6.9;
  const Profiles prof(pp, 1.0, g);
  QuasiNeutralitySolver qn(g, prof);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int m : {0, 1, 5}) {
    std::vector<double> a(g.Nr), b(g.Nr);
    for (int i = 1; i < g.Nr - 1; ++i) {
      a[i] = U(rng);
      b[i] = U(rng);
    }
    const auto La = qn.apply_radial(m, true, a), Lb = qn.apply_radial(m, true, b);
    double lhs = 0, rhs = 0, scale = 0;
    for (int i = 1; i < g.Nr - 1; ++i) {
      const double w = prof.n0(g.r(i)) * g.r(i) * g.dr();
      lhs += w * a[i] * Lb[i];
      rhs += w * La[i] * b[i];
      scale += w * std::abs(a[i] * Lb[i]);
    }
    CHECK(std::abs(lhs - rhs) < 1e-10 * scale);
    // positive definite on the interior
    double energy = 0;
    for (int i = 1; i < g.Nr - 1; ++i) energy += prof.n0(g.r(i)) * g.r(i) * g.dr() * a[i] * La[i];
    CHECK(energy > 0);
  }
}

TEST_CASE("qn: solve inverts the radial operator") {
  const Grid4D g = plane_grid(40, 8, 1);
  ProfileParams pp;
  pp.kappa_n = 2.2;
  QuasiNeutralitySolver qn(g, Profiles(pp, 1.0, g));
  std::vector<double> x(g.Nr);
  for (int i = 1; i < g.Nr - 1; ++i) x[i] = std::cos(0.3 * i) + 0.1 * i;
  const auto Lx = qn.apply_radial(4, true, x);
  const auto y = qn.solve_radial(4, true, Lx);
  for (int i = 0; i < g.Nr; ++i) CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-12));
}

TEST_CASE("qn: non-finite charge is reported") {
  const Grid4D g = plane_grid(10, 8, 4);
  QuasiNeutralitySolver qn(g, Profiles::flat(g));
  std::vector<double> rho(g.plane_size(), 0.0);
  rho[5] = std::nan("");
  CHECK_THROWS_AS(qn.solve(rho), NumericalError);
}
