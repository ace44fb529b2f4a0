#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "gyrosl/geometry.hpp"

using namespace gyrosl;

namespace {

GeometryParams toroidal_params() {
  GeometryParams p;
  p.kind = GeometryKind::Toroidal;
  p.rho_star = 0.01;
  return p;
}

GeometryParams cylindrical_params() {
  GeometryParams p = toroidal_params();
  p.kind = GeometryKind::Cylindrical;
  return p;
}

// Field components written out independently of MagneticModel::local.
struct RefField {
  double a, R0, q0, qa;
  double q(double r) const { return q0 + (qa - q0) * (r / a) * (r / a); }
  double R(double r, double th) const { return R0 + r * std::cos(th); }
  double Bphi(double r, double th) const { return R0 / R(r, th); }
  double Btheta(double r, double th) const { return r / (q(r) * R0) * R0 / R(r, th); }
  double B(double r, double th) const { return std::hypot(Btheta(r, th), Bphi(r, th)); }
};

RefField ref_for(const MagneticModel& m) {
  return {m.minor_radius(), m.major_radius(), m.params().q0, m.params().qa};
}

// b . (gradF x gradG) with full 3-vectors in (r, theta, phi) orthonormal frame.
double bracket3(const double b[3], const double F[3], const double G[3]) {
  const double c0 = F[1] * G[2] - F[2] * G[1];
  const double c1 = F[2] * G[0] - F[0] * G[2];
  const double c2 = F[0] * G[1] - F[1] * G[0];
  return b[0] * c0 + b[1] * c1 + b[2] * c2;
}

}  // namespace

TEST_CASE("cylindrical field is uniform along phi") {
  MagneticModel m(cylindrical_params());
  for (double r : {m.r_min(), 0.5 * (m.r_min() + m.r_max()), m.r_max()}) {
    for (double th : {0.0, 1.0, 4.0}) {
      auto B = m.magnetic_field(r, th);
      CHECK(B.r == 0.0);
      CHECK(B.theta == 0.0);
      CHECK(B.phi == 1.0);
      CHECK(B.norm == 1.0);
      CHECK(m.b_star_parallel(r, th, 2.5) == 1.0);
      for (auto c : {Coordinate::R, Coordinate::Theta, Coordinate::Phi})
        CHECK(m.poisson_bracket_B(r, th, c) == 0.0);
      CHECK(m.jacobian_space(r, th) == doctest::Approx(r).epsilon(1e-15));
    }
  }
}

TEST_CASE("toroidal field magnitude") {
  MagneticModel m(toroidal_params());
  RefField ref = ref_for(m);
  const double r = 0.6 * m.minor_radius();
  const double q = ref.q(r);
  const double expected = std::sqrt(1.0 + (r / (q * m.major_radius())) * (r / (q * m.major_radius())));
  CHECK(m.field_norm(r, kPi / 2) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(m.field_norm(r, kPi) > m.field_norm(r, 0.0));
  auto B = m.magnetic_field(r, 0.7);
  CHECK(B.r == 0.0);
  CHECK(B.phi == doctest::Approx(ref.Bphi(r, 0.7)).epsilon(1e-14));
  CHECK(B.theta == doctest::Approx(ref.Btheta(r, 0.7)).epsilon(1e-14));
  CHECK(B.norm == doctest::Approx(std::hypot(B.theta, B.phi)).epsilon(1e-14));
}

TEST_CASE("radius outside the grid is a domain error") {
  MagneticModel m(toroidal_params());
  CHECK_THROWS_AS(m.magnetic_field(0.5 * m.r_min(), 0.0), DomainError);
  CHECK_THROWS_AS(m.field_norm(1.01 * m.r_max(), 0.0), DomainError);
}

TEST_CASE("B*par") {
  MagneticModel m(toroidal_params());
  const double r = 0.4 * m.minor_radius(), th = 2.0;
  const double B = m.field_norm(r, th);
  CHECK(m.b_star_parallel(r, th, 0.0) == B);
  const double plus = m.b_star_parallel(r, th, 3.0) - B;
  const double minus = m.b_star_parallel(r, th, -3.0) - B;
  CHECK(plus == doctest::Approx(-minus).epsilon(1e-12));
  CHECK(plus != 0.0);
}

TEST_CASE("current density matches a finite-difference curl") {
  MagneticModel m(toroidal_params());
  RefField ref = ref_for(m);
  const double h = 1e-4 * m.minor_radius();
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> ur(m.r_min() + 2 * h, m.r_max() - 2 * h), ut(0, kTwoPi);
  for (int k = 0; k < 20; ++k) {
    const double r = ur(rng), th = ut(rng);
    // (curl B)_phi = (1/r) d_r (r B_theta); other components vanish since R B_phi is constant.
    auto rBt = [&](double s) { return s * ref.Btheta(s, th); };
    const double fd = (rBt(r + h) - rBt(r - h)) / (2 * h) / r;
    CHECK(m.mu0_J_phi(r, th) == doctest::Approx(fd).epsilon(1e-6));
    const double bphi = ref.Bphi(r, th) / ref.B(r, th);
    CHECK(m.b_dot_mu0J(r, th) == doctest::Approx(bphi * fd).epsilon(1e-6));
  }
}

TEST_CASE("curvature brackets match a finite-difference oracle") {
  MagneticModel m(toroidal_params());
  RefField ref = ref_for(m);
  const double h = 1e-4 * m.minor_radius();
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> ur(m.r_min() + 2 * h, m.r_max() - 2 * h), ut(0, kTwoPi);
  for (int k = 0; k < 20; ++k) {
    const double r = ur(rng), th = ut(rng);
    const double R = ref.R(r, th);
    const double dBr = (ref.B(r + h, th) - ref.B(r - h, th)) / (2 * h);
    const double dBt = (ref.B(r, th + h / r) - ref.B(r, th - h / r)) / (2 * h / r);
    const double gradB[3] = {dBr, dBt / r, 0.0};
    const double b[3] = {0.0, ref.Btheta(r, th) / ref.B(r, th), ref.Bphi(r, th) / ref.B(r, th)};
    const double gr[3] = {1, 0, 0}, gt[3] = {0, 1 / r, 0}, gp[3] = {0, 0, 1 / R};
    const double scale = std::hypot(dBr, dBt / r);
    CHECK(std::abs(m.poisson_bracket_B(r, th, Coordinate::R) - bracket3(b, gradB, gr)) <= 1e-6 * scale);
    CHECK(std::abs(m.poisson_bracket_B(r, th, Coordinate::Theta) - bracket3(b, gradB, gt)) <= 1e-6 * scale / r);
    CHECK(std::abs(m.poisson_bracket_B(r, th, Coordinate::Phi) - bracket3(b, gradB, gp)) <= 1e-6 * scale / R);
  }
}

TEST_CASE("bracket of B with a function of B vanishes") {
  MagneticModel m(toroidal_params());
  const double r = 0.5 * m.minor_radius(), th = 1.3;
  auto L = m.local(r, th);
  const double gradB[3] = {L.dB_dr, L.dB_dtheta / r, 0.0};
  const double gradB2[3] = {2 * L.B * gradB[0], 2 * L.B * gradB[1], 0.0};
  CHECK(std::abs(poisson_bracket(L.B_theta / L.B, L.B_phi / L.B, gradB, gradB2)) < 1e-18);
}

TEST_CASE("psi") {
  MagneticModel m(toroidal_params());
  CHECK(m.psi(m.r_min()) == 0.0);
  double prev = 0.0;
  for (int i = 1; i <= 20; ++i) {
    const double r = m.r_min() + (m.r_max() - m.r_min()) * i / 20.0;
    const double p = m.psi(r);
    CHECK(p < prev);
    prev = p;
    CHECK(p == doctest::Approx(m.psi_quadrature(r, 64)).epsilon(1e-13));
  }
  const double coarse = m.psi_quadrature(m.r_max(), 32);
  const double fine = m.psi_quadrature(m.r_max(), 64);
  CHECK(std::abs(coarse - fine) < 1e-12 * std::abs(fine));

  GeometryParams pc = toroidal_params();
  pc.qa = pc.q0;
  MagneticModel mc(pc);
  const double r = 0.8 * mc.minor_radius();
  const double closed = -(r * r - mc.r_min() * mc.r_min()) / (2 * pc.q0);
  CHECK(mc.psi(r) == doctest::Approx(closed).epsilon(1e-14));
  CHECK(mc.psi_quadrature(r, 16) == doctest::Approx(closed).epsilon(1e-13));

  GeometryParams pe = toroidal_params();
  pe.q_exponent = 1.5;
  MagneticModel me(pe);
  CHECK(me.psi(me.r_max()) == doctest::Approx(me.psi_quadrature(me.r_max(), 128)).epsilon(1e-12));
}

TEST_CASE("P_phi and energy") {
  MagneticModel m(toroidal_params());
  const double r = 0.3 * m.minor_radius(), th = 0.4;
  CHECK(m.p_phi(r, th, 0.0) == m.psi(r));
  CHECK(m.energy(r, th, 0.0, 0.0) == 0.0);
  CHECK(m.energy(r, th, -3.0, 0.0) == 4.5);
  CHECK(m.energy(r, th, 2.2, 0.0) == m.energy(r, th, -2.2, 0.0));
  CHECK_THROWS_AS(m.energy(r, th, 1.0, -1.0), DomainError);

  MagneticModel mc(cylindrical_params());
  CHECK(mc.p_phi(r, th, -3.0) == doctest::Approx(mc.psi(r) - 3.0 * mc.major_radius()).epsilon(1e-15));
}

TEST_CASE("P_phi and energy from a cached psi table agree with direct evaluation") {
  MagneticModel m(toroidal_params());
  Grid4D g{32, 16, 1, 8, m.r_min(), m.r_max(), -5.0, 5.0};
  std::vector<double> psi_table(g.Nr);
  for (int i = 0; i < g.Nr; ++i) psi_table[i] = m.psi(g.r(i));
  for (int i = 0; i < g.Nr; ++i)
    for (int j = 0; j < g.Ntheta; ++j)
      for (int v = 0; v < g.Nv; ++v) {
        const double direct = m.p_phi(g.r(i), g.theta(j), g.v(v));
        const double cached = psi_table[i] + m.toroidal_flux_function() * g.v(v) / m.field_norm(g.r(i), g.theta(j));
        CHECK(std::abs(direct - cached) <= 1e-14 * std::abs(direct));
        CHECK(m.energy(g.r(i), g.theta(j), g.v(v), 0.0) == 0.5 * g.v(v) * g.v(v));
      }
}

TEST_CASE("Jacobian") {
  MagneticModel m(toroidal_params());
  const double r = 0.5 * m.minor_radius();
  CHECK(m.jacobian_space(r, kPi / 2) == doctest::Approx(r).epsilon(1e-14));
  Grid4D g{16, 16, 1, 1, m.r_min(), m.r_max(), 0.0, 0.0};
  for (int i = 0; i < g.Nr; ++i)
    for (int j = 0; j < g.Ntheta; ++j) CHECK(m.jacobian_space(g.r(i), g.theta(j)) > 0.0);
  MagneticModel mc(cylindrical_params());
  CHECK(mc.local(0.5, 2.0).jacobian == 0.5);
  CHECK(mc.jacobian_space(mc.r_min(), 2.0) == mc.r_min());
}

TEST_CASE("grid coordinates and validation") {
  Grid4D g{11, 8, 4, 5, 1.0, 2.0, -2.0, 2.0};
  g.validate();
  CHECK(g.dr() == doctest::Approx(0.1));
  CHECK(g.r(10) == 2.0);
  CHECK(g.v(4) == 2.0);
  CHECK(g.theta(4) == doctest::Approx(kPi));
  CHECK(g.index(1, 2, 3, 4) == ((4 * 4 + 3) * 11 + 1) * 8 + 2);

  Grid4D bad = g;
  bad.Nphi = 2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = g;
  bad.Nv = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.v_max = bad.v_min;
  CHECK_NOTHROW(bad.validate());
}

TEST_CASE("geometry validation") {
  GeometryParams p = toroidal_params();
  p.r_max_over_a = 3.5;
  CHECK_THROWS_AS(MagneticModel{p}, ConfigError);
  p = toroidal_params();
  p.rho_star = 0.0;
  CHECK_THROWS_AS(MagneticModel{p}, ConfigError);
}

TEST_CASE("profiles") {
  Grid4D g{64, 8, 1, 1, 10.0, 100.0, 0.0, 0.0};
  Profiles flat = Profiles::flat(g);
  for (double n : flat.n0_nodes()) CHECK(n == 1.0);
  ProfileParams pp;
  pp.kappa_n = 2.2;
  pp.kappa_Ti = 6.9;
  Profiles prof(pp, 100.0, g);
  const double rp = pp.center_over_a * 100.0;
  CHECK(prof.n0(rp) == doctest::Approx(1.0));
  // n0'/n0 = -(kappa/a) cosh^-2((r - rp)/w)
  const double r = 62.0, h = 1e-4;
  const double dlog = (std::log(prof.Ti(r + h)) - std::log(prof.Ti(r - h))) / (2 * h);
  const double w = pp.width_over_a * 100.0;
  const double ch = std::cosh((r - rp) / w);
  CHECK(dlog == doctest::Approx(-pp.kappa_Ti / 100.0 / (ch * ch)).epsilon(1e-7));
  for (int i = 0; i < g.Nr; ++i) CHECK(prof.n0_nodes()[i] > 0.0);
}
