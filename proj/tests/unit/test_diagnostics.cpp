#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>
#include <vector>

#include "gyrosl/diagnostics.hpp"
#include "gyrosl/io.hpp"
#include "gyrosl/qn_solver.hpp"

using namespace gyrosl;
namespace fs = std::filesystem;

namespace {

MagneticModel cylinder(double rho_star = 0.1) {
  GeometryParams p;
  p.kind = GeometryKind::Cylindrical;
  p.rho_star = rho_star;
  return MagneticModel(p);
}

MagneticModel torus(double rho_star = 0.1) {
  GeometryParams p;
  p.kind = GeometryKind::Toroidal;
  p.rho_star = rho_star;
  return MagneticModel(p);
}

Grid4D grid_for(const MagneticModel& m, int Nr, int Nt, int Np, int Nv) {
  Grid4D g;
  g.Nr = Nr;
  g.Ntheta = Nt;
  g.Nphi = Np;
  g.Nv = Nv;
  g.r_min = m.r_min();
  g.r_max = m.r_max();
  g.v_min = Nv == 1 ? -3.0 : -5.0;
  g.v_max = Nv == 1 ? -3.0 : 5.0;
  return g;
}

fs::path scratch_dir(const char* name) {
  const auto d = fs::temp_directory_path() / (std::string("gyrosl_test_") + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

bool same_bits(double a, double b) {
  std::uint64_t x, y;
  std::memcpy(&x, &a, 8);
  std::memcpy(&y, &b, 8);
  return x == y;
}

}  // namespace

TEST_CASE("mass of f = 1 in the cylinder matches the closed form") {
  const auto m = cylinder();
  const Grid4D g = grid_for(m, 33, 16, 4, 9);
  PhaseSpaceWeights w(m, g);
  std::vector<double> f(g.size(), 1.0);
  const auto mm = mass_and_max(f, w);
  // trapezoid is exact for the linear-in-r integrand
  const double ref = kTwoPi * kTwoPi * (g.v_max - g.v_min) * (g.r_max * g.r_max - g.r_min * g.r_min) / 2.0;
  CHECK(mm.mass == doctest::Approx(ref).epsilon(1e-13));
  CHECK(mm.fmax == 1.0);

  std::vector<double> zero(g.size(), 0.0);
  const auto mz = mass_and_max(zero, w);
  CHECK(mz.mass == 0.0);
  CHECK(mz.fmax == 0.0);
}

TEST_CASE("mass is linear and fmax positively homogeneous") {
  const auto m = torus();
  const Grid4D g = grid_for(m, 12, 16, 4, 6);
  PhaseSpaceWeights w(m, g);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<double> a(g.size()), b(g.size()), c(g.size()), s(g.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    a[k] = U(rng);
    b[k] = U(rng);
    c[k] = 2.5 * a[k] - 0.75 * b[k];
    s[k] = 3.0 * a[k];
  }
  const double ma = mass_and_max(a, w).mass, mb = mass_and_max(b, w).mass, mc = mass_and_max(c, w).mass;
  CHECK(mc == doctest::Approx(2.5 * ma - 0.75 * mb).epsilon(1e-12));
  CHECK(mass_and_max(s, w).fmax == doctest::Approx(3.0 * mass_and_max(a, w).fmax).epsilon(1e-15));
}

TEST_CASE("single-node difference gives the single-cell quadrature") {
  const auto m = torus();
  const Grid4D g = grid_for(m, 10, 12, 4, 6);
  PhaseSpaceWeights w(m, g);
  std::vector<double> f0(g.size(), 0.25), f = f0;
  const int ir = 4, it = 7, ip = 2, iv = 3;
  const double delta = 1e-3;
  f[g.index(ir, it, ip, iv)] += delta;
  const auto n = norms_vs_initial(f, f0, w);
  CHECK(n.uinf == doctest::Approx(delta).epsilon(1e-12));

  // J_s B*_par from the geometry, interior node so all trapezoid weights are 1
  const double r = g.r(ir), th = g.theta(it), v = g.v(iv);
  const double jb = m.jacobian_space(r, th) * m.b_star_parallel(r, th, v);
  CHECK(n.u1 == doctest::Approx(delta * jb * g.cell_volume()).epsilon(1e-10));

  const auto same = norms_vs_initial(f0, f0, w);
  CHECK(same.u1 == 0.0);
  CHECK(same.uinf == 0.0);
}

TEST_CASE("u1 is invariant under a joint poloidal relabeling in the cylinder") {
  const auto m = cylinder();
  const Grid4D g = grid_for(m, 12, 16, 4, 6);
  PhaseSpaceWeights w(m, g);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> f(g.size()), f0(g.size());
  for (std::size_t k = 0; k < f.size(); ++k) {
    f[k] = U(rng);
    f0[k] = U(rng);
  }
  auto roll = [&](const std::vector<double>& x) {
    std::vector<double> y(x.size());
    for (int iv = 0; iv < g.Nv; ++iv)
      for (int ip = 0; ip < g.Nphi; ++ip)
        for (int ir = 0; ir < g.Nr; ++ir)
          for (int it = 0; it < g.Ntheta; ++it) y[g.index(ir, (it + 1) % g.Ntheta, ip, iv)] = x[g.index(ir, it, ip, iv)];
    return y;
  };
  const auto a = norms_vs_initial(f, f0, w);
  const auto b = norms_vs_initial(roll(f), roll(f0), w);
  CHECK(b.u1 == doctest::Approx(a.u1).epsilon(1e-13));
  CHECK(b.uinf == a.uinf);
}

TEST_CASE("slice-by-slice mass equals the global reduction") {
  const auto m = torus();
  const Grid4D g = grid_for(m, 20, 24, 4, 8);
  PhaseSpaceWeights w(m, g);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 2.0);
  std::vector<double> f(g.size());
  for (auto& x : f) x = U(rng);
  double sum = 0.0;
  for (int iv = 0; iv < g.Nv; ++iv)
    for (int ip = 0; ip < g.Nphi; ++ip)
      sum += w.integrate_slice(f.data() + (static_cast<std::size_t>(iv) * g.Nphi + ip) * g.slice_size(), iv);
  const double global = w.integrate(f);
  CHECK(std::abs(sum - global) <= 1e-13 * std::abs(global));
}

TEST_CASE("energies vanish at equilibrium and the field energy is non-negative") {
  const auto m = cylinder(1.0 / 8.0);
  const Grid4D g = grid_for(m, 24, 16, 4, 8);
  PhaseSpaceWeights w(m, g);
  const Profiles prof = Profiles::flat(g);
  std::vector<double> feq(g.size(), 0.3);
  const std::vector<double> zero_plane(g.plane_size(), 0.0);
  const auto e0 = energies(feq, feq, zero_plane, zero_plane, w, m, prof);
  CHECK(e0.kinetic == 0.0);
  CHECK(e0.potential == 0.0);

  QuasiNeutralitySolver qn(g, prof);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> rho(g.plane_size(), 0.0);
    for (int ip = 0; ip < g.Nphi; ++ip)
      for (int ir = 1; ir < g.Nr - 1; ++ir)
        for (int it = 0; it < g.Ntheta; ++it) rho[(ip * g.Nr + ir) * g.Ntheta + it] = N(rng);
    const auto phi = qn.solve(rho);
    const auto e = energies(feq, feq, phi, rho, w, m, prof);
    CHECK(e.potential > 0.0);
  }
}

TEST_CASE("an empty series is a header-only file") {
  const auto d = scratch_dir("empty_series");
  { DiagnosticsWriter w(d / "diagnostics.csv"); }
  CHECK(read_text_file(d / "diagnostics.csv") == std::string(kDiagnosticsHeader) + "\n");
  CHECK(read_diagnostics(d / "diagnostics.csv").empty());
  fs::remove_all(d);
}

TEST_CASE("records round-trip bit-exactly through the CSV") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<std::uint64_t> bits;
  std::vector<DiagnosticsRecord> recs;
  const double specials[] = {0.0, -0.0, 1.0 / 3.0, 1e-310, -std::numeric_limits<double>::denorm_min(),
                             std::numeric_limits<double>::max(), -std::numeric_limits<double>::min()};
  auto random_finite = [&]() {
    for (;;) {
      const std::uint64_t b = bits(rng);
      double x;
      std::memcpy(&x, &b, 8);
      if (std::isfinite(x)) return x;
    }
  };
  for (int k = 0; k < 200; ++k) {
    DiagnosticsRecord r;
    double* fields[] = {&r.t, &r.u1, &r.uinf, &r.mass, &r.fmax, &r.E_kin, &r.E_pot, &r.E_tot_dev, &r.dmass_L,
                        &r.dmass_N, &r.boundary_loss};
    for (std::size_t i = 0; i < std::size(fields); ++i)
      *fields[i] = k < 7 ? specials[(k + i) % std::size(specials)] : random_finite();
    recs.push_back(r);
  }
  const auto d = scratch_dir("roundtrip");
  {
    DiagnosticsWriter w(d / "diagnostics.csv");
    for (const auto& r : recs) w.write(r);
  }
  const auto back = read_diagnostics(d / "diagnostics.csv");
  REQUIRE(back.size() == recs.size());
  for (std::size_t k = 0; k < recs.size(); ++k) {
    const auto& a = recs[k];
    const auto& b = back[k];
    CHECK(same_bits(a.t, b.t));
    CHECK(same_bits(a.u1, b.u1));
    CHECK(same_bits(a.uinf, b.uinf));
    CHECK(same_bits(a.mass, b.mass));
    CHECK(same_bits(a.fmax, b.fmax));
    CHECK(same_bits(a.E_kin, b.E_kin));
    CHECK(same_bits(a.E_pot, b.E_pot));
    CHECK(same_bits(a.E_tot_dev, b.E_tot_dev));
    CHECK(same_bits(a.dmass_L, b.dmass_L));
    CHECK(same_bits(a.dmass_N, b.dmass_N));
    CHECK(same_bits(a.boundary_loss, b.boundary_loss));
  }
  fs::remove_all(d);
}

TEST_CASE("appending keeps earlier rows and truncation drops later ones") {
  const auto d = scratch_dir("append");
  const auto p = d / "diagnostics.csv";
  {
    DiagnosticsWriter w(p);
    for (int k = 0; k < 5; ++k) w.write(DiagnosticsRecord{10.0 * k, 1.0 * k});
  }
  truncate_diagnostics(p, 25.0);
  CHECK(read_diagnostics(p).size() == 3);
  {
    DiagnosticsWriter w(p, true);
    w.write(DiagnosticsRecord{30.0, 3.0});
  }
  const auto rows = read_diagnostics(p);
  REQUIRE(rows.size() == 4);
  CHECK(rows[3].t == 30.0);
  fs::remove_all(d);
}

TEST_CASE("malformed diagnostics files are reported with the path") {
  const auto d = scratch_dir("malformed");
  write_text_file(d / "bad_header.csv", "t,u1\n1,2\n");
  CHECK_THROWS_AS(read_diagnostics(d / "bad_header.csv"), IoError);
  write_text_file(d / "bad_row.csv", std::string(kDiagnosticsHeader) + "\n1,2,3\n");
  try {
    read_diagnostics(d / "bad_row.csv");
    FAIL("expected an IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("bad_row.csv:2") != std::string::npos);
  }
  CHECK_THROWS_AS(DiagnosticsWriter(d / "missing" / "x.csv"), IoError);
  fs::remove_all(d);
}

TEST_CASE("slice files round-trip and follow the naming pattern") {
  CHECK(slice_file_name("f", 0.0, 0, 3) == "f_t0_phi0_v3.csv");
  CHECK(slice_file_name("phi", 2000.0, 5, 0) == "phi_t2000_phi5_v0.csv");
  CHECK(slice_file_name("f", 2.5, 1, 2) == "f_t2.5_phi1_v2.csv");

  Slice2D s;
  for (int i = 0; i < 5; ++i) s.r.push_back(10.0 + 0.1 * i);
  for (int j = 0; j < 7; ++j) s.theta.push_back(kTwoPi * j / 7);
  std::mt19937_64 rng(29);
  std::normal_distribution<double> N(0.0, 1e6);
  for (int k = 0; k < 35; ++k) s.values.push_back(N(rng));
  const auto d = scratch_dir("slice");
  write_slice(d / "f_t0_phi0_v0.csv", s);
  const auto back = read_slice(d / "f_t0_phi0_v0.csv");
  CHECK(back.r == s.r);
  CHECK(back.theta == s.theta);
  CHECK(back.values == s.values);
  const auto text = read_text_file(d / "f_t0_phi0_v0.csv");
  CHECK(text.rfind("r,", 0) == 0);
  CHECK(text.find("\ntheta,") != std::string::npos);

  Slice2D bad = s;
  bad.values.pop_back();
  CHECK_THROWS_AS(write_slice(d / "bad.csv", bad), IoError);
  fs::remove_all(d);
}
