#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "gyrosl/qn_solver.hpp"
#include "gyrosl/scenarios.hpp"

using namespace gyrosl;
namespace fs = std::filesystem;

namespace {

MagneticModel torus(double rho_star = 0.01) {
  GeometryParams p;
  p.kind = GeometryKind::Toroidal;
  p.rho_star = rho_star;
  return MagneticModel(p);
}

Grid4D case_grid(const MagneticModel& m, int Nr, int Nt, int Nv = 1) {
  Grid4D g;
  g.Nr = Nr;
  g.Ntheta = Nt;
  g.Nphi = 1;
  g.Nv = Nv;
  g.r_min = m.r_min();
  g.r_max = m.r_max();
  g.v_min = Nv == 1 ? -3.0 : -5.0;
  g.v_max = Nv == 1 ? -3.0 : 5.0;
  return g;
}

// P_phi from the quadrature flux and |B| written out from the field components.
double p_phi_oracle(const MagneticModel& m, double r, double th, double v) {
  const double R0 = m.major_radius();
  const double R = R0 + r * std::cos(th);
  const double q = m.q(r);
  const double B = std::sqrt(R0 * R0 + r * r / (q * q)) / R;
  return m.psi_quadrature(r, 256) + R0 * v / B;
}

fs::path scratch_dir(const char* name) {
  const auto d = fs::temp_directory_path() / (std::string("gyrosl_scen_") + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

bool same_series(const std::vector<DiagnosticsRecord>& a, const std::vector<DiagnosticsRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double x[] = {a[k].t, a[k].u1, a[k].uinf, a[k].mass, a[k].fmax, a[k].E_kin, a[k].E_pot,
                        a[k].E_tot_dev, a[k].dmass_L, a[k].dmass_N, a[k].boundary_loss};
    const double y[] = {b[k].t, b[k].u1, b[k].uinf, b[k].mass, b[k].fmax, b[k].E_kin, b[k].E_pot,
                        b[k].E_tot_dev, b[k].dmass_L, b[k].dmass_N, b[k].boundary_loss};
    for (std::size_t i = 0; i < std::size(x); ++i)
      if (!same_bits(x[i], y[i])) return false;
  }
  return true;
}

RunConfig small_case1() {
  return parse_config(
      "scenario = case1\n"
      "grid.Nr = 32\n"
      "grid.Ntheta = 32\n"
      "scheme.radial_ghost_cells = 2\n"
      "output.checkpoint = false\n");
}

RunConfig small_cylinder(const char* scheme) {
  return parse_config(std::string("scenario = cylindrical\n"
                                  "grid.Nr = 16\n"
                                  "grid.Ntheta = 16\n"
                                  "grid.Nphi = 4\n"
                                  "grid.Nv = 8\n"
                                  "scheme.radial_ghost_cells = 1\n"
                                  "scheme.dt = 20\n"
                                  "scenario.t_max = 200\n"
                                  "scenario.epsilon = 0.05\n"
                                  "scenario.perturbation_m = 2\n"
                                  "scenario.perturbation_n = 1\n"
                                  "scheme.scheme = ") +
                      scheme + "\n");
}

}  // namespace

TEST_CASE("case1 initial function depends on P_phi alone") {
  const auto m = torus();
  const Grid4D g = case_grid(m, 64, 64, 6);
  Case1Params p;
  const PPhiBand b = resolve_band(m, g, p);
  const auto f = init_case1(g, m, p);
  int inside = 0;
  for (int iv = 0; iv < g.Nv; ++iv)
    for (int ir = 0; ir < g.Nr; ++ir)
      for (int it = 0; it < g.Ntheta; ++it) {
        const double P = p_phi_oracle(m, g.r(ir), g.theta(it), g.v(iv));
        const double ref = (P < b.P1 || P > b.P2) ? 0.0 : (P - b.P1) * (P - b.P2) * std::sin(b.gamma * P);
        const double scale = 0.25 * (b.P2 - b.P1) * (b.P2 - b.P1);
        CHECK(std::abs(f.data[g.index(ir, it, 0, iv)] - ref) <= 1e-9 * scale);
        inside += ref != 0.0;
        // up-down symmetry gives equal P_phi, hence equal f
        const int mirror = (g.Ntheta - it) % g.Ntheta;
        CHECK(f.data[g.index(ir, it, 0, iv)] == doctest::Approx(f.data[g.index(ir, mirror, 0, iv)]).epsilon(1e-12));
      }
  CHECK(inside > 0);
}

TEST_CASE("case1 band values at the edges and the middle") {
  const auto m = torus();
  const Grid4D g = case_grid(m, 16, 16);
  const int ir = 7, it = 3;
  const double P = p_phi_oracle(m, g.r(ir), g.theta(it), g.v(0));
  const double w = 40.0;

  Case1Params mid;
  mid.P_phi1 = P - w / 2;
  mid.P_phi2 = P + w / 2;
  const auto f = init_case1(g, m, mid);
  const double gamma = 4.0 * kPi / w;
  CHECK(f.data[g.index(ir, it, 0, 0)] == doctest::Approx(-(w * w / 4) * std::sin(gamma * *mid.P_phi1)).epsilon(1e-6));

  Case1Params edge;
  edge.P_phi1 = P;
  edge.P_phi2 = P + w;
  CHECK(std::abs(init_case1(g, m, edge).data[g.index(ir, it, 0, 0)]) < 1e-9);

  Case1Params above;
  above.P_phi1 = P + 1.0;
  above.P_phi2 = P + w;
  CHECK(init_case1(g, m, above).data[g.index(ir, it, 0, 0)] == 0.0);
}

TEST_CASE("automatic band keeps the support away from the radial boundary") {
  const auto m = torus();
  for (int Nr : {64, 128, 256}) {
    const Grid4D g = case_grid(m, Nr, 64);
    const auto f = init_case1(g, m, Case1Params{});
    const int rows = Nr / 20;
    for (int ir = 0; ir < g.Nr; ++ir) {
      if (ir > rows && ir < g.Nr - 1 - rows) continue;
      for (int it = 0; it < g.Ntheta; ++it) CHECK(f.data[g.index(ir, it, 0, 0)] == 0.0);
    }
  }
}

TEST_CASE("a band outside the grid range is rejected with the range") {
  const auto m = torus();
  const Grid4D g = case_grid(m, 16, 16);
  const auto [lo, hi] = p_phi_range(m, g);
  Case1Params p;
  p.P_phi1 = lo - 10.0;
  p.P_phi2 = 0.5 * (lo + hi);
  try {
    init_case1(g, m, p);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("P_phi range of the grid") != std::string::npos);
  }
}

TEST_CASE("case2 window in theta") {
  const auto m = torus();
  const Grid4D g = case_grid(m, 64, 64);
  Case1Params p;
  Case2Params w;
  const PPhiBand b = resolve_band(m, g, p);
  const auto f = init_case2(g, m, p, w);
  int positive = 0;
  for (int ir = 0; ir < g.Nr; ++ir)
    for (int it = 0; it < g.Ntheta; ++it) {
      const double th = g.theta(it);
      const double v = f.data[g.index(ir, it, 0, 0)];
      if (th < w.theta1 || th > w.theta2) CHECK(v == 0.0);
      CHECK(v >= 0.0);
      positive += v > 0.0;
      if (it == g.Ntheta / 2) {
        // theta = pi is the window midpoint
        const double P = p_phi_oracle(m, g.r(ir), th, g.v(0));
        const double pf = (P < b.P1 || P > b.P2) ? 0.0 : (P - b.P1) * (P - b.P2);
        const double d = w.theta2 - w.theta1;
        CHECK(v == doctest::Approx(pf * (-d * d / 4)).epsilon(1e-9));
      }
    }
  CHECK(positive > 0);

  Grid4D bad = case_grid(m, 16, 16, 4);
  CHECK_THROWS_AS(init_case2(bad, m, p, w), ConfigError);
}

TEST_CASE("perturbed Maxwellian") {
  const auto m = torus(1.0 / 40.0);
  Grid4D g = case_grid(m, 16, 16, 256);
  g.Nphi = 4;
  ProfileParams pp;
  pp.kappa_Ti = 2.0;
  pp.kappa_n = 1.0;
  const Profiles prof(pp, m.minor_radius(), g);

  SUBCASE("epsilon = 0 is the equilibrium and carries no charge") {
    const auto init = init_maxwellian_perturbed(g, prof, Perturbation{5, 3, 0.0});
    CHECK(init.f.data == init.f_eq);
    const auto rho = compute_rho(init.f.data, init.f_eq, g, prof, 1.0);
    for (double x : rho) CHECK(x == 0.0);
  }
  SUBCASE("density moment against the truncated Gaussian mass") {
    const auto init = init_maxwellian_perturbed(g, prof, Perturbation{});
    for (int ir = 0; ir < g.Nr; ++ir) {
      double sum = 0.0;
      for (int iv = 0; iv < g.Nv; ++iv) sum += g.v_weight(iv) * g.dv() * init.f_eq[g.index(ir, 0, 0, iv)];
      // v in [-5, 5]: the tails beyond 5 v_th are outside the grid
      const double Ti = prof.Ti(g.r(ir));
      const double truncated = std::erf(5.0 / std::sqrt(2.0 * Ti));
      CHECK(sum == doctest::Approx(prof.n0(g.r(ir)) * truncated).epsilon(1e-8));
    }
  }
  SUBCASE("even in v and vanishing perturbation at the radial ends") {
    const auto init = init_maxwellian_perturbed(g, prof, Perturbation{5, 3, 0.1});
    for (int iv = 0; iv < g.Nv; ++iv)
      for (int ir = 0; ir < g.Nr; ++ir)
        CHECK(init.f_eq[g.index(ir, 0, 0, iv)] ==
              doctest::Approx(init.f_eq[g.index(ir, 0, 0, g.Nv - 1 - iv)]).epsilon(1e-14));
    for (int iv = 0; iv < g.Nv; ++iv)
      for (int it = 0; it < g.Ntheta; ++it)
        for (int ir : {0, g.Nr - 1}) CHECK(init.f.data[g.index(ir, it, 1, iv)] == init.f_eq[g.index(ir, it, 1, iv)]);
  }
}

TEST_CASE("case1 run produces one row per step plus the initial one") {
  const auto d = scratch_dir("rows");
  RunConfig cfg = small_case1();
  cfg.output.slice_times = {0.0, 100.0};
  const auto s = run(cfg, d);
  CHECK(s.steps == 10);
  const auto rows = read_diagnostics(s.run_dir / "diagnostics.csv");
  REQUIRE(rows.size() == 11);
  for (int k = 0; k < 11; ++k) CHECK(rows[k].t == doctest::Approx(10.0 * k));
  CHECK(rows[0].u1 == 0.0);
  CHECK(rows[10].u1 > 0.0);
  for (const auto& r : rows) CHECK(r.E_pot == 0.0);
  CHECK(fs::exists(s.run_dir / "config.resolved"));
  CHECK(fs::exists(s.run_dir / "run.json"));

  // the t = 0 slice is the initial function itself
  const auto slice = read_slice(s.run_dir / slice_file_name("f", 0.0, 0, 0));
  const MagneticModel m(cfg.geometry);
  const auto f0 = init_case1(cfg.make_grid(m), m, cfg.case1);
  CHECK(slice.values == f0.data);
  CHECK(fs::exists(s.run_dir / slice_file_name("f", 100.0, 0, 0)));
  fs::remove_all(d);
}

TEST_CASE("zeroed advection fields leave the norms at zero") {
  const auto d = scratch_dir("zero");
  RunConfig cfg = small_case1();
  cfg.scheme.zero_fields = true;
  const auto s = run(cfg, d);
  REQUIRE(s.series.size() == 11);
  for (const auto& r : s.series) {
    CHECK(r.u1 == 0.0);
    CHECK(r.uinf == 0.0);
  }
  fs::remove_all(d);
}

TEST_CASE("runs are deterministic and resume bit-exactly") {
  for (const char* scheme : {"BSL", "FSL"}) {
    CAPTURE(scheme);
    const auto d = scratch_dir("restart");
    RunConfig full = small_cylinder(scheme);
    full.output.run_name = "full";
    const auto a = run(full, d);
    const auto again = run(full, d);
    CHECK(same_series(a.series, again.series));

    RunConfig half = full;
    half.output.run_name = "split";
    half.t_max = 100.0;
    run(half, d);
    RunConfig rest = full;
    rest.output.run_name = "split";
    RunOptions opt;
    opt.resume = true;
    const auto b = run(rest, d, opt);
    CHECK(same_series(a.series, read_diagnostics(b.run_dir / "diagnostics.csv")));
    fs::remove_all(d);
  }
}

TEST_CASE("checkpoint from another configuration is refused") {
  const auto d = scratch_dir("refuse");
  RunConfig cfg = small_cylinder("BSL");
  run(cfg, d);
  RunConfig other = cfg;
  other.perturbation.epsilon = 0.01;
  Simulation sim(other);
  CHECK_THROWS_AS(sim.load_checkpoint(d / cfg.run_name() / "checkpoint.bin"), ConfigError);
  fs::remove_all(d);
}

TEST_CASE("nonlinear FSL run: mass change is the boundary loss") {
  const auto d = scratch_dir("fsl_mass");
  const auto s = run(small_cylinder("FSL"), d);
  const double m0 = s.series.front().mass;
  double dl = 0.0, dn = 0.0;
  for (const auto& r : s.series) {
    CHECK(std::abs(r.mass - m0 + r.boundary_loss) <= 1e-12 * m0);
    dl += r.dmass_L;
    dn += r.dmass_N;
  }
  CHECK(dl + dn == doctest::Approx(s.series.back().mass - m0).epsilon(1e-9).scale(m0 * 1e-3));
  // Phi is live: the potential energy is not identically zero
  CHECK(s.series.back().E_pot != 0.0);
  fs::remove_all(d);
}
