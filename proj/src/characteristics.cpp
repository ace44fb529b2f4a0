#include "gyrosl/characteristics.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace gyrosl {

Velocity3 linear_advection_field(const MagneticModel& model, double r, double theta, double v) {
  model.check_radius(r);
  Velocity3 u;
  linear_velocity_rtheta(model, r, theta, v, u.r, u.theta);
  u.phi = linear_velocity_phi(model, r, theta, v);
  return u;
}

Displacement taylor_displacement(const MagneticModel& model, double r, double theta, double v, double dt,
                                 Direction dir) {
  auto alpha = [&](const auto& x, const auto& y, auto& ur, auto& ut) {
    linear_velocity_rtheta(model, x, y, v, ur, ut);
  };
  return taylor_displacement_of(alpha, r, theta, dt, dir);
}

Displacement rk2_displacement(const MagneticModel& model, double r, double theta, double v, double dt, int M,
                              Direction dir, double r_lo, double r_hi, bool& exited) {
  auto alpha = [&](double x, double y, double& ur, double& ut) { linear_velocity_rtheta(model, x, y, v, ur, ut); };
  return rk2_displacement_of(alpha, r, theta, dt, M, dir, r_lo, r_hi, exited);
}

FootTable::FootTable(const Grid4D& grid, int ghost, double dt, int M, Direction dir, FootMethod method)
    : grid_(grid), ghost_(ghost), dt_(dt), M_(M), dir_(dir), method_(method) {
  const std::size_t n = slice_size() * grid_.Nv;
  dr_.assign(n, 0.0);
  dth_.assign(n, 0.0);
}

FootTable build_foot_table(const MagneticModel& model, const Grid4D& grid, int ghost, double dt, int M,
                           Direction dir, FootMethod method) {
  if (!(dt > 0.0)) throw ConfigError("scheme.dt: must be > 0");
  if (M < 1) throw ConfigError("scheme.M: must be >= 1");
  if (ghost < 0) throw ConfigError("scheme.radial_ghost_cells: must be >= 0");
  FootTable table(grid, ghost, dt, M, dir, method);
  if (model.kind() == GeometryKind::Cylindrical) return table;  // the (r, theta) flow vanishes

  const double dr = grid.dr();
  const double r_lo = grid.r_min - ghost * dr;
  const double r_hi = grid.r_max + ghost * dr;
  const int rows = table.padded_Nr();
  std::size_t flagged = 0;
#pragma omp parallel for collapse(2) schedule(static) reduction(+ : flagged)
  for (int iv = 0; iv < grid.Nv; ++iv) {
    for (int ip = 0; ip < rows; ++ip) {
      const double r = grid.r_min + (ip - ghost) * dr;
      const double v = grid.v(iv);
      double* out_r = table.disp_r(iv) + static_cast<std::size_t>(ip) * grid.Ntheta;
      double* out_t = table.disp_theta(iv) + static_cast<std::size_t>(ip) * grid.Ntheta;
      for (int it = 0; it < grid.Ntheta; ++it) {
        const double th = grid.theta(it);
        Displacement d;
        if (method == FootMethod::Taylor) {
          d = taylor_displacement(model, r, th, v, dt, dir);
        } else {
          bool exited = false;
          d = rk2_displacement(model, r, th, v, dt, M, dir, r_lo, r_hi, exited);
          if (exited) ++flagged;
        }
        out_r[it] = d.r;
        out_t[it] = d.theta;
      }
    }
  }
  table.flagged() = flagged;
  return table;
}

namespace {

struct Fnv1a {
  std::uint64_t h = 1469598103934665603ull;
  template <class T>
  void add(const T& x) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &x, sizeof(T));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ull;
    }
  }
};

constexpr char kMagic[8] = {'G', 'Y', 'F', 'O', 'O', 'T', '0', '1'};

}  // namespace

std::uint64_t foot_table_key(const GeometryParams& g, const Grid4D& grid, int ghost, double dt, int M,
                             Direction dir, FootMethod method) {
  Fnv1a f;
  f.add(static_cast<int>(g.kind));
  f.add(g.rho_star);
  f.add(g.aspect_ratio);
  f.add(g.q0);
  f.add(g.qa);
  f.add(g.q_exponent);
  f.add(g.r_min_over_a);
  f.add(g.r_max_over_a);
  f.add(grid.Nr);
  f.add(grid.Ntheta);
  f.add(grid.Nv);
  f.add(grid.r_min);
  f.add(grid.r_max);
  f.add(grid.v_min);
  f.add(grid.v_max);
  f.add(ghost);
  f.add(dt);
  f.add(M);
  f.add(static_cast<int>(dir));
  f.add(static_cast<int>(method));
  return f.h;
}

void save_foot_table(const FootTable& table, std::uint64_t key, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&key), sizeof key);
  const std::uint64_t n = table.all_r().size();
  const std::uint64_t flagged = table.flagged();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(&flagged), sizeof flagged);
  out.write(reinterpret_cast<const char*>(table.all_r().data()), static_cast<std::streamsize>(n * sizeof(double)));
  out.write(reinterpret_cast<const char*>(table.all_theta().data()),
            static_cast<std::streamsize>(n * sizeof(double)));
  if (!out) throw IoError("write failed for " + path);
}

bool load_foot_table(const std::string& path, std::uint64_t key, FootTable& table) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  char magic[sizeof kMagic];
  std::uint64_t stored_key = 0, n = 0, flagged = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&stored_key), sizeof stored_key);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  in.read(reinterpret_cast<char*>(&flagged), sizeof flagged);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw IoError("not a foot table file: " + path);
  if (stored_key != key || n != table.all_r().size()) return false;
  std::vector<double> r(n), t(n);
  in.read(reinterpret_cast<char*>(r.data()), static_cast<std::streamsize>(n * sizeof(double)));
  in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw IoError("truncated foot table file: " + path);
  std::copy(r.begin(), r.end(), table.disp_r(0));
  std::copy(t.begin(), t.end(), table.disp_theta(0));
  table.flagged() = flagged;
  return true;
}

PotentialField::PotentialField(const Grid4D& grid, std::vector<double> phi_nodal, PhiDerivative exact_dphi)
    : grid_(grid), phi_(std::move(phi_nodal)), exact_dphi_(std::move(exact_dphi)) {
  if (phi_.size() != grid_.plane_size()) throw DomainError("potential array does not match the grid");
  zero_ = !exact_dphi_ && std::all_of(phi_.begin(), phi_.end(), [](double x) { return x == 0.0; });
  if (zero_) return;
  const SplineAxis ar{grid_.Nr, grid_.r_min, grid_.dr(), BoundaryCondition::Natural};
  const SplineAxis at{grid_.Ntheta, 0.0, grid_.dtheta(), BoundaryCondition::Periodic};
  const SplineFactorization fr(ar), ft(at);
  const std::size_t slice = grid_.slice_size();
  planes_.resize(grid_.Nphi);
  if (!exact_dphi_ && grid_.Nphi > 1) dphi_planes_.resize(grid_.Nphi);
  for (int k = 0; k < grid_.Nphi; ++k) {
    std::vector<double> c(phi_.begin() + k * slice, phi_.begin() + (k + 1) * slice);
    solve_coeffs_2d_inplace(c, fr, ft);
    planes_[k] = SplineRep2D(ar, at, std::move(c));
    if (!dphi_planes_.empty()) {
      const int kp = (k + 1) % grid_.Nphi, km = (k + grid_.Nphi - 1) % grid_.Nphi;
      std::vector<double> d(slice);
      const double inv = 1.0 / (2.0 * grid_.dphi());
      for (std::size_t s = 0; s < slice; ++s) d[s] = (phi_[kp * slice + s] - phi_[km * slice + s]) * inv;
      solve_coeffs_2d_inplace(d, fr, ft);
      dphi_planes_[k] = SplineRep2D(ar, at, std::move(d));
    }
  }
}

void PotentialField::gradient(int k, double r, double theta, double& d_r, double& d_theta, double& d_phi) const {
  if (zero_) {
    d_r = d_theta = d_phi = 0.0;
    return;
  }
  double val;
  planes_[k].eval_grad(r, theta, val, d_r, d_theta);
  if (exact_dphi_)
    d_phi = exact_dphi_(r, theta, grid_.phi(k));
  else if (!dphi_planes_.empty())
    d_phi = dphi_planes_[k].eval(r, theta);
  else
    d_phi = 0.0;
}

double PotentialField::value(int k, double r, double theta) const {
  if (zero_) return 0.0;
  return planes_[k].eval(r, theta);
}

Velocity4 nonlinear_advection_field(const MagneticModel& model, const PotentialField& phi, double r,
                                    double theta, int k, double v) {
  double d_r, d_t, d_p;
  phi.gradient(k, r, theta, d_r, d_t, d_p);
  return nonlinear_velocity(model.local(r, theta), r, d_r, d_t, d_p, v);
}

}  // namespace gyrosl
