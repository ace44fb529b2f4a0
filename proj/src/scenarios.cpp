#include "gyrosl/scenarios.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gyrosl {

namespace {

double p_phi_at(const MagneticModel& model, double r, double theta, double v) {
  const auto L = model.local(r, theta);
  return model.psi(r) + model.toroidal_flux_function() * v / L.B;
}

double ipow(double x, int m) {
  double y = 1.0;
  for (int k = 0; k < m; ++k) y *= x;
  return y;
}

double window(double x, double lo, double hi, int m) {
  if (x < lo || x > hi) return 0.0;
  return ipow(x - lo, m) * ipow(x - hi, m);
}

std::string format_range(double lo, double hi) {
  std::ostringstream os;
  os.precision(10);
  os << "[" << lo << ", " << hi << "]";
  return os.str();
}

// Config text without the keys that may change between a checkpoint and a
// resumed run.
std::string restart_signature(const RunConfig& c) {
  std::istringstream is(to_text(c));
  std::string line, out;
  while (std::getline(is, line))
    if (line.rfind("output.", 0) != 0 && line.rfind("scenario.t_max", 0) != 0) out += line + "\n";
  return out;
}

constexpr char kCheckpointMagic[8] = {'G', 'Y', 'S', 'L', 'C', 'K', 'P', '1'};

template <class T>
void put(std::ofstream& o, const T& x) {
  o.write(reinterpret_cast<const char*>(&x), sizeof(T));
}

template <class T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T x{};
  in.read(reinterpret_cast<char*>(&x), sizeof(T));
  if (!in) throw IoError(path.string() + ": truncated checkpoint");
  return x;
}

std::filesystem::path foot_cache_file(const std::filesystem::path& dir, std::uint64_t key) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "feet_%016llx.bin", static_cast<unsigned long long>(key));
  return dir / buf;
}

double linear_table_dt(const SchemeConfig& s) {
  return (s.split == SplitMode::LinearNonlinearSplit && s.symmetrized) ? 0.5 * s.dt : s.dt;
}

std::uint64_t table_key(const RunConfig& cfg, const Grid4D& grid) {
  const Direction dir = cfg.scheme.scheme == Scheme::BSL ? Direction::Backward : Direction::Forward;
  return foot_table_key(cfg.geometry, grid, cfg.scheme.radial_ghost_cells, linear_table_dt(cfg.scheme), cfg.scheme.M,
                        dir, cfg.scheme.foot_method);
}

}  // namespace

std::pair<double, double> p_phi_range(const MagneticModel& model, const Grid4D& grid) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int iv = 0; iv < grid.Nv; ++iv)
    for (int ir = 0; ir < grid.Nr; ++ir)
      for (int it = 0; it < grid.Ntheta; ++it) {
        const double p = p_phi_at(model, grid.r(ir), grid.theta(it), grid.v(iv));
        lo = std::min(lo, p);
        hi = std::max(hi, p);
      }
  return {lo, hi};
}

PPhiBand select_p_phi_band(const MagneticModel& model, const Grid4D& grid, double fraction) {
  const double span = grid.r_max - grid.r_min;
  const double r_in = grid.r_min + 0.05 * span;
  const double r_out = grid.r_max - 0.05 * span;
  const double v = grid.v_min;
  // P_phi decreases outward; take the values reached on neither ring's far side.
  const int samples = std::max(1024, 4 * grid.Ntheta);
  double outer_max = -std::numeric_limits<double>::infinity();
  double inner_min = std::numeric_limits<double>::infinity();
  double outer_min = inner_min, inner_max = outer_max;
  for (int k = 0; k < samples; ++k) {
    const double th = kTwoPi * k / samples;
    const double po = p_phi_at(model, r_out, th, v);
    const double pi = p_phi_at(model, r_in, th, v);
    outer_max = std::max(outer_max, po);
    outer_min = std::min(outer_min, po);
    inner_min = std::min(inner_min, pi);
    inner_max = std::max(inner_max, pi);
  }
  double lo = outer_max, hi = inner_min;
  if (inner_max < outer_min) {
    // P_phi increases outward (reversed field or large |v|)
    lo = inner_max;
    hi = outer_min;
  }
  if (!(hi > lo))
    throw ConfigError("scenario.P_phi1: no P_phi band fits between the rings r = " + std::to_string(r_in) + " and r = " +
                      std::to_string(r_out) + "; set scenario.P_phi1 and scenario.P_phi2 explicitly");
  const double mid = 0.5 * (lo + hi), half = 0.5 * fraction * (hi - lo);
  PPhiBand b{mid - half, mid + half, 0.0};
  b.gamma = 4.0 * kPi / (b.P2 - b.P1);
  return b;
}

PPhiBand resolve_band(const MagneticModel& model, const Grid4D& grid, const Case1Params& params) {
  PPhiBand b;
  if (params.P_phi1 && params.P_phi2) {
    b.P1 = *params.P_phi1;
    b.P2 = *params.P_phi2;
    if (!(b.P1 < b.P2)) throw ConfigError("scenario.P_phi2: must be > scenario.P_phi1");
    const auto [lo, hi] = p_phi_range(model, grid);
    if (!(b.P1 > lo && b.P2 < hi))
      throw ConfigError("scenario.P_phi1: interval " + format_range(b.P1, b.P2) +
                        " is not strictly inside the P_phi range of the grid " + format_range(lo, hi));
  } else if (params.P_phi1 || params.P_phi2) {
    throw ConfigError("scenario.P_phi2: scenario.P_phi1 and scenario.P_phi2 must be set together");
  } else {
    b = select_p_phi_band(model, grid, params.band_fraction);
  }
  b.gamma = params.gamma.value_or(4.0 * kPi / (b.P2 - b.P1));
  return b;
}

DistributionField init_case1(const Grid4D& grid, const MagneticModel& model, const Case1Params& params) {
  const PPhiBand b = resolve_band(model, grid, params);
  DistributionField f(grid);
  for (int iv = 0; iv < grid.Nv; ++iv)
    for (int ir = 0; ir < grid.Nr; ++ir)
      for (int it = 0; it < grid.Ntheta; ++it) {
        const double p = p_phi_at(model, grid.r(ir), grid.theta(it), grid.v(iv));
        const double val = window(p, b.P1, b.P2, params.m) * std::sin(b.gamma * p);
        for (int ip = 0; ip < grid.Nphi; ++ip) f.data[grid.index(ir, it, ip, iv)] = val;
      }
  return f;
}

DistributionField init_case2(const Grid4D& grid, const MagneticModel& model, const Case1Params& params,
                             const Case2Params& w) {
  if (grid.Nphi != 1 || grid.Nv != 1) throw ConfigError("grid: case2 needs grid.Nphi = 1 and grid.Nv = 1");
  if (!(w.theta1 >= 0.0 && w.theta1 < w.theta2 && w.theta2 <= kTwoPi))
    throw ConfigError("scenario.theta2: need 0 <= theta1 < theta2 <= 2 pi");
  const PPhiBand b = resolve_band(model, grid, params);
  DistributionField f(grid);
  for (int ir = 0; ir < grid.Nr; ++ir)
    for (int it = 0; it < grid.Ntheta; ++it) {
      const double th = grid.theta(it);
      const double p = p_phi_at(model, grid.r(ir), th, grid.v(0));
      f.data[grid.index(ir, it, 0, 0)] = window(p, b.P1, b.P2, params.m) * window(th, w.theta1, w.theta2, params.m);
    }
  return f;
}

PerturbedMaxwellian init_maxwellian_perturbed(const Grid4D& grid, const Profiles& profiles, const Perturbation& pert) {
  if (!(pert.epsilon >= 0.0)) throw ConfigError("scenario.epsilon: must be >= 0");
  PerturbedMaxwellian out{DistributionField(grid), std::vector<double>(grid.size())};
  const auto& n0 = profiles.n0_nodes();
  const auto& Ti = profiles.Ti_nodes();
  for (int iv = 0; iv < grid.Nv; ++iv) {
    const double v = grid.v(iv);
    for (int ip = 0; ip < grid.Nphi; ++ip)
      for (int ir = 0; ir < grid.Nr; ++ir) {
        const double feq = n0[ir] / std::sqrt(kTwoPi * Ti[ir]) * std::exp(-v * v / (2.0 * Ti[ir]));
        const double s = std::sin(kPi * (grid.r(ir) - grid.r_min) / (grid.r_max - grid.r_min));
        const double g = (ir == 0 || ir == grid.Nr - 1) ? 0.0 : s * s;
        for (int it = 0; it < grid.Ntheta; ++it) {
          const std::size_t k = grid.index(ir, it, ip, iv);
          out.f_eq[k] = feq;
          out.f.data[k] =
              feq * (1.0 + pert.epsilon * std::cos(pert.m_mode * grid.theta(it) + pert.n_mode * grid.phi(ip)) * g);
        }
      }
  }
  return out;
}

Simulation::Simulation(const RunConfig& config) : cfg_(config), model_((config.validate(), config.geometry)) {
  grid_ = cfg_.make_grid(model_);
  grid_.validate();
  profiles_ = Profiles(cfg_.profiles, model_.minor_radius(), grid_);
  solver_ = std::make_unique<VlasovSolver>(model_, grid_, cfg_.scheme);

  switch (cfg_.scenario) {
    case ScenarioKind::Case1:
      band_ = resolve_band(model_, grid_, cfg_.case1);
      f_ = init_case1(grid_, model_, cfg_.case1);
      f_eq_.assign(grid_.size(), 0.0);
      break;
    case ScenarioKind::Case2:
      band_ = resolve_band(model_, grid_, cfg_.case1);
      f_ = init_case2(grid_, model_, cfg_.case1, cfg_.case2);
      f_eq_.assign(grid_.size(), 0.0);
      break;
    case ScenarioKind::Cylindrical:
    case ScenarioKind::Toroidal: {
      auto init = init_maxwellian_perturbed(grid_, profiles_, cfg_.perturbation);
      f_ = std::move(init.f);
      f_eq_ = std::move(init.f_eq);
      break;
    }
  }
  f0_ = f_;
  if (!cfg_.scheme.phi_forced_zero) solver_->attach_field_solver(profiles_);
  if (grid_.Nv > 1) solver_->set_boundary_planes(f0_);

  if (!cfg_.output.foot_cache.empty()) {
    const auto path = foot_cache_file(cfg_.output.foot_cache, table_key(cfg_, grid_));
    FootTable table;
    const auto key = table_key(cfg_, grid_);
    if (load_foot_table(path.string(), key, table)) {
      solver_->insert_foot_table(std::move(table));
    } else {
      std::filesystem::create_directories(cfg_.output.foot_cache);
      save_foot_table(solver_->foot_table(linear_table_dt(cfg_.scheme)), key, path.string());
    }
  }
}

void Simulation::advance() {
  const StepReport rep = solver_->step(f_, f_eq_, step_fields_);
  acc_dL_ += rep.dmass_L;
  acc_dN_ += rep.dmass_N;
  boundary_loss_ += rep.boundary_loss;
  clamped_ += rep.clamped_feet;
}

void Simulation::refresh_fields() {
  if (!cfg_.scheme.phi_forced_zero) {
    solver_->update_fields(f_, f_eq_, diag_fields_);
  } else {
    diag_fields_.rho.clear();
    diag_fields_.phi.clear();
  }
}

DiagnosticsRecord Simulation::diagnostics() {
  const PhaseSpaceWeights& w = solver_->weights();
  refresh_fields();
  const MassMax mm = mass_and_max(f_.data, w);
  const Norms nv = norms_vs_initial(f_.data, f0_.data, w);
  const Energies e = energies(f_.data, f_eq_, diag_fields_.phi, diag_fields_.rho, w, model_, profiles_);
  if (!have_reference_) {
    E_kin0_ = e.kinetic;
    E_pot0_ = e.potential;
    have_reference_ = true;
  }
  DiagnosticsRecord r;
  r.t = f_.time;
  r.u1 = nv.u1;
  r.uinf = nv.uinf;
  r.mass = mm.mass;
  r.fmax = mm.fmax;
  r.E_kin = e.kinetic;
  r.E_pot = e.potential;
  r.E_tot_dev = (e.kinetic - E_kin0_) + (e.potential - E_pot0_);
  r.dmass_L = acc_dL_;
  r.dmass_N = acc_dN_;
  r.boundary_loss = boundary_loss_;
  acc_dL_ = acc_dN_ = 0.0;
  return r;
}

Slice2D Simulation::slice(const std::string& field, int ip, int iv) const {
  if (ip < 0 || ip >= grid_.Nphi) throw DomainError("slice: phi index out of range");
  Slice2D s;
  for (int ir = 0; ir < grid_.Nr; ++ir) s.r.push_back(grid_.r(ir));
  for (int it = 0; it < grid_.Ntheta; ++it) s.theta.push_back(grid_.theta(it));
  const std::size_t n = grid_.slice_size();
  if (field == "f") {
    if (iv < 0 || iv >= grid_.Nv) throw DomainError("slice: v index out of range");
    const double* p = f_.slice(ip, iv);
    s.values.assign(p, p + n);
  } else if (field == "phi" || field == "rho") {
    const auto& src = field == "phi" ? diag_fields_.phi : diag_fields_.rho;
    if (src.empty())
      s.values.assign(n, 0.0);
    else
      s.values.assign(src.begin() + ip * n, src.begin() + (ip + 1) * n);
  } else {
    throw DomainError("slice: unknown field '" + field + "'");
  }
  return s;
}

void Simulation::save_checkpoint(const std::filesystem::path& path) const {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
    if (!o) throw IoError(tmp + ": cannot open for writing");
    o.write(kCheckpointMagic, sizeof kCheckpointMagic);
    const std::string sig = restart_signature(cfg_);
    put<std::uint64_t>(o, sig.size());
    o.write(sig.data(), static_cast<std::streamsize>(sig.size()));
    put<std::int64_t>(o, f_.step);
    put(o, f_.time);
    put(o, boundary_loss_);
    put(o, acc_dL_);
    put(o, acc_dN_);
    put(o, E_kin0_);
    put(o, E_pot0_);
    put<std::uint8_t>(o, have_reference_ ? 1 : 0);
    put<std::uint64_t>(o, clamped_);
    put<std::uint64_t>(o, f_.data.size());
    o.write(reinterpret_cast<const char*>(f_.data.data()), static_cast<std::streamsize>(f_.data.size() * sizeof(double)));
    if (!o) throw IoError(tmp + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError(path.string() + ": cannot move checkpoint into place: " + ec.message());
}

void Simulation::load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open");
  char magic[sizeof kCheckpointMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw IoError(path.string() + ": not a checkpoint");
  const auto len = get<std::uint64_t>(in, path);
  if (len > (1u << 20)) throw IoError(path.string() + ": corrupt checkpoint header");
  std::string sig(len, '\0');
  in.read(sig.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError(path.string() + ": truncated checkpoint");
  if (sig != restart_signature(cfg_))
    throw ConfigError(path.string() + ": checkpoint was written by a different configuration");
  const long step = static_cast<long>(get<std::int64_t>(in, path));
  const double time = get<double>(in, path);
  const double loss = get<double>(in, path);
  const double dL = get<double>(in, path);
  const double dN = get<double>(in, path);
  const double ek = get<double>(in, path);
  const double ep = get<double>(in, path);
  const bool ref = get<std::uint8_t>(in, path) != 0;
  const auto clamped = get<std::uint64_t>(in, path);
  const auto n = get<std::uint64_t>(in, path);
  if (n != f_.data.size()) throw IoError(path.string() + ": distribution size does not match the grid");
  std::vector<double> data(n);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw IoError(path.string() + ": truncated checkpoint");
  f_.data = std::move(data);
  f_.step = step;
  f_.time = time;
  boundary_loss_ = loss;
  acc_dL_ = dL;
  acc_dN_ = dN;
  E_kin0_ = ek;
  E_pot0_ = ep;
  have_reference_ = ref;
  clamped_ = clamped;
}

RunSummary run(const RunConfig& cfg, const std::filesystem::path& out_root, const RunOptions& options) {
  const auto t_start = std::chrono::steady_clock::now();
  RunSummary summary;
  summary.run_dir = out_root / cfg.run_name();
  std::error_code ec;
  std::filesystem::create_directories(summary.run_dir, ec);
  if (ec) throw IoError(summary.run_dir.string() + ": cannot create run directory: " + ec.message());

  Simulation sim(cfg);
  const Grid4D& g = sim.grid();
  const double dt = cfg.scheme.dt;
  const auto csv = summary.run_dir / "diagnostics.csv";
  const auto ckpt = summary.run_dir / "checkpoint.bin";
  const long every = cfg.output.period > 0.0 ? std::max(1L, std::lround(cfg.output.period / dt)) : 1L;

  std::vector<int> v_idx = cfg.output.slice_v;
  if (v_idx.empty()) {
    int best = 0;
    for (int iv = 1; iv < g.Nv; ++iv)
      if (std::abs(g.v(iv) + 3.0) < std::abs(g.v(best) + 3.0)) best = iv;
    v_idx.push_back(best);
  }
  std::vector<long> slice_steps;
  for (double t : cfg.output.slice_times) slice_steps.push_back(std::lround(t / dt));

  auto write_slices = [&]() {
    if (std::find(slice_steps.begin(), slice_steps.end(), sim.steps_done()) == slice_steps.end()) return;
    sim.refresh_fields();
    for (const auto& field : cfg.output.slice_fields)
      for (int ip : cfg.output.slice_phi) {
        if (field == "f") {
          for (int iv : v_idx)
            write_slice(summary.run_dir / slice_file_name(field, sim.f().time, ip, iv), sim.slice(field, ip, iv));
        } else {
          write_slice(summary.run_dir / slice_file_name(field, sim.f().time, ip, 0), sim.slice(field, ip, 0));
        }
      }
  };

  const bool resumed = options.resume && std::filesystem::exists(ckpt) && std::filesystem::exists(csv);
  std::unique_ptr<DiagnosticsWriter> writer;
  if (resumed) {
    sim.load_checkpoint(ckpt);
    truncate_diagnostics(csv, sim.f().time + 0.5 * dt);
    summary.series = read_diagnostics(csv);
    writer = std::make_unique<DiagnosticsWriter>(csv, true);
  } else {
    write_text_file(summary.run_dir / "config.resolved", to_text(cfg));
    writer = std::make_unique<DiagnosticsWriter>(csv);
    const auto r = sim.diagnostics();
    writer->write(r);
    summary.series.push_back(r);
    if (options.progress) options.progress(r);
    write_slices();
  }

  long since_ckpt = 0;
  while (!sim.finished()) {
    try {
      sim.advance();
    } catch (...) {
      // leave a last row describing the state that failed
      try {
        writer->write(sim.diagnostics());
      } catch (...) {
      }
      throw;
    }
    ++since_ckpt;
    if (sim.steps_done() % every == 0 || sim.finished()) {
      const auto r = sim.diagnostics();
      writer->write(r);
      summary.series.push_back(r);
      if (options.progress) options.progress(r);
      if (cfg.output.checkpoint && cfg.output.checkpoint_every > 0 && since_ckpt >= cfg.output.checkpoint_every &&
          !sim.finished()) {
        sim.save_checkpoint(ckpt);
        since_ckpt = 0;
      }
    }
    write_slices();
  }
  if (cfg.output.checkpoint) sim.save_checkpoint(ckpt);

  summary.steps = sim.steps_done();
  summary.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  nlohmann::json meta;
  meta["scenario"] = to_string(cfg.scenario);
  meta["run_name"] = cfg.run_name();
  meta["scheme"] = to_string(cfg.scheme.scheme);
  meta["foot_method"] = to_string(cfg.scheme.foot_method);
  meta["split"] = to_string(cfg.scheme.split);
  meta["steps"] = summary.steps;
  meta["t_final"] = sim.f().time;
  meta["wall_seconds"] = summary.wall_seconds;
  meta["resumed"] = resumed;
  meta["clamped_feet"] = sim.clamped_feet();
  meta["boundary_loss"] = sim.boundary_loss();
#ifdef _OPENMP
  meta["threads"] = omp_get_max_threads();
#else
  meta["threads"] = 1;
#endif
  if (cfg.scenario == ScenarioKind::Case1 || cfg.scenario == ScenarioKind::Case2)
    meta["p_phi_band"] = {{"P_phi1", sim.band().P1}, {"P_phi2", sim.band().P2}, {"gamma", sim.band().gamma}};
  write_text_file(summary.run_dir / "run.json", meta.dump(2) + "\n");
  return summary;
}

std::filesystem::path precompute_feet(const RunConfig& cfg, const std::filesystem::path& cache_dir) {
  cfg.validate();
  const MagneticModel model(cfg.geometry);
  const Grid4D grid = cfg.make_grid(model);
  const auto key = table_key(cfg, grid);
  const auto path = foot_cache_file(cache_dir, key);
  FootTable table;
  if (load_foot_table(path.string(), key, table)) return path;
  std::error_code ec;
  std::filesystem::create_directories(cache_dir, ec);
  if (ec) throw IoError(cache_dir.string() + ": cannot create: " + ec.message());
  const Direction dir = cfg.scheme.scheme == Scheme::BSL ? Direction::Backward : Direction::Forward;
  table = build_foot_table(model, grid, cfg.scheme.radial_ghost_cells, linear_table_dt(cfg.scheme), cfg.scheme.M, dir,
                           cfg.scheme.foot_method);
  save_foot_table(table, key, path.string());
  return path;
}

}  // namespace gyrosl
