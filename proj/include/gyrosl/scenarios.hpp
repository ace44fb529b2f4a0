#pragma once

// Initial conditions and run orchestration.
//
// case1 / case2 are conservation runs (Phi = 0, linear operator only) whose
// initial functions depend on the invariant P_phi; cylindrical / toroidal are
// full nonlinear runs seeded with a perturbed Maxwellian.

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gyrosl/config.hpp"
#include "gyrosl/io.hpp"
#include "gyrosl/vlasov_core.hpp"

namespace gyrosl {

struct PPhiBand {
  double P1 = 0.0;
  double P2 = 0.0;
  double gamma = 0.0;
};

// Min and max of P_phi over all grid nodes.
std::pair<double, double> p_phi_range(const MagneticModel& model, const Grid4D& grid);

// Central `fraction` of the P_phi values that lie strictly between the rings
// r_min + 5% and r_max - 5% at v = v_min, so the support never touches the
// radial boundary. Throws ConfigError when that window is empty.
PPhiBand select_p_phi_band(const MagneticModel& model, const Grid4D& grid, double fraction);

// Resolves unset bounds and gamma; rejects a band outside the node range.
PPhiBand resolve_band(const MagneticModel& model, const Grid4D& grid, const Case1Params& params);

DistributionField init_case1(const Grid4D& grid, const MagneticModel& model, const Case1Params& params);
// Requires Nphi = Nv = 1.
DistributionField init_case2(const Grid4D& grid, const MagneticModel& model, const Case1Params& params,
                             const Case2Params& window);

struct PerturbedMaxwellian {
  DistributionField f;
  std::vector<double> f_eq;
};

// f_eq = n0 / sqrt(2 pi Ti) exp(-v^2 / (2 Ti));
// f = f_eq (1 + eps cos(m theta + n phi) sin^2(pi (r - r_min) / (r_max - r_min))).
PerturbedMaxwellian init_maxwellian_perturbed(const Grid4D& grid, const Profiles& profiles, const Perturbation& pert);

// One run: owns the model, solver, initial state and diagnostic accumulators.
class Simulation {
 public:
  explicit Simulation(const RunConfig& config);

  const RunConfig& config() const { return cfg_; }
  const MagneticModel& model() const { return model_; }
  const Grid4D& grid() const { return grid_; }
  VlasovSolver& solver() { return *solver_; }
  const Profiles& profiles() const { return profiles_; }
  const DistributionField& f() const { return f_; }
  DistributionField& f() { return f_; }
  const DistributionField& f0() const { return f0_; }
  const std::vector<double>& f_eq() const { return f_eq_; }
  const PPhiBand& band() const { return band_; }
  // rho and Phi of the current f as of the last refresh_fields() or
  // diagnostics() call; empty when Phi is forced to zero.
  const FieldState& fields() const { return diag_fields_; }
  void refresh_fields();

  long steps_done() const { return f_.step; }
  long total_steps() const { return cfg_.n_steps(); }
  bool finished() const { return f_.step >= total_steps(); }
  double boundary_loss() const { return boundary_loss_; }
  std::size_t clamped_feet() const { return clamped_; }

  void advance();
  // Diagnostics of the current state; the per-operator mass deltas are those
  // accumulated since the previous call.
  DiagnosticsRecord diagnostics();

  // field: "f" (index iv), "phi" or "rho" (iv ignored).
  Slice2D slice(const std::string& field, int ip, int iv) const;

  void save_checkpoint(const std::filesystem::path& path) const;
  // The checkpoint must come from the same configuration (output keys and
  // scenario.t_max may differ).
  void load_checkpoint(const std::filesystem::path& path);

 private:
  RunConfig cfg_;
  MagneticModel model_;
  Grid4D grid_;
  Profiles profiles_;
  std::unique_ptr<VlasovSolver> solver_;
  DistributionField f_, f0_;
  std::vector<double> f_eq_;
  PPhiBand band_;
  FieldState step_fields_, diag_fields_;
  double E_kin0_ = 0.0, E_pot0_ = 0.0;
  bool have_reference_ = false;
  double acc_dL_ = 0.0, acc_dN_ = 0.0;
  double boundary_loss_ = 0.0;
  std::size_t clamped_ = 0;
};

struct RunSummary {
  std::filesystem::path run_dir;
  std::vector<DiagnosticsRecord> series;
  long steps = 0;
  double wall_seconds = 0.0;
};

struct RunOptions {
  // Resume from run_dir/checkpoint.bin when it exists.
  bool resume = false;
  // Called after every diagnostics row.
  std::function<void(const DiagnosticsRecord&)> progress;
};

// Runs the configured scenario into out_root / run_name: diagnostics.csv,
// config.resolved, slice files, checkpoint.bin and run.json.
RunSummary run(const RunConfig& config, const std::filesystem::path& out_root, const RunOptions& options = {});

// Builds (or loads) the linear foot table and stores it in the cache
// directory. Returns the file path.
std::filesystem::path precompute_feet(const RunConfig& config, const std::filesystem::path& cache_dir);

}  // namespace gyrosl
