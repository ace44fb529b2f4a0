#pragma once

// Directional semi-Lagrangian advections (backward interpolation or forward
// deposition), the (v/2, phi/2, r-theta, phi/2, v/2) Strang sequence, and the
// macro step that alternates the linear and nonlinear operators.

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gyrosl/characteristics.hpp"
#include "gyrosl/diagnostics.hpp"
#include "gyrosl/geometry.hpp"
#include "gyrosl/qn_solver.hpp"

namespace gyrosl {

enum class Scheme { BSL, FSL };
enum class SplitMode { DirectStrang, LinearNonlinearSplit };
// Which advection fields a Strang sequence uses.
enum class Operator { Linear, Nonlinear, Combined };

std::string to_string(Scheme s);
std::string to_string(FootMethod m);
std::string to_string(SplitMode s);

struct SchemeConfig {
  Scheme scheme = Scheme::BSL;
  FootMethod foot_method = FootMethod::Precomputed;
  double dt = 10.0;
  // Only equal to dt is supported (no sub-cycling); kept as a separate key.
  double dt_nonlinear = 0.0;
  int M = 64;
  SplitMode split = SplitMode::LinearNonlinearSplit;
  bool phi_forced_zero = false;
  // L/2 - N - L/2 instead of L - N.
  bool symmetrized = false;
  int radial_ghost_cells = 4;
  BoundaryCondition radial_bc = BoundaryCondition::Natural;
  double omega_mu = 1.0;
  // Debug: every advection is the identity.
  bool zero_fields = false;

  void validate() const;
};

struct DistributionField {
  Grid4D grid;
  std::vector<double> data;
  double time = 0.0;
  long step = 0;

  DistributionField() = default;
  explicit DistributionField(const Grid4D& g) : grid(g), data(g.size(), 0.0) {}

  double* slice(int ip, int iv) { return data.data() + (static_cast<std::size_t>(iv) * grid.Nphi + ip) * grid.slice_size(); }
  const double* slice(int ip, int iv) const {
    return data.data() + (static_cast<std::size_t>(iv) * grid.Nphi + ip) * grid.slice_size();
  }
  // Throws NumericalError naming the first non-finite node.
  void check_finite() const;
};

struct StepReport {
  double mass_before = 0.0;
  double mass_after = 0.0;
  double dmass_L = 0.0;
  double dmass_N = 0.0;
  // Weight carried across the radial or v boundaries by FSL deposits plus
  // the change from resetting the v end planes.
  double boundary_loss = 0.0;
  std::size_t clamped_feet = 0;
};

struct FieldState {
  std::vector<double> rho;  // [phi][r][theta]
  std::vector<double> phi;
  PotentialField potential;
};

class VlasovSolver {
 public:
  VlasovSolver(const MagneticModel& model, const Grid4D& grid, const SchemeConfig& config);

  const Grid4D& grid() const { return grid_; }
  const SchemeConfig& config() const { return cfg_; }
  const MagneticModel& model() const { return model_; }
  const PhaseSpaceWeights& weights() const { return weights_; }

  // Enables the quasineutrality solve used by the split step.
  void attach_field_solver(const Profiles& profiles);
  bool has_field_solver() const { return qn_ != nullptr; }
  // Values held fixed on the v = v_min and v = v_max planes.
  void set_boundary_planes(const DistributionField& f0);

  // Linear (r, theta) displacements for a step length, built on first use.
  const FootTable& foot_table(double dt);
  void insert_foot_table(FootTable table);

  void advect_phi(DistributionField& f, Operator op, const PotentialField* phi, double dt, StepReport& rep);
  void advect_v(DistributionField& f, Operator op, const PotentialField* phi, double dt, StepReport& rep);
  void advect_rtheta(DistributionField& f, Operator op, const PotentialField* phi, double dt, StepReport& rep);
  void strang_step(DistributionField& f, Operator op, const PotentialField* phi, double dt, StepReport& rep);

  // rho and Phi from the current f (Phi = 0 when forced).
  void update_fields(const DistributionField& f, std::span<const double> f_eq, FieldState& state) const;

  // One macro step of length config().dt.
  StepReport step(DistributionField& f, std::span<const double> f_eq, FieldState& state);

 private:
  Direction direction() const { return cfg_.scheme == Scheme::BSL ? Direction::Backward : Direction::Forward; }
  bool has_linear(Operator op) const { return op != Operator::Nonlinear; }
  bool has_nonlinear(Operator op, const PotentialField* phi) const {
    return op != Operator::Linear && phi != nullptr && !phi->zero();
  }
  void reset_v_planes(DistributionField& f, StepReport& rep) const;
  double mass(const DistributionField& f) const { return weights_.integrate(f.data); }

  MagneticModel model_;
  Grid4D grid_;
  SchemeConfig cfg_;
  PhaseSpaceWeights weights_;
  // dphi/dt of the linear operator at each (v, r, theta).
  std::vector<double> lin_phi_;
  // J_s B*_par on the radially padded slice, per v.
  std::vector<double> jb_padded_;
  // B and j_par / B on the padded slice, for B*_par = B + v j_par / B.
  SplineRep2D B_padded_, jq_padded_;
  std::vector<LocalField<double>> local_;
  std::map<std::pair<double, int>, FootTable> tables_;
  std::unique_ptr<QuasiNeutralitySolver> qn_;
  std::optional<Profiles> profiles_;
  std::vector<double> v_lo_plane_, v_hi_plane_;
};

}  // namespace gyrosl
