#pragma once

// Flat `key = value` run configuration with section prefixes geometry.,
// grid., scheme., scenario., output.; `#` starts a comment. The scenario key
// selects the defaults, every other key overrides one field. Unknown keys are
// errors.

#include <optional>
#include <string>
#include <vector>

#include "gyrosl/geometry.hpp"
#include "gyrosl/vlasov_core.hpp"

namespace gyrosl {

enum class ScenarioKind { Case1, Case2, Cylindrical, Toroidal };

std::string to_string(ScenarioKind s);

// f = 1_[P1,P2](P) (P - P1)^m (P - P2)^m sin(gamma P). Unset bounds are
// chosen from the grid (see select_p_phi_band).
struct Case1Params {
  std::optional<double> P_phi1;
  std::optional<double> P_phi2;
  int m = 1;
  std::optional<double> gamma;  // default 4 pi / (P2 - P1)
  double band_fraction = 0.6;
};

struct Case2Params {
  double theta1 = 0.75 * kPi;
  double theta2 = 1.25 * kPi;
};

struct Perturbation {
  int m_mode = 5;
  int n_mode = 3;
  double epsilon = 1e-4;
};

struct OutputParams {
  double period = 0.0;  // 0: every step
  std::vector<double> slice_times;
  std::vector<int> slice_phi{0};
  std::vector<int> slice_v;  // empty: the node closest to v = -3
  std::vector<std::string> slice_fields{"f"};
  std::string dir = "runs";
  bool dir_set = false;
  std::string run_name;  // default: the scenario name
  // Macro steps between checkpoints; 0 writes one only at the end.
  long checkpoint_every = 0;
  bool checkpoint = true;
  // Directory holding cached foot tables; empty disables the cache.
  std::string foot_cache;
};

struct GridSize {
  int Nr = 128;
  int Ntheta = 128;
  int Nphi = 1;
  int Nv = 1;
  double v_min = -3.0;
  double v_max = -3.0;
};

struct RunConfig {
  ScenarioKind scenario = ScenarioKind::Case1;
  GeometryParams geometry;
  GridSize grid;
  SchemeConfig scheme;
  double t_max = 100.0;
  Case1Params case1;
  Case2Params case2;
  Perturbation perturbation;
  ProfileParams profiles;
  OutputParams output;

  Grid4D make_grid(const MagneticModel& model) const;
  long n_steps() const;
  std::string run_name() const { return output.run_name.empty() ? to_string(scenario) : output.run_name; }
  // Throws ConfigError naming the key and the violated constraint.
  void validate() const;
};

RunConfig default_config(ScenarioKind scenario);

// `overrides` are "key=value" strings applied after the file contents.
RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {},
                       const std::string& source = "config");
// Fully resolved config in the same grammar; parse_config(to_text(c)) == c.
std::string to_text(const RunConfig& config);

}  // namespace gyrosl
