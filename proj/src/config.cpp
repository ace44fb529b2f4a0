#include "gyrosl/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "gyrosl/io.hpp"

namespace gyrosl {

std::string to_string(ScenarioKind s) {
  switch (s) {
    case ScenarioKind::Case1: return "case1";
    case ScenarioKind::Case2: return "case2";
    case ScenarioKind::Cylindrical: return "cylindrical";
    case ScenarioKind::Toroidal: return "toroidal";
  }
  return "?";
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Thrown by the value parsers; the caller adds the key and location.
struct BadValue {
  std::string what;
};

double to_double(const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0') throw BadValue{"expected a number, got '" + v + "'"};
  if (!std::isfinite(x)) throw BadValue{"value must be finite"};
  return x;
}

long to_long(const std::string& v) {
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0') throw BadValue{"expected an integer, got '" + v + "'"};
  return x;
}

int to_int(const std::string& v) {
  const long x = to_long(v);
  if (x < -1000000000L || x > 1000000000L) throw BadValue{"integer out of range"};
  return static_cast<int>(x);
}

bool to_bool(const std::string& v) {
  const auto s = lower(v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw BadValue{"expected true or false, got '" + v + "'"};
}

std::vector<std::string> to_list(const std::string& v) {
  std::vector<std::string> out;
  std::istringstream is(v);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class E>
E to_enum(const std::string& v, std::initializer_list<std::pair<const char*, E>> names) {
  std::string allowed;
  for (const auto& [n, e] : names) {
    if (lower(v) == lower(n)) return e;
    allowed += allowed.empty() ? n : std::string(", ") + n;
  }
  throw BadValue{"unknown value '" + v + "' (allowed: " + allowed + ")"};
}

std::string num(double x) { return format_double(x); }

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (const auto& x : xs) {
    if (!out.empty()) out += ",";
    if constexpr (std::is_same_v<T, double>)
      out += num(x);
    else if constexpr (std::is_same_v<T, std::string>)
      out += x;
    else
      out += std::to_string(x);
  }
  return out;
}

std::string opt(const std::optional<double>& x) { return x ? num(*x) : "auto"; }
std::optional<double> to_opt(const std::string& v) {
  if (lower(v) == "auto") return std::nullopt;
  return to_double(v);
}

std::string bc_name(BoundaryCondition bc) {
  switch (bc) {
    case BoundaryCondition::Natural: return "Natural";
    case BoundaryCondition::ClampedZeroSlope: return "ClampedZeroSlope";
    case BoundaryCondition::Periodic: return "Periodic";
  }
  return "?";
}

struct Key {
  const char* name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"geometry.kind",
       [](RunConfig& c, const std::string& v) {
         c.geometry.kind = to_enum<GeometryKind>(v, {{"cylindrical", GeometryKind::Cylindrical},
                                                     {"toroidal", GeometryKind::Toroidal}});
       },
       [](const RunConfig& c) {
         return std::string(c.geometry.kind == GeometryKind::Cylindrical ? "cylindrical" : "toroidal");
       }},
      {"geometry.rho_star", [](RunConfig& c, const std::string& v) { c.geometry.rho_star = to_double(v); },
       [](const RunConfig& c) { return num(c.geometry.rho_star); }},
      {"geometry.aspect_ratio", [](RunConfig& c, const std::string& v) { c.geometry.aspect_ratio = to_double(v); },
       [](const RunConfig& c) { return num(c.geometry.aspect_ratio); }},
      {"geometry.q0", [](RunConfig& c, const std::string& v) { c.geometry.q0 = to_double(v); },
       [](const RunConfig& c) { return num(c.geometry.q0); }},
      {"geometry.qa", [](RunConfig& c, const std::string& v) { c.geometry.qa = to_double(v); },
       [](const RunConfig& c) { return num(c.geometry.qa); }},
      {"geometry.q_exponent", [](RunConfig& c, const std::string& v) { c.geometry.q_exponent = to_double(v); },
       [](const RunConfig& c) { return num(c.geometry.q_exponent); }},
      {"geometry.r_min_over_a", [](RunConfig& c, const std::string& v) { c.geometry.r_min_over_a = to_double(v); },
       [](const RunConfig& c) { return num(c.geometry.r_min_over_a); }},
      {"geometry.r_max_over_a", [](RunConfig& c, const std::string& v) { c.geometry.r_max_over_a = to_double(v); },
       [](const RunConfig& c) { return num(c.geometry.r_max_over_a); }},
      {"geometry.toroidal_flux_function",
       [](RunConfig& c, const std::string& v) { c.geometry.toroidal_flux_function = to_opt(v); },
       [](const RunConfig& c) { return opt(c.geometry.toroidal_flux_function); }},
      {"geometry.psi_panels", [](RunConfig& c, const std::string& v) { c.geometry.psi_panels = to_int(v); },
       [](const RunConfig& c) { return std::to_string(c.geometry.psi_panels); }},

      {"grid.Nr", [](RunConfig& c, const std::string& v) { c.grid.Nr = to_int(v); },
       [](const RunConfig& c) { return std::to_string(c.grid.Nr); }},
      {"grid.Ntheta", [](RunConfig& c, const std::string& v) { c.grid.Ntheta = to_int(v); },
       [](const RunConfig& c) { return std::to_string(c.grid.Ntheta); }},
      {"grid.Nphi", [](RunConfig& c, const std::string& v) { c.grid.Nphi = to_int(v); },
       [](const RunConfig& c) { return std::to_string(c.grid.Nphi); }},
      {"grid.Nv", [](RunConfig& c, const std::string& v) { c.grid.Nv = to_int(v); },
       [](const RunConfig& c) { return std::to_string(c.grid.Nv); }},
      {"grid.v_min", [](RunConfig& c, const std::string& v) { c.grid.v_min = to_double(v); },
       [](const RunConfig& c) { return num(c.grid.v_min); }},
      {"grid.v_max", [](RunConfig& c, const std::string& v) { c.grid.v_max = to_double(v); },
       [](const RunConfig& c) { return num(c.grid.v_max); }},

      {"scheme.scheme",
       [](RunConfig& c, const std::string& v) {
         c.scheme.scheme = to_enum<Scheme>(v, {{"BSL", Scheme::BSL}, {"FSL", Scheme::FSL}});
       },
       [](const RunConfig& c) { return to_string(c.scheme.scheme); }},
      {"scheme.foot_method",
       [](RunConfig& c, const std::string& v) {
         c.scheme.foot_method =
             to_enum<FootMethod>(v, {{"Taylor", FootMethod::Taylor}, {"Precomputed", FootMethod::Precomputed}});
       },
       [](const RunConfig& c) { return to_string(c.scheme.foot_method); }},
      {"scheme.dt", [](RunConfig& c, const std::string& v) { c.scheme.dt = to_double(v); },
       [](const RunConfig& c) { return num(c.scheme.dt); }},
      {"scheme.dt_nonlinear", [](RunConfig& c, const std::string& v) { c.scheme.dt_nonlinear = to_double(v); },
       [](const RunConfig& c) { return num(c.scheme.dt_nonlinear); }},
      {"scheme.M", [](RunConfig& c, const std::string& v) { c.scheme.M = to_int(v); },
       [](const RunConfig& c) { return std::to_string(c.scheme.M); }},
      {"scheme.split",
       [](RunConfig& c, const std::string& v) {
         c.scheme.split = to_enum<SplitMode>(
             v, {{"DirectStrang", SplitMode::DirectStrang}, {"LinearNonlinearSplit", SplitMode::LinearNonlinearSplit}});
       },
       [](const RunConfig& c) { return to_string(c.scheme.split); }},
      {"scheme.phi_forced_zero", [](RunConfig& c, const std::string& v) { c.scheme.phi_forced_zero = to_bool(v); },
       [](const RunConfig& c) { return std::string(c.scheme.phi_forced_zero ? "true" : "false"); }},
      {"scheme.symmetrized", [](RunConfig& c, const std::string& v) { c.scheme.symmetrized = to_bool(v); },
       [](const RunConfig& c) { return std::string(c.scheme.symmetrized ? "true" : "false"); }},
      {"scheme.radial_ghost_cells",
       [](RunConfig& c, const std::string& v) { c.scheme.radial_ghost_cells = to_int(v); },
       [](const RunConfig& c) { return std::to_string(c.scheme.radial_ghost_cells); }},
      {"scheme.radial_bc",
       [](RunConfig& c, const std::string& v) {
         c.scheme.radial_bc = to_enum<BoundaryCondition>(
             v, {{"Natural", BoundaryCondition::Natural}, {"ClampedZeroSlope", BoundaryCondition::ClampedZeroSlope}});
       },
       [](const RunConfig& c) { return bc_name(c.scheme.radial_bc); }},
      {"scheme.omega_mu", [](RunConfig& c, const std::string& v) { c.scheme.omega_mu = to_double(v); },
       [](const RunConfig& c) { return num(c.scheme.omega_mu); }},
      {"scheme.zero_fields", [](RunConfig& c, const std::string& v) { c.scheme.zero_fields = to_bool(v); },
       [](const RunConfig& c) { return std::string(c.scheme.zero_fields ? "true" : "false"); }},

      {"scenario.t_max", [](RunConfig& c, const std::string& v) { c.t_max = to_double(v); },
       [](const RunConfig& c) { return num(c.t_max); }},
      {"scenario.P_phi1", [](RunConfig& c, const std::string& v) { c.case1.P_phi1 = to_opt(v); },
       [](const RunConfig& c) { return opt(c.case1.P_phi1); }},
      {"scenario.P_phi2", [](RunConfig& c, const std::string& v) { c.case1.P_phi2 = to_opt(v); },
       [](const RunConfig& c) { return opt(c.case1.P_phi2); }},
      {"scenario.m", [](RunConfig& c, const std::string& v) { c.case1.m = to_int(v); },
       [](const RunConfig& c) { return std::to_string(c.case1.m); }},
      {"scenario.gamma", [](RunConfig& c, const std::string& v) { c.case1.gamma = to_opt(v); },
       [](const RunConfig& c) { return opt(c.case1.gamma); }},
      {"scenario.band_fraction", [](RunConfig& c, const std::string& v) { c.case1.band_fraction = to_double(v); },
       [](const RunConfig& c) { return num(c.case1.band_fraction); }},
      {"scenario.theta1", [](RunConfig& c, const std::string& v) { c.case2.theta1 = to_double(v); },
       [](const RunConfig& c) { return num(c.case2.theta1); }},
      {"scenario.theta2", [](RunConfig& c, const std::string& v) { c.case2.theta2 = to_double(v); },
       [](const RunConfig& c) { return num(c.case2.theta2); }},
      {"scenario.perturbation_m", [](RunConfig& c, const std::string& v) { c.perturbation.m_mode = to_int(v); },
       [](const RunConfig& c) { return std::to_string(c.perturbation.m_mode); }},
      {"scenario.perturbation_n", [](RunConfig& c, const std::string& v) { c.perturbation.n_mode = to_int(v); },
       [](const RunConfig& c) { return std::to_string(c.perturbation.n_mode); }},
      {"scenario.epsilon", [](RunConfig& c, const std::string& v) { c.perturbation.epsilon = to_double(v); },
       [](const RunConfig& c) { return num(c.perturbation.epsilon); }},
      {"scenario.kappa_n", [](RunConfig& c, const std::string& v) { c.profiles.kappa_n = to_double(v); },
       [](const RunConfig& c) { return num(c.profiles.kappa_n); }},
      {"scenario.kappa_Ti", [](RunConfig& c, const std::string& v) { c.profiles.kappa_Ti = to_double(v); },
       [](const RunConfig& c) { return num(c.profiles.kappa_Ti); }},
      {"scenario.kappa_Te", [](RunConfig& c, const std::string& v) { c.profiles.kappa_Te = to_double(v); },
       [](const RunConfig& c) { return num(c.profiles.kappa_Te); }},
      {"scenario.profile_center_over_a",
       [](RunConfig& c, const std::string& v) { c.profiles.center_over_a = to_double(v); },
       [](const RunConfig& c) { return num(c.profiles.center_over_a); }},
      {"scenario.profile_width_over_a",
       [](RunConfig& c, const std::string& v) { c.profiles.width_over_a = to_double(v); },
       [](const RunConfig& c) { return num(c.profiles.width_over_a); }},

      {"output.period", [](RunConfig& c, const std::string& v) { c.output.period = to_double(v); },
       [](const RunConfig& c) { return num(c.output.period); }},
      {"output.slice_times",
       [](RunConfig& c, const std::string& v) {
         c.output.slice_times.clear();
         for (const auto& s : to_list(v)) c.output.slice_times.push_back(to_double(s));
       },
       [](const RunConfig& c) { return join(c.output.slice_times); }},
      {"output.slice_phi",
       [](RunConfig& c, const std::string& v) {
         c.output.slice_phi.clear();
         for (const auto& s : to_list(v)) c.output.slice_phi.push_back(to_int(s));
       },
       [](const RunConfig& c) { return join(c.output.slice_phi); }},
      {"output.slice_v",
       [](RunConfig& c, const std::string& v) {
         c.output.slice_v.clear();
         for (const auto& s : to_list(v)) c.output.slice_v.push_back(to_int(s));
       },
       [](const RunConfig& c) { return join(c.output.slice_v); }},
      {"output.slice_fields",
       [](RunConfig& c, const std::string& v) {
         c.output.slice_fields = to_list(v);
         for (const auto& s : c.output.slice_fields)
           if (s != "f" && s != "phi" && s != "rho") throw BadValue{"unknown field '" + s + "' (allowed: f, phi, rho)"};
       },
       [](const RunConfig& c) { return join(c.output.slice_fields); }},
      {"output.dir",
       [](RunConfig& c, const std::string& v) {
         c.output.dir = v;
         c.output.dir_set = true;
       },
       [](const RunConfig& c) { return c.output.dir; }},
      {"output.run_name", [](RunConfig& c, const std::string& v) { c.output.run_name = v; },
       [](const RunConfig& c) { return c.run_name(); }},
      {"output.checkpoint", [](RunConfig& c, const std::string& v) { c.output.checkpoint = to_bool(v); },
       [](const RunConfig& c) { return std::string(c.output.checkpoint ? "true" : "false"); }},
      {"output.checkpoint_every", [](RunConfig& c, const std::string& v) { c.output.checkpoint_every = to_long(v); },
       [](const RunConfig& c) { return std::to_string(c.output.checkpoint_every); }},
      {"output.foot_cache", [](RunConfig& c, const std::string& v) { c.output.foot_cache = v; },
       [](const RunConfig& c) { return c.output.foot_cache; }},
  };
  return table;
}

const Key* find_key(const std::string& name) {
  for (const auto& k : keys())
    if (name == k.name) return &k;
  return nullptr;
}

struct Entry {
  std::string key, value, where;
};

void split_entry(const std::string& raw, const std::string& where, std::vector<Entry>& out) {
  std::string line = raw;
  if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
  line = trim(line);
  if (line.empty()) return;
  const auto eq = line.find('=');
  if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
  Entry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where};
  if (e.key.empty()) throw ConfigError(where + ": missing key before '='");
  out.push_back(std::move(e));
}

void check(bool ok, const std::string& key, const std::string& constraint) {
  if (!ok) throw ConfigError(key + ": " + constraint);
}

}  // namespace

RunConfig default_config(ScenarioKind scenario) {
  RunConfig c;
  c.scenario = scenario;
  c.scheme.dt = 10.0;
  c.scheme.M = 64;
  c.scheme.foot_method = FootMethod::Precomputed;
  switch (scenario) {
    case ScenarioKind::Case1:
    case ScenarioKind::Case2:
      c.geometry.kind = GeometryKind::Toroidal;
      c.geometry.rho_star = 0.01;
      c.grid = GridSize{128, 128, 1, 1, -3.0, -3.0};
      c.scheme.phi_forced_zero = true;
      c.t_max = scenario == ScenarioKind::Case1 ? 100.0 : 50000.0;
      break;
    case ScenarioKind::Cylindrical:
      c.geometry.kind = GeometryKind::Cylindrical;
      c.geometry.rho_star = 1.0 / 32.0;
      c.grid = GridSize{64, 128, 16, 32, -5.0, 5.0};
      c.scheme.phi_forced_zero = false;
      c.t_max = 2000.0;
      break;
    case ScenarioKind::Toroidal:
      c.geometry.kind = GeometryKind::Toroidal;
      c.geometry.rho_star = 1.0 / 40.0;
      c.grid = GridSize{128, 128, 32, 32, -5.0, 5.0};
      c.scheme.phi_forced_zero = false;
      c.t_max = 2000.0;
      break;
  }
  return c;
}

Grid4D RunConfig::make_grid(const MagneticModel& model) const {
  Grid4D g;
  g.Nr = grid.Nr;
  g.Ntheta = grid.Ntheta;
  g.Nphi = grid.Nphi;
  g.Nv = grid.Nv;
  g.r_min = model.r_min();
  g.r_max = model.r_max();
  g.v_min = grid.v_min;
  g.v_max = grid.v_max;
  return g;
}

long RunConfig::n_steps() const { return std::lround(t_max / scheme.dt); }

void RunConfig::validate() const {
  geometry.validate();
  check(grid.Nr >= 4, "grid.Nr", "must be >= 4 (got " + std::to_string(grid.Nr) + ")");
  check(grid.Ntheta >= 4, "grid.Ntheta", "must be >= 4 (got " + std::to_string(grid.Ntheta) + ")");
  check(grid.Nphi == 1 || grid.Nphi >= 4, "grid.Nphi", "must be 1 or >= 4 (got " + std::to_string(grid.Nphi) + ")");
  check(grid.Nv == 1 || grid.Nv >= 4, "grid.Nv", "must be 1 or >= 4 (got " + std::to_string(grid.Nv) + ")");
  if (grid.Nv == 1)
    check(grid.v_min == grid.v_max, "grid.v_max", "must equal grid.v_min when grid.Nv = 1");
  else
    check(grid.v_max > grid.v_min, "grid.v_max", "must be > grid.v_min");
  check(scheme.M >= 1, "scheme.M", "must be >= 1 (got " + std::to_string(scheme.M) + ")");
  scheme.validate();
  check(t_max > 0.0, "scenario.t_max", "must be > 0");
  const double steps = t_max / scheme.dt;
  check(std::abs(steps - std::round(steps)) <= 1e-9 * std::max(1.0, steps), "scenario.t_max",
        "must be a whole number of scheme.dt steps");

  const bool conservation = scenario == ScenarioKind::Case1 || scenario == ScenarioKind::Case2;
  if (conservation) {
    check(scheme.phi_forced_zero, "scheme.phi_forced_zero", "must be true for " + to_string(scenario));
    check(case1.m >= 1, "scenario.m", "must be >= 1");
    check(case1.band_fraction > 0.0 && case1.band_fraction <= 1.0, "scenario.band_fraction", "must be in (0, 1]");
    check(case1.P_phi1.has_value() == case1.P_phi2.has_value(), "scenario.P_phi2",
          "scenario.P_phi1 and scenario.P_phi2 must be set together");
    if (case1.P_phi1) check(*case1.P_phi1 < *case1.P_phi2, "scenario.P_phi2", "must be > scenario.P_phi1");
    if (case1.gamma) check(std::isfinite(*case1.gamma), "scenario.gamma", "must be finite");
  }
  if (scenario == ScenarioKind::Case2) {
    check(grid.Nphi == 1, "grid.Nphi", "must be 1 for case2");
    check(grid.Nv == 1, "grid.Nv", "must be 1 for case2");
    check(case2.theta1 >= 0.0 && case2.theta1 < case2.theta2 && case2.theta2 <= kTwoPi, "scenario.theta2",
          "need 0 <= theta1 < theta2 <= 2 pi");
  }
  if (!conservation) {
    check(perturbation.epsilon >= 0.0, "scenario.epsilon", "must be >= 0");
    check(profiles.width_over_a > 0.0, "scenario.profile_width_over_a", "must be > 0");
  }
  check(output.period >= 0.0, "output.period", "must be >= 0");
  if (output.period > 0.0) {
    const double k = output.period / scheme.dt;
    check(std::abs(k - std::round(k)) <= 1e-9 * std::max(1.0, k) && std::round(k) >= 1, "output.period",
          "must be a positive multiple of scheme.dt");
  }
  for (double t : output.slice_times) check(t >= 0.0 && t <= t_max, "output.slice_times", "times must lie in [0, t_max]");
  for (int k : output.slice_phi) check(k >= 0 && k < grid.Nphi, "output.slice_phi", "index out of range");
  for (int m : output.slice_v) check(m >= 0 && m < grid.Nv, "output.slice_v", "index out of range");
  check(output.checkpoint_every >= 0, "output.checkpoint_every", "must be >= 0");
  check(!output.dir.empty(), "output.dir", "must not be empty");
  const std::string name = run_name();
  check(name.find('/') == std::string::npos && name != "." && name != "..", "output.run_name",
        "must be a plain directory name");
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides, const std::string& source) {
  std::vector<Entry> entries;
  {
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) split_entry(line, source + ":" + std::to_string(++lineno), entries);
  }
  for (std::size_t i = 0; i < overrides.size(); ++i) {
    if (overrides[i].find('=') == std::string::npos)
      throw ConfigError("--override '" + overrides[i] + "': expected key=value");
    split_entry(overrides[i], "--override " + std::to_string(i + 1), entries);
  }

  // The last scenario entry picks the defaults.
  std::optional<ScenarioKind> scenario;
  for (const auto& e : entries) {
    if (e.key != "scenario") continue;
    try {
      scenario = to_enum<ScenarioKind>(e.value, {{"case1", ScenarioKind::Case1},
                                                 {"case2", ScenarioKind::Case2},
                                                 {"cylindrical", ScenarioKind::Cylindrical},
                                                 {"toroidal", ScenarioKind::Toroidal}});
    } catch (const BadValue& b) {
      throw ConfigError(e.where + ": scenario: " + b.what);
    }
  }
  if (!scenario) throw ConfigError(source + ": missing required key 'scenario'");

  RunConfig c = default_config(*scenario);
  for (const auto& e : entries) {
    if (e.key == "scenario") continue;
    const Key* k = find_key(e.key);
    if (!k) throw ConfigError(e.where + ": unknown key '" + e.key + "'");
    try {
      k->set(c, e.value);
    } catch (const BadValue& b) {
      throw ConfigError(e.where + ": " + e.key + ": " + b.what);
    }
  }
  c.validate();
  return c;
}

std::string to_text(const RunConfig& c) {
  std::string out = "scenario = " + to_string(c.scenario) + "\n";
  std::string section;
  for (const auto& k : keys()) {
    const std::string name = k.name;
    const std::string sec = name.substr(0, name.find('.'));
    if (sec != section) {
      out += "\n";
      section = sec;
    }
    out += name + " = " + k.get(c) + "\n";
  }
  return out;
}

}  // namespace gyrosl
