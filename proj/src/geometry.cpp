#include "gyrosl/geometry.hpp"

#include <array>
#include <sstream>

namespace gyrosl {

namespace {

// 8-point Gauss-Legendre nodes and weights on [-1, 1].
constexpr std::array<double, 8> kGLNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGLWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

}  // namespace

void GeometryParams::validate() const {
  auto fail = [](const std::string& key, const std::string& what) {
    throw ConfigError("geometry." + key + ": " + what);
  };
  if (!(rho_star > 0.0 && rho_star < 1.0)) fail("rho_star", "must lie in (0, 1)");
  if (!(aspect_ratio > 0.0)) fail("aspect_ratio", "must be > 0");
  if (!(r_min_over_a > 0.0)) fail("r_min_over_a", "must be > 0");
  if (!(r_max_over_a > r_min_over_a)) fail("r_max_over_a", "must exceed r_min_over_a");
  if (kind == GeometryKind::Toroidal && !(r_max_over_a < aspect_ratio))
    fail("r_max_over_a", "must be < aspect_ratio so that R = R0 + r cos(theta) stays positive");
  if (!(q0 > 0.0) || !(qa > 0.0)) fail("qa", "q0 and qa must be > 0");
  if (!(q_exponent > 0.0)) fail("q_exponent", "must be > 0");
  if (psi_panels < 1) fail("psi_panels", "must be >= 1");
}

MagneticModel::MagneticModel(const GeometryParams& params) : params_(params) {
  params_.validate();
  units_.rho_star = params_.rho_star;
  a_ = units_.minor_radius();
  R0_ = params_.aspect_ratio * a_;
  I_ = params_.toroidal_flux_function.value_or(units_.B0 * R0_);
  r_min_ = params_.r_min_over_a * a_;
  r_max_ = params_.r_max_over_a * a_;
}

void MagneticModel::check_radius(double r) const {
  // Node coordinates may carry one ulp of rounding at r_max.
  const double tol = 1e-12 * r_max_;
  if (!(r >= r_min_ - tol && r <= r_max_ + tol)) {
    std::ostringstream os;
    os << "radius " << r << " outside [" << r_min_ << ", " << r_max_ << "]";
    throw DomainError(os.str());
  }
}

FieldVector MagneticModel::magnetic_field(double r, double theta) const {
  check_radius(r);
  auto L = local(r, theta);
  return {0.0, L.B_theta, L.B_phi, L.B};
}

double MagneticModel::field_norm(double r, double theta) const {
  check_radius(r);
  return local(r, theta).B;
}

double MagneticModel::mu0_J_phi(double r, double theta) const {
  check_radius(r);
  return local(r, theta).mu0_J_phi;
}

double MagneticModel::b_dot_mu0J(double r, double theta) const {
  check_radius(r);
  auto L = local(r, theta);
  return L.B_phi / L.B * L.mu0_J_phi;
}

double MagneticModel::b_star_parallel(double r, double theta, double v_par) const {
  check_radius(r);
  auto L = local(r, theta);
  const double jpar = L.B_phi / L.B * L.mu0_J_phi;
  return L.B + units_.mass_over_charge() * v_par * jpar / L.B;
}

double MagneticModel::psi_quadrature(double r, int panels) const {
  const double h = (r - r_min_) / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = r_min_ + (p + 0.5) * h;
    double panel = 0.0;
    for (std::size_t k = 0; k < kGLNodes.size(); ++k) {
      const double s = mid + 0.5 * h * kGLNodes[k];
      panel += kGLWeights[k] * s / q(s);
    }
    sum += 0.5 * h * panel;
  }
  return -units_.B0 * sum;
}

double MagneticModel::psi(double r) const {
  const double B0 = units_.B0;
  if (params_.qa == params_.q0) return -B0 * (r * r - r_min_ * r_min_) / (2.0 * params_.q0);
  if (params_.q_exponent == 2.0) {
    // d psi/dr = -B0 r / (q0 + c r^2)
    const double c = (params_.qa - params_.q0) / (a_ * a_);
    return -B0 / (2.0 * c) * std::log((params_.q0 + c * r * r) / (params_.q0 + c * r_min_ * r_min_));
  }
  return psi_quadrature(r, params_.psi_panels);
}

double MagneticModel::p_phi(double r, double theta, double v_par) const {
  check_radius(r);
  return psi(r) + I_ * v_par / local(r, theta).B;
}

double MagneticModel::energy(double r, double theta, double v_par, double mu) const {
  if (mu < 0.0) throw DomainError("magnetic moment must be >= 0");
  if (mu == 0.0) return 0.5 * v_par * v_par;
  return 0.5 * v_par * v_par + mu * field_norm(r, theta);
}

double MagneticModel::poisson_bracket_B(double r, double theta, Coordinate target) const {
  check_radius(r);
  auto L = local(r, theta);
  const double b_theta = L.B_theta / L.B;
  const double b_phi = L.B_phi / L.B;
  const double gradB[3] = {L.dB_dr, L.dB_dtheta / r, 0.0};
  double gradX[3] = {0.0, 0.0, 0.0};
  switch (target) {
    case Coordinate::R: gradX[0] = 1.0; break;
    case Coordinate::Theta: gradX[1] = 1.0 / r; break;
    case Coordinate::Phi: gradX[2] = 1.0 / L.R; break;
  }
  return poisson_bracket(b_theta, b_phi, gradB, gradX);
}

double MagneticModel::jacobian_space(double r, double theta) const {
  check_radius(r);
  return local(r, theta).jacobian;
}

void Grid4D::validate() const {
  auto fail = [](const std::string& key, const std::string& what) {
    throw ConfigError("grid." + key + ": " + what);
  };
  if (Nr < 4) fail("Nr", "must be >= 4");
  if (Ntheta < 4) fail("Ntheta", "must be >= 4");
  if (!(Nphi == 1 || Nphi >= 4)) fail("Nphi", "must be 1 or >= 4");
  if (!(Nv == 1 || Nv >= 4)) fail("Nv", "must be 1 or >= 4");
  if (!(r_max > r_min) || !(r_min > 0.0)) fail("r_min", "need 0 < r_min < r_max");
  if (Nv == 1) {
    if (v_min != v_max) fail("v_max", "must equal v_min when Nv = 1");
  } else if (!(v_max > v_min)) {
    fail("v_max", "must exceed v_min");
  }
}

Profiles::Profiles(const ProfileParams& params, double minor_radius, const Grid4D& grid)
    : params_(params), a_(minor_radius) {
  if (!(params_.width_over_a > 0.0)) throw ConfigError("scenario.profile_width_over_a: must be > 0");
  n0_.resize(grid.Nr);
  Ti_.resize(grid.Nr);
  Te_.resize(grid.Nr);
  for (int i = 0; i < grid.Nr; ++i) {
    const double r = grid.r(i);
    n0_[i] = n0(r);
    Ti_[i] = Ti(r);
    Te_[i] = Te(r);
  }
}

Profiles Profiles::flat(const Grid4D& grid) { return Profiles(ProfileParams{}, 1.0, grid); }

double Profiles::generate(double kappa, double r) const {
  if (kappa == 0.0) return 1.0;
  const double width = params_.width_over_a * a_;
  const double center = params_.center_over_a * a_;
  return std::exp(-kappa / a_ * width * std::tanh((r - center) / width));
}

}  // namespace gyrosl
