#include "gyrosl/vlasov_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gyrosl {

std::string to_string(Scheme s) { return s == Scheme::BSL ? "BSL" : "FSL"; }
std::string to_string(FootMethod m) { return m == FootMethod::Taylor ? "Taylor" : "Precomputed"; }
std::string to_string(SplitMode s) {
  return s == SplitMode::DirectStrang ? "DirectStrang" : "LinearNonlinearSplit";
}

void SchemeConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("scheme.dt: must be > 0");
  if (dt_nonlinear != 0.0 && dt_nonlinear != dt)
    throw ConfigError("scheme.dt_nonlinear: must equal scheme.dt (sub-cycling is not implemented)");
  if (M < 1) throw ConfigError("scheme.M: must be >= 1");
  if (radial_ghost_cells < 0) throw ConfigError("scheme.radial_ghost_cells: must be >= 0");
  if (!(omega_mu > 0.0)) throw ConfigError("scheme.omega_mu: must be > 0");
  if (radial_bc == BoundaryCondition::Periodic) throw ConfigError("scheme.radial_bc: the radial axis cannot be periodic");
}

void DistributionField::check_finite() const {
  for (std::size_t s = 0; s < data.size(); ++s)
    if (!std::isfinite(data[s])) {
      const std::size_t slice = grid.slice_size();
      const std::size_t plane = slice * grid.Nphi;
      std::ostringstream os;
      os << "non-finite distribution value at (ir=" << (s % slice) / grid.Ntheta << ", itheta=" << s % grid.Ntheta
         << ", iphi=" << (s % plane) / slice << ", iv=" << s / plane << ") after step " << step;
      throw NumericalError(os.str());
    }
}

namespace {

double b_star_of(const LocalField<double>& L, double v) {
  return L.B + v * (L.B_phi / L.B) * L.mu0_J_phi / L.B;
}

// Periodic or natural-BC spline along a strided line; `c` holds one
// coefficient per node.
double eval_line(const double* c, std::ptrdiff_t stride, const SplineAxis& ax, double x, bool& clamped) {
  double t;
  const int i0 = locate(ax, x, t, clamped);
  double w[4];
  bspline_weights(t, w);
  double sum = 0.0;
  if (ax.periodic()) {
    for (int a = 0; a < 4; ++a) {
      int i = i0 - 1 + a;
      i = i < 0 ? i + ax.n : (i >= ax.n ? i - ax.n : i);
      sum += w[a] * c[i * stride];
    }
    return sum;
  }
  const int n = ax.n;
  for (int a = 0; a < 4; ++a) {
    const int k = i0 - 1 + a;
    double ck;
    if (k < 0)
      ck = ax.ghost_a() * c[0] + ax.ghost_b() * c[stride];
    else if (k >= n)
      ck = ax.ghost_a() * c[(n - 1) * stride] + ax.ghost_b() * c[(n - 2) * stride];
    else
      ck = c[k * stride];
    sum += w[a] * ck;
  }
  return sum;
}

// Periodic line with its wrap-around coefficients appended: e[k + 1] is basis
// k for k in [-1, n + 1].
void wrap_line(const double* c, int n, double* e) {
  e[0] = c[n - 1];
  std::copy(c, c + n, e + 1);
  e[n + 1] = c[0];
  e[n + 2] = c[1];
}

double eval_wrapped(const double* e, const SplineAxis& ax, double x) {
  double t;
  bool clamped;
  const int i0 = locate(ax, x, t, clamped);
  double w[4];
  bspline_weights(t, w);
  return w[0] * e[i0] + w[1] * e[i0 + 1] + w[2] * e[i0 + 2] + w[3] * e[i0 + 3];
}

// Deposits the coefficients of one strided line displaced by disp(owner node)
// into `out` (same stride, accumulated). Non-periodic axes add the two ghost
// particles and drop stencil weight beyond the ends.
void deposit_line(const double* c, std::ptrdiff_t stride, const SplineAxis& ax, const double* disp,
                  double* out) {
  const int n = ax.n;
  auto put = [&](double w, double u) {
    const double fl = std::floor(u);
    const int i0 = static_cast<int>(fl);
    double ws[4];
    bspline_weights(u - fl, ws);
    for (int a = 0; a < 4; ++a) {
      int i = i0 - 1 + a;
      if (ax.periodic()) {
        i %= n;
        if (i < 0) i += n;
      } else if (i < 0 || i >= n) {
        continue;
      }
      out[i * stride] += w * ws[a];
    }
  };
  for (int k = 0; k < n; ++k) put(c[k * stride], k + disp[k] / ax.spacing);
  if (!ax.periodic()) {
    put(ax.ghost_a() * c[0] + ax.ghost_b() * c[stride], -1.0 + disp[0] / ax.spacing);
    put(ax.ghost_a() * c[(n - 1) * stride] + ax.ghost_b() * c[(n - 2) * stride], n + disp[n - 1] / ax.spacing);
  }
}

struct NodeGradients {
  std::vector<double> d_r, d_theta, d_phi;  // [phi][r][theta]
};

NodeGradients node_gradients(const PotentialField& phi, const Grid4D& g) {
  NodeGradients out;
  const std::size_t plane = g.plane_size();
  out.d_r.resize(plane);
  out.d_theta.resize(plane);
  out.d_phi.resize(plane);
#pragma omp parallel for collapse(2) schedule(static)
  for (int ip = 0; ip < g.Nphi; ++ip)
    for (int ir = 0; ir < g.Nr; ++ir)
      for (int it = 0; it < g.Ntheta; ++it) {
        const std::size_t s = (static_cast<std::size_t>(ip) * g.Nr + ir) * g.Ntheta + it;
        phi.gradient(ip, g.r(ir), g.theta(it), out.d_r[s], out.d_theta[s], out.d_phi[s]);
      }
  return out;
}

// E x B (r, theta) rates on the padded slice. The numerators do not depend
// on v, so they are splined once per toroidal plane and divided by
// B*_par = B + v j_par / B at the evaluation point.
class ExBRates {
 public:
  ExBRates(const MagneticModel& model, const PotentialField& phi, const Grid4D& g, int G, const SplineRep2D& B,
           const SplineRep2D& jq)
      : B_(B), jq_(jq), ar_(B.axis0()), at_(B.axis1()) {
    const int rows = ar_.n, Nt = at_.n;
    const SplineFactorization fr(ar_), ft(at_);
    num_r_.resize(g.Nphi);
    num_t_.resize(g.Nphi);
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < g.Nphi; ++k) {
      std::vector<double> nr(static_cast<std::size_t>(rows) * Nt), nt(nr.size());
      for (int p = 0; p < rows; ++p) {
        const double r = g.r_min + (p - G) * g.dr();
        // Ghost rows see the odd image of Phi across the wall (Phi = 0 there), not
        // the clamped gradient: a frozen d_r with r-dependent B makes the ghost flow
        // compressible, and FSL feeds that back into the edge rows.
        double r_src = r, sign = 1.0;
        if (p < G) {
          r_src = 2.0 * g.r_min - r;
          sign = -1.0;
        } else if (p >= G + g.Nr) {
          r_src = 2.0 * g.r_max - r;
          sign = -1.0;
        }
        for (int it = 0; it < Nt; ++it) {
          const LocalField<double> L = model.local(r, g.theta(it));
          double d_r, d_t, d_p;
          phi.gradient(k, r_src, g.theta(it), d_r, d_t, d_p);
          d_t *= sign;
          d_p *= sign;
          const double b_theta = L.B_theta / L.B, b_phi = L.B_phi / L.B;
          nr[p * Nt + it] = b_theta * d_p / L.R - b_phi * d_t / r;
          nt[p * Nt + it] = b_phi * d_r / r;
        }
      }
      solve_coeffs_2d_inplace(nr, fr, ft);
      solve_coeffs_2d_inplace(nt, fr, ft);
      num_r_[k] = SplineRep2D(ar_, at_, std::move(nr));
      num_t_[k] = SplineRep2D(ar_, at_, std::move(nt));
    }
  }

  void operator()(int k, double r, double theta, double v, double& a_r, double& a_t) const {
    double t0, t1;
    bool c;
    const int i0 = locate(ar_, r, t0, c);
    const int j0 = locate(at_, theta, t1, c);
    double w0[4], w1[4];
    bspline_weights(t0, w0);
    bspline_weights(t1, w1);
    const double inv = 1.0 / (B_.contract(i0, j0, w0, w1) + v * jq_.contract(i0, j0, w0, w1));
    a_r = num_r_[k].contract(i0, j0, w0, w1) * inv;
    a_t = num_t_[k].contract(i0, j0, w0, w1) * inv;
  }

 private:
  const SplineRep2D& B_;
  const SplineRep2D& jq_;
  SplineAxis ar_, at_;
  std::vector<SplineRep2D> num_r_, num_t_;
};

}  // namespace

VlasovSolver::VlasovSolver(const MagneticModel& model, const Grid4D& grid, const SchemeConfig& config)
    : model_(model), grid_(grid), cfg_(config) {
  grid_.validate();
  cfg_.validate();
  if (cfg_.dt_nonlinear == 0.0) cfg_.dt_nonlinear = cfg_.dt;
  const int G = cfg_.radial_ghost_cells;
  if (grid_.r_min - G * grid_.dr() <= 0.0)
    throw ConfigError("scheme.radial_ghost_cells: padded radial axis reaches r <= 0; use fewer ghost cells");
  weights_ = PhaseSpaceWeights(model_, grid_);

  const std::size_t slice = grid_.slice_size();
  local_.resize(slice);
  for (int ir = 0; ir < grid_.Nr; ++ir)
    for (int it = 0; it < grid_.Ntheta; ++it) local_[ir * grid_.Ntheta + it] = model_.local(grid_.r(ir), grid_.theta(it));

  lin_phi_.resize(slice * grid_.Nv);
  const int rows = grid_.Nr + 2 * G;
  jb_padded_.resize(static_cast<std::size_t>(rows) * grid_.Ntheta * grid_.Nv);
  for (int iv = 0; iv < grid_.Nv; ++iv) {
    const double v = grid_.v(iv);
    for (std::size_t s = 0; s < slice; ++s)
      lin_phi_[iv * slice + s] = linear_velocity_phi(model_, grid_.r(static_cast<int>(s / grid_.Ntheta)),
                                                     grid_.theta(static_cast<int>(s % grid_.Ntheta)), v);
    for (int p = 0; p < rows; ++p) {
      const double r = grid_.r_min + (p - G) * grid_.dr();
      for (int it = 0; it < grid_.Ntheta; ++it) {
        const auto L = model_.local(r, grid_.theta(it));
        jb_padded_[(static_cast<std::size_t>(iv) * rows + p) * grid_.Ntheta + it] = L.jacobian * b_star_of(L, v);
      }
    }
  }

  {
    const SplineAxis arp{rows, grid_.r_min - G * grid_.dr(), grid_.dr(), BoundaryCondition::Natural};
    const SplineAxis at{grid_.Ntheta, 0.0, grid_.dtheta(), BoundaryCondition::Periodic};
    const SplineFactorization frp(arp), ft(at);
    std::vector<double> b(static_cast<std::size_t>(rows) * grid_.Ntheta), jq(b.size());
    for (int p = 0; p < rows; ++p)
      for (int it = 0; it < grid_.Ntheta; ++it) {
        const auto L = model_.local(grid_.r_min + (p - G) * grid_.dr(), grid_.theta(it));
        b[p * grid_.Ntheta + it] = L.B;
        jq[p * grid_.Ntheta + it] = (L.B_phi / L.B) * L.mu0_J_phi / L.B;
      }
    solve_coeffs_2d_inplace(b, frp, ft);
    solve_coeffs_2d_inplace(jq, frp, ft);
    B_padded_ = SplineRep2D(arp, at, std::move(b));
    jq_padded_ = SplineRep2D(arp, at, std::move(jq));
  }
}

void VlasovSolver::attach_field_solver(const Profiles& profiles) {
  profiles_ = profiles;
  qn_ = std::make_unique<QuasiNeutralitySolver>(grid_, profiles, model_.B0());
}

void VlasovSolver::set_boundary_planes(const DistributionField& f0) {
  if (!f0.grid.same_shape(grid_)) throw DomainError("boundary planes: grid mismatch");
  if (grid_.Nv < 2) return;
  const std::size_t plane = grid_.plane_size();
  v_lo_plane_.assign(f0.data.begin(), f0.data.begin() + plane);
  v_hi_plane_.assign(f0.data.end() - plane, f0.data.end());
}

const FootTable& VlasovSolver::foot_table(double dt) {
  const auto key = std::make_pair(dt, static_cast<int>(direction()));
  auto it = tables_.find(key);
  if (it != tables_.end()) return it->second;
  FootTable t = build_foot_table(model_, grid_, cfg_.radial_ghost_cells, dt, cfg_.M, direction(), cfg_.foot_method);
  return tables_.emplace(key, std::move(t)).first->second;
}

void VlasovSolver::insert_foot_table(FootTable table) {
  if (!table.grid().same_shape(grid_) || table.ghost() != cfg_.radial_ghost_cells || table.substeps() != cfg_.M ||
      table.method() != cfg_.foot_method || table.direction() != direction())
    throw DomainError("foot table was built for a different configuration");
  const auto key = std::make_pair(table.dt(), static_cast<int>(table.direction()));
  tables_.insert_or_assign(key, std::move(table));
}

void VlasovSolver::reset_v_planes(DistributionField& f, StepReport& rep) const {
  if (v_lo_plane_.empty()) return;
  const std::size_t plane = grid_.plane_size();
  const std::size_t slice = grid_.slice_size();
  double delta = 0.0;
  const int planes[2] = {0, grid_.Nv - 1};
  for (int which = 0; which < 2; ++which) {
    const int iv = planes[which];
    const std::vector<double>& keep = which == 0 ? v_lo_plane_ : v_hi_plane_;
    double* dst = f.data.data() + static_cast<std::size_t>(iv) * plane;
    for (int ip = 0; ip < grid_.Nphi; ++ip) {
      const double before = weights_.integrate_slice(dst + ip * slice, iv);
      std::copy(keep.begin() + ip * slice, keep.begin() + (ip + 1) * slice, dst + ip * slice);
      delta += before - weights_.integrate_slice(dst + ip * slice, iv);
    }
  }
  rep.boundary_loss += delta;
}

void VlasovSolver::advect_phi(DistributionField& f, Operator op, const PotentialField* phi, double dt,
                              StepReport& rep) {
  (void)rep;
  if (cfg_.zero_fields || grid_.Nphi == 1) return;
  const bool lin = has_linear(op);
  const bool nl = has_nonlinear(op, phi);
  if (!lin && !nl) return;

  const int Np = grid_.Nphi;
  const std::size_t slice = grid_.slice_size();
  const SplineAxis ax{Np, 0.0, grid_.dphi(), BoundaryCondition::Periodic};
  const SplineFactorization fac(ax);
  const double sgn = direction() == Direction::Backward ? -dt : dt;
  const bool fsl = cfg_.scheme == Scheme::FSL;

  NodeGradients grad;
  if (nl) grad = node_gradients(*phi, grid_);

  // Lines along phi are transposed to [s][k] so each one is contiguous.
  auto transpose_in = [&](const double* src, std::vector<double>& dst) {
#pragma omp parallel for schedule(static)
    for (std::size_t s = 0; s < slice; ++s)
      for (int k = 0; k < Np; ++k) dst[s * Np + k] = src[k * slice + s];
  };
  std::vector<double> coef(Np * slice), coef_t(Np * slice), rate, rate_t, rate_ct, out_t(Np * slice);
  if (nl) {
    rate.resize(Np * slice);
    rate_t.resize(Np * slice);
    rate_ct.resize(Np * slice);
  }
  for (int iv = 0; iv < grid_.Nv; ++iv) {
    const double v = grid_.v(iv);
    double* fb = f.data.data() + static_cast<std::size_t>(iv) * Np * slice;
    std::copy(fb, fb + Np * slice, coef.begin());
    fac.solve_batch(coef.data(), slice);
    transpose_in(coef.data(), coef_t);
    if (nl) {
#pragma omp parallel for schedule(static)
      for (int ip = 0; ip < Np; ++ip)
        for (std::size_t s = 0; s < slice; ++s) {
          const std::size_t g = ip * slice + s;
          const double r = grid_.r(static_cast<int>(s / grid_.Ntheta));
          double u = nonlinear_velocity(local_[s], r, grad.d_r[g], grad.d_theta[g], grad.d_phi[g], v).phi;
          if (lin) u += lin_phi_[iv * slice + s];
          rate[g] = u;
        }
      transpose_in(rate.data(), rate_t);
      fac.solve_batch(rate.data(), slice);
      transpose_in(rate.data(), rate_ct);
    }
    if (fsl) std::fill(out_t.begin(), out_t.end(), 0.0);

#pragma omp parallel
    {
      std::vector<double> disp(Np), ce(Np + 3), re(Np + 3);
#pragma omp for schedule(static)
      for (std::size_t s = 0; s < slice; ++s) {
        const double* c = coef_t.data() + s * Np;
        double* o = out_t.data() + s * Np;
        if (nl) wrap_line(rate_ct.data() + s * Np, Np, re.data());
        for (int k = 0; k < Np; ++k) {
          double d;
          if (!nl) {
            d = sgn * lin_phi_[iv * slice + s];
          } else {
            d = sgn * rate_t[s * Np + k];
            for (int it = 0; it < 2; ++it) d = sgn * eval_wrapped(re.data(), ax, grid_.phi(k) + 0.5 * d);
          }
          disp[k] = d;
        }
        if (fsl) {
          deposit_line(c, 1, ax, disp.data(), o);
        } else {
          wrap_line(c, Np, ce.data());
          for (int k = 0; k < Np; ++k) o[k] = eval_wrapped(ce.data(), ax, grid_.phi(k) + disp[k]);
        }
      }
    }
#pragma omp parallel for schedule(static)
    for (int k = 0; k < Np; ++k)
      for (std::size_t s = 0; s < slice; ++s) fb[k * slice + s] = out_t[s * Np + k];
  }
}

void VlasovSolver::advect_v(DistributionField& f, Operator op, const PotentialField* phi, double dt,
                            StepReport& rep) {
  // The linear operator has no parallel acceleration at mu = 0.
  if (cfg_.zero_fields || grid_.Nv == 1 || !has_nonlinear(op, phi)) return;

  const int Nv = grid_.Nv;
  const std::size_t plane = grid_.plane_size();
  const std::size_t slice = grid_.slice_size();
  const SplineAxis ax{Nv, grid_.v_min, grid_.dv(), BoundaryCondition::Natural};
  const SplineFactorization fac(ax);
  const double sgn = direction() == Direction::Backward ? -dt : dt;
  const bool fsl = cfg_.scheme == Scheme::FSL;
  const NodeGradients grad = node_gradients(*phi, grid_);

  std::vector<double> coef(f.data.size());
  if (fsl) {
    for (int iv = 0; iv < Nv; ++iv)
      for (std::size_t b = 0; b < plane; ++b)
        coef[iv * plane + b] = b_star_of(local_[b % slice], grid_.v(iv)) * f.data[iv * plane + b];
  } else {
    coef = f.data;
  }
  fac.solve_batch(coef.data(), plane);

  std::vector<double> loss(plane, 0.0);
  std::size_t clamped = 0;
#pragma omp parallel reduction(+ : clamped)
  {
    std::vector<double> disp(Nv), line(Nv), bs(Nv), cl(Nv);
#pragma omp for schedule(static)
    for (std::size_t b = 0; b < plane; ++b) {
      const std::size_t s = b % slice;
      const LocalField<double>& L = local_[s];
      const double r = grid_.r(static_cast<int>(s / grid_.Ntheta));
      auto accel = [&](double v) { return nonlinear_velocity(L, r, grad.d_r[b], grad.d_theta[b], grad.d_phi[b], v).v; };
      for (int iv = 0; iv < Nv; ++iv) {
        const double v = grid_.v(iv);
        double d = sgn * accel(v);
        for (int it = 0; it < 2; ++it) d = sgn * accel(v + 0.5 * d);
        disp[iv] = d;
      }
      if (fsl) {
        double before = 0.0, after = 0.0;
        for (int iv = 0; iv < Nv; ++iv) {
          bs[iv] = b_star_of(L, grid_.v(iv));
          before += grid_.v_weight(iv) * bs[iv] * f.data[iv * plane + b];
          cl[iv] = coef[iv * plane + b];
          line[iv] = 0.0;
        }
        deposit_line(cl.data(), 1, ax, disp.data(), line.data());
        for (int iv = 0; iv < Nv; ++iv) {
          after += grid_.v_weight(iv) * line[iv];
          f.data[iv * plane + b] = line[iv] / bs[iv];
        }
        const int ir = static_cast<int>(s / grid_.Ntheta);
        loss[b] = (before - after) * L.jacobian * grid_.radial_weight(ir) * grid_.cell_volume();
      } else {
        for (int iv = 0; iv < Nv; ++iv) {
          bool c;
          f.data[iv * plane + b] = eval_line(coef.data() + b, plane, ax, grid_.v(iv) + disp[iv], c);
          if (c) ++clamped;
        }
      }
    }
  }
  rep.clamped_feet += clamped;
  if (fsl)
    for (double x : loss) rep.boundary_loss += x;
  reset_v_planes(f, rep);
}

void VlasovSolver::advect_rtheta(DistributionField& f, Operator op, const PotentialField* phi, double dt,
                                 StepReport& rep) {
  if (cfg_.zero_fields) return;
  const bool lin = has_linear(op) && model_.kind() == GeometryKind::Toroidal;
  const bool nl = has_nonlinear(op, phi);
  if (!lin && !nl) return;

  const int Nr = grid_.Nr, Nt = grid_.Ntheta, G = cfg_.radial_ghost_cells;
  const int rows = Nr + 2 * G;
  const std::size_t slice = grid_.slice_size();
  const std::size_t pslice = static_cast<std::size_t>(rows) * Nt;
  const bool fsl = cfg_.scheme == Scheme::FSL;
  const Direction dir = direction();
  const FootTable* table = (lin && !nl) ? &foot_table(dt) : nullptr;

  const SplineAxis ar{Nr, grid_.r_min, grid_.dr(), cfg_.radial_bc};
  const SplineAxis arp{rows, grid_.r_min - G * grid_.dr(), grid_.dr(), cfg_.radial_bc};
  const SplineAxis at{Nt, 0.0, grid_.dtheta(), BoundaryCondition::Periodic};
  const SplineFactorization fr(ar), frp(arp), ft(at);
  std::vector<double> row_w(rows, 0.0);
  for (int ir = 0; ir < Nr; ++ir) row_w[ir + G] = grid_.radial_weight(ir);

  const int nslices = grid_.Nv * grid_.Nphi;
  std::vector<double> loss(nslices, 0.0);
  std::size_t clamped = 0;
  std::optional<ExBRates> exb;
  if (nl) exb.emplace(model_, *phi, grid_, G, B_padded_, jq_padded_);

#pragma omp parallel reduction(+ : clamped)
  {
    std::vector<double> buf, out, d0, d1;
#pragma omp for schedule(dynamic)
    for (int sl = 0; sl < nslices; ++sl) {
      const int iv = sl / grid_.Nphi, ip = sl % grid_.Nphi;
      const double v = grid_.v(iv);
      double* fs = f.slice(ip, iv);
      auto alpha = [&](double r, double th, double& a_r, double& a_t) {
        a_r = 0.0;
        a_t = 0.0;
        if (lin) linear_velocity_rtheta(model_, r, th, v, a_r, a_t);
        if (nl) {
          double u_r, u_t;
          (*exb)(ip, r, th, v, u_r, u_t);
          a_r += u_r;
          a_t += u_t;
        }
      };
      // Displacements for rows [row0, row0 + nrows) of the padded axis.
      auto displacements = [&](int row0, int nrows) {
        d0.resize(static_cast<std::size_t>(nrows) * Nt);
        d1.resize(static_cast<std::size_t>(nrows) * Nt);
        for (int p = 0; p < nrows; ++p) {
          const double r = grid_.r_min + (row0 + p - G) * grid_.dr();
          for (int it = 0; it < Nt; ++it) {
            const std::size_t k = static_cast<std::size_t>(p) * Nt + it;
            if (table) {
              d0[k] = table->disp_r(iv)[(row0 + p) * Nt + it];
              d1[k] = table->disp_theta(iv)[(row0 + p) * Nt + it];
            } else {
              const Displacement d = midpoint_displacement(alpha, r, grid_.theta(it), dt, dir);
              d0[k] = d.r;
              d1[k] = d.theta;
            }
          }
        }
      };

      if (!fsl) {
        buf.assign(fs, fs + slice);
        solve_coeffs_2d_inplace(buf, fr, ft);
        const SplineRep2D rep2(ar, at, std::move(buf));
        displacements(G, Nr);
        EvalStats st;
        for (int ir = 0; ir < Nr; ++ir)
          for (int it = 0; it < Nt; ++it) {
            const std::size_t k = static_cast<std::size_t>(ir) * Nt + it;
            fs[k] = rep2.eval(grid_.r(ir) + d0[k], grid_.theta(it) + d1[k], &st);
          }
        clamped += st.clamped;
        buf.clear();
      } else {
        const double* jb = jb_padded_.data() + static_cast<std::size_t>(iv) * pslice;
        buf.resize(pslice);
        double before = 0.0;
        for (int p = 0; p < rows; ++p) {
          const int ir = std::clamp(p - G, 0, Nr - 1);
          for (int it = 0; it < Nt; ++it) {
            const std::size_t k = static_cast<std::size_t>(p) * Nt + it;
            buf[k] = jb[k] * fs[ir * Nt + it];
            before += row_w[p] * buf[k];
          }
        }
        solve_coeffs_2d_inplace(buf, frp, ft);
        displacements(0, rows);
        out.resize(pslice);
        const DepositStats st = deposit_2d(arp, at, buf, d0, d1, out, row_w);
        for (int ir = 0; ir < Nr; ++ir)
          for (int it = 0; it < Nt; ++it) {
            const std::size_t k = static_cast<std::size_t>(ir + G) * Nt + it;
            fs[ir * Nt + it] = out[k] / jb[k];
          }
        loss[sl] = (before - st.inside_weighted) * grid_.cell_volume() * grid_.v_weight(iv);
      }
    }
  }
  rep.clamped_feet += clamped;
  for (double x : loss) rep.boundary_loss += x;
}

void VlasovSolver::strang_step(DistributionField& f, Operator op, const PotentialField* phi, double dt,
                               StepReport& rep) {
  advect_v(f, op, phi, 0.5 * dt, rep);
  advect_phi(f, op, phi, 0.5 * dt, rep);
  advect_rtheta(f, op, phi, dt, rep);
  advect_phi(f, op, phi, 0.5 * dt, rep);
  advect_v(f, op, phi, 0.5 * dt, rep);
}

void VlasovSolver::update_fields(const DistributionField& f, std::span<const double> f_eq, FieldState& state) const {
  if (cfg_.phi_forced_zero || !qn_) {
    if (!cfg_.phi_forced_zero) throw DomainError("nonlinear step requested without a field solver");
    state.rho.assign(grid_.plane_size(), 0.0);
    if (profiles_) state.rho = compute_rho(f.data, f_eq, grid_, *profiles_, cfg_.omega_mu);
    state.phi.assign(grid_.plane_size(), 0.0);
    state.potential = PotentialField(grid_, state.phi);
    return;
  }
  state.rho = compute_rho(f.data, f_eq, grid_, *profiles_, cfg_.omega_mu);
  state.phi = qn_->solve(state.rho);
  state.potential = PotentialField(grid_, state.phi);
}

StepReport VlasovSolver::step(DistributionField& f, std::span<const double> f_eq, FieldState& state) {
  if (!f.grid.same_shape(grid_)) throw DomainError("step: distribution grid does not match the solver");
  StepReport rep;
  const double dt = cfg_.dt;
  const double m0 = mass(f);
  rep.mass_before = m0;
  const bool fields = !cfg_.phi_forced_zero;
  if (fields && !qn_) throw DomainError("step: Phi is not forced to zero but no field solver is attached");

  if (cfg_.split == SplitMode::LinearNonlinearSplit) {
    strang_step(f, Operator::Linear, nullptr, cfg_.symmetrized ? 0.5 * dt : dt, rep);
    const double m1 = mass(f);
    rep.dmass_L = m1 - m0;
    if (fields) {
      update_fields(f, f_eq, state);
      strang_step(f, Operator::Nonlinear, &state.potential, dt, rep);
    }
    const double m2 = mass(f);
    rep.dmass_N = m2 - m1;
    if (cfg_.symmetrized) {
      strang_step(f, Operator::Linear, nullptr, 0.5 * dt, rep);
      rep.dmass_L += mass(f) - m2;
    }
  } else {
    if (fields) update_fields(f, f_eq, state);
    strang_step(f, Operator::Combined, fields ? &state.potential : nullptr, dt, rep);
    // the operators are not separable here; the whole change is booked on L
    rep.dmass_L = mass(f) - m0;
  }
  rep.mass_after = mass(f);
  f.time += dt;
  ++f.step;
  f.check_finite();
  return rep;
}

}  // namespace gyrosl
