#include "sdmlmc/calib.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <ostream>

#include "sdmlmc/errors.hpp"
#include "sdmlmc/rng.hpp"

namespace sdmlmc {

// ---- white noise ------------------------------------------------------------

WhiteNoiseForcing::WhiteNoiseForcing(const MeshLevel& cells, double sigma, std::uint64_t seed)
    : mesh_(&cells), sigma_(sigma) {
  if (sigma <= 0.0) throw ArgumentError("white noise: sigma must be positive");
  const auto& porous = cells.porous_tris();
  V_.reserve(porous.size());
  X_.reserve(porous.size());
  coef_.reserve(porous.size());
  for (std::size_t i = 0; i < porous.size(); ++i) {
    const double vol = cells.triangle_area(cells.tris()[porous[i]]);
    const double x = rng::standard_normal(seed, static_cast<std::uint64_t>(i));
    V_.push_back(vol);
    X_.push_back(x);
    coef_.push_back(sigma / std::sqrt(vol) * x);
  }
}

double WhiteNoiseForcing::cell_integral(int cell) const {
  return sigma_ * std::sqrt(V_.at(cell)) * X_.at(cell);
}

int WhiteNoiseForcing::locate(const Vec2& p) const {
  const MeshLevel& m = *mesh_;
  const double h = m.h();
  const int i = std::clamp(static_cast<int>((p.x - m.domain().x0) / h), 0, m.nx() - 1);
  const int jm = std::clamp(static_cast<int>(p.y / h), 0, m.ny_m() - 1);
  const double xi = (p.x - m.domain().x0) / h - i;
  const double eta = p.y / h - jm;
  // cells split along the lower-left to upper-right diagonal; the lower
  // triangle of cell (i, j) is stored first
  const int cy = m.ny_s() + jm;
  const int tri = (cy * m.nx() + i) * 2 + (eta > xi ? 1 : 0);
  return tri - 2 * m.nx() * m.ny_s();  // ordinal among the porous triangles
}

double WhiteNoiseForcing::operator()(const Vec2& p) const {
  if (p.y < 0.0) throw ArgumentError("white noise: point outside the porous rectangle");
  return coef_[locate(p)];
}

// ---- scalar multigrid -------------------------------------------------------

DarcyMultigrid::DarcyMultigrid(const MeshHierarchy& hier, std::vector<DarcySystem> systems,
                               SolveOptions opts)
    : hier_(&hier), systems_(std::move(systems)), opts_(opts) {
  if (systems_.empty() || static_cast<int>(systems_.size()) > hier.depth() + 1)
    throw SolverSetupError("scalar multigrid: system list does not fit the hierarchy");
  for (const DarcySystem& s : systems_) {
    A_row_.emplace_back(s.A);
    A_row_.back().makeCompressed();
  }
  SpMat A0 = systems_[0].A;
  A0.makeCompressed();
  coarse_lu_.compute(A0);
  if (coarse_lu_.info() != Eigen::Success)
    throw SolverSetupError("scalar multigrid: coarsest factorization failed");
}

namespace {

void scalar_gs(const Eigen::SparseMatrix<double, Eigen::RowMajor>& A, Eigen::VectorXd& x,
               const Eigen::VectorXd& b) {
  for (int r = 0; r < A.rows(); ++r) {
    double s = b[r];
    double diag = 0.0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(A, r); it; ++it) {
      if (it.col() == r)
        diag = it.value();
      else
        s -= it.value() * x[it.col()];
    }
    if (diag == 0.0) throw SmootherError("scalar multigrid: zero diagonal");
    x[r] = s / diag;
  }
}

}  // namespace

void DarcyMultigrid::vcycle(int level, Eigen::VectorXd& x, const Eigen::VectorXd& b) const {
  if (level == 0) {
    x = coarse_lu_.solve(b);
    return;
  }
  const DarcySystem& sys = systems_[level];
  for (int s = 0; s < opts_.pre_smooth; ++s) scalar_gs(A_row_[level], x, b);
  Eigen::VectorXd r = b - sys.A * x;
  for (int i = 0; i < r.size(); ++i)
    if (sys.fixed[i]) r[i] = 0.0;
  Eigen::VectorXd rc = hier_->P_phi(level).transpose() * r;
  const DarcySystem& coarse = systems_[level - 1];
  for (int i = 0; i < rc.size(); ++i)
    if (coarse.fixed[i]) rc[i] = 0.0;
  Eigen::VectorXd ec = Eigen::VectorXd::Zero(rc.size());
  vcycle(level - 1, ec, rc);
  Eigen::VectorXd ef = hier_->P_phi(level) * ec;
  for (int i = 0; i < ef.size(); ++i)
    if (sys.fixed[i]) ef[i] = 0.0;
  x += ef;
  for (int s = 0; s < opts_.post_smooth; ++s) scalar_gs(A_row_[level], x, b);
}

Eigen::VectorXd DarcyMultigrid::solve_at(int level, const Eigen::VectorXd& b,
                                         SolveReport* rep) const {
  if (level < 0 || level > depth()) throw ArgumentError("scalar multigrid: bad level");
  const auto t0 = std::chrono::steady_clock::now();
  SolveReport local;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    local.converged = true;
  } else if (level == 0) {
    x = coarse_lu_.solve(b);
    local.cycles = 1;
    local.rel_residual = (b - systems_[0].A * x).norm() / bnorm;
    local.converged = true;
  } else {
    for (int c = 0; c < opts_.max_cycles; ++c) {
      vcycle(level, x, b);
      ++local.cycles;
      local.rel_residual = (b - systems_[level].A * x).norm() / bnorm;
      if (local.rel_residual <= opts_.tol) {
        local.converged = true;
        break;
      }
    }
  }
  local.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (rep) *rep = local;
  if (!local.converged)
    throw SolveFailure("scalar multigrid: no convergence, relative residual " +
                       std::to_string(local.rel_residual));
  return x;
}

Eigen::VectorXd DarcyMultigrid::solve(SolveReport* rep) const {
  return solve_at(depth(), systems_.back().b, rep);
}

Eigen::VectorXd darcy_solve(const MeshHierarchy& hier, const FieldRealization& field,
                            int level, const std::function<double(const Vec2&)>& f, double g,
                            SolveOptions opts) {
  std::vector<DarcySystem> systems;
  for (int l = 0; l <= level; ++l)
    systems.push_back(assemble_darcy(hier.level(l), field, l, g, f));
  const DarcyMultigrid mg(hier, std::move(systems), opts);
  return mg.solve();
}

// ---- fits -------------------------------------------------------------------

LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw ArgumentError("log-log fit: need at least two matching points");
  const int n = static_cast<int>(x.size());
  std::vector<double> lx(n), ly(n);
  for (int i = 0; i < n; ++i) {
    if (x[i] <= 0.0 || y[i] <= 0.0) throw ArgumentError("log-log fit: data must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx == 0.0) throw ArgumentError("log-log fit: abscissae coincide");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  const double ssres = syy - sxy * sxy / sxx;
  fit.r2 = (syy == 0.0) ? 1.0 : std::max(0.0, 1.0 - ssres / syy);
  return fit;
}

// ---- beta -------------------------------------------------------------------

NormTriple BetaEstimate::sigma_mean(double sigma) const {
  NormTriple m;
  long n = 0;
  for (const BetaSample& s : samples)
    if (s.sigma == sigma) {
      m.l2 += s.beta.l2;
      m.linf += s.beta.linf;
      m.h1 += s.beta.h1;
      ++n;
    }
  if (n == 0) throw ArgumentError("beta estimate: sigma not part of the sweep");
  m.l2 /= n;
  m.linf /= n;
  m.h1 /= n;
  return m;
}

BetaEstimate estimate_beta(const MeshHierarchy& hier, const BetaOptions& opt,
                           std::uint64_t base_seed, std::ostream* warnings) {
  const int L = opt.top_level;
  if (L < 2 || L > hier.depth())
    throw ArgumentError("beta calibration: need at least levels 0..2 in the hierarchy");
  if (opt.n_samples < 1 || opt.n_inner < 2 || opt.sigmas.empty())
    throw ArgumentError("beta calibration: bad sweep sizes");

  const PointSet ps(hier);
  const FieldSampler fs(ps, opt.covariance);
  const auto zero_f = [](const Vec2&) { return 0.0; };
  const FieldRealization unit = constant_field(ps, 1.0);

  // conductivity ensemble, shared across the whole (sigma, forcing) sweep
  std::vector<std::unique_ptr<DarcyMultigrid>> mgs;
  for (int k = 0; k < opt.n_inner; ++k) {
    const FieldRealization field = realize(ps, fs, rng::derive_seed(base_seed, 0, k), 0, L);
    std::vector<DarcySystem> systems;
    for (int l = 0; l <= L; ++l)
      systems.push_back(assemble_darcy(hier.level(l), field, l, opt.g, zero_f));
    mgs.push_back(std::make_unique<DarcyMultigrid>(hier, std::move(systems), opt.solver));
  }

  std::vector<double> hs;
  for (int l = 1; l <= L; ++l) hs.push_back(hier.level(l).h());

  BetaEstimate est;
  est.sigmas = opt.sigmas;
  est.n_samples = opt.n_samples;
  est.n_inner = opt.n_inner;
  est.top_level = L;

  for (std::size_t si = 0; si < opt.sigmas.size(); ++si) {
    for (int fi = 0; fi < opt.n_samples; ++fi) {
      const std::uint64_t fseed = rng::derive_seed(
          base_seed, 1, si * static_cast<std::uint64_t>(opt.n_samples) + fi);
      const WhiteNoiseForcing wn(hier.level(0), opt.sigmas[si], fseed);
      std::vector<Eigen::VectorXd> rhs;
      for (int l = 0; l <= L; ++l)
        rhs.push_back(
            assemble_darcy(hier.level(l), unit, l, opt.g, [&](const Vec2& p) { return wn(p); })
                .b);

      // per-level accumulators of the correction phi_l - P phi_{l-1}
      std::vector<Eigen::VectorXd> sum(L), sumsq(L);
      std::vector<double> l2sq(L, 0.0), h1sq(L, 0.0);
      for (int k = 0; k < opt.n_inner; ++k) {
        Eigen::VectorXd prev = mgs[k]->solve_at(0, rhs[0]);
        for (int l = 1; l <= L; ++l) {
          const Eigen::VectorXd cur = mgs[k]->solve_at(l, rhs[l]);
          const Eigen::VectorXd d = cur - hier.P_phi(l) * prev;
          if (sum[l - 1].size() == 0) {
            sum[l - 1] = Eigen::VectorXd::Zero(d.size());
            sumsq[l - 1] = Eigen::VectorXd::Zero(d.size());
          }
          sum[l - 1] += d;
          sumsq[l - 1] += d.cwiseProduct(d);
          const NormTriple nt = phi_norms(hier.level(l), d);
          l2sq[l - 1] += nt.l2 * nt.l2;
          h1sq[l - 1] += nt.h1 * nt.h1;
          prev = cur;
        }
      }
      std::vector<double> v_l2, v_linf, v_h1;
      bool degenerate = false;
      const double n = opt.n_inner;
      for (int l = 1; l <= L; ++l) {
        const Eigen::VectorXd mean = sum[l - 1] / n;
        const NormTriple nm = phi_norms(hier.level(l), mean);
        const double vl2 = (l2sq[l - 1] - n * nm.l2 * nm.l2) / (n - 1.0);
        const double vh1 = (h1sq[l - 1] - n * nm.h1 * nm.h1) / (n - 1.0);
        double vinf = 0.0;
        for (int i = 0; i < mean.size(); ++i)
          vinf = std::max(vinf, (sumsq[l - 1][i] - n * mean[i] * mean[i]) / (n - 1.0));
        if (vl2 <= 0.0 || vh1 <= 0.0 || vinf <= 0.0) degenerate = true;
        v_l2.push_back(vl2);
        v_linf.push_back(vinf);
        v_h1.push_back(vh1);
      }
      if (degenerate) {
        if (warnings)
          *warnings << "dropping degenerate variance sample: sigma=" << opt.sigmas[si]
                    << " f_index=" << fi << "\n";
        continue;
      }
      BetaSample s;
      s.sigma = opt.sigmas[si];
      s.f_index = fi;
      s.beta.l2 = fit_loglog(hs, v_l2).slope;
      s.beta.linf = fit_loglog(hs, v_linf).slope;
      s.beta.h1 = fit_loglog(hs, v_h1).slope;
      est.samples.push_back(s);
    }
  }
  if (est.samples.empty()) throw SolveFailure("beta calibration: every sample was degenerate");
  for (const BetaSample& s : est.samples) {
    est.mean.l2 += s.beta.l2;
    est.mean.linf += s.beta.linf;
    est.mean.h1 += s.beta.h1;
  }
  const double ns = static_cast<double>(est.samples.size());
  est.mean.l2 /= ns;
  est.mean.linf /= ns;
  est.mean.h1 /= ns;
  return est;
}

// ---- gamma ------------------------------------------------------------------

GammaEstimate estimate_gamma(const std::vector<double>& h, const std::vector<double>& flops,
                             const std::vector<double>& seconds) {
  if (h.size() < 3 || h.size() != flops.size())
    throw ArgumentError("gamma fit: need matching costs for at least three levels");
  GammaEstimate est;
  est.h = h;
  est.cost_flops = flops;
  est.cost_seconds = seconds;
  std::vector<double> inv_h;
  for (double hh : h) {
    if (hh <= 0.0) throw ArgumentError("gamma fit: mesh sizes must be positive");
    inv_h.push_back(1.0 / hh);
  }
  const LineFit ff = fit_loglog(inv_h, flops);
  est.gamma_flops = ff.slope;
  est.r2_flops = ff.r2;
  if (seconds.size() == h.size() &&
      std::all_of(seconds.begin(), seconds.end(), [](double s) { return s > 0.0; })) {
    const LineFit fs = fit_loglog(inv_h, seconds);
    est.gamma_seconds = fs.slope;
    est.r2_seconds = fs.r2;
  }
  return est;
}

GammaEstimate measure_gamma(const MeshHierarchy& hier, const FieldRealization& field,
                            PhysicalParams pp, Forcing fo, BoundaryData bd,
                            SolveOptions opts) {
  std::vector<double> h, flops, seconds;
  // the level-0 "solve" is a bare direct factorization, not a V-cycle, so it
  // does not belong to the power law being fitted
  for (int top = 1; top <= hier.depth(); ++top) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<BlockSystem> systems;
    for (int l = 0; l <= top; ++l)
      systems.push_back(assemble(hier.level(l), field, l, pp, fo, bd));
    const MultigridSolver mg(hier, std::move(systems), opts);
    mg.solve_x();
    h.push_back(hier.level(top).h());
    flops.push_back(mg.meter().flops);
    seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return estimate_gamma(h, flops, seconds);
}

// ---- reporting --------------------------------------------------------------

void write_beta_csv(const BetaEstimate& est, std::ostream& os) {
  os.precision(17);
  os << "sigma,f_index,norm,beta\n";
  for (const BetaSample& s : est.samples) {
    os << s.sigma << "," << s.f_index << ",l2," << s.beta.l2 << "\n";
    os << s.sigma << "," << s.f_index << ",linf," << s.beta.linf << "\n";
    os << s.sigma << "," << s.f_index << ",h1," << s.beta.h1 << "\n";
  }
}

namespace {

void write_array(std::ostream& os, const char* key, const std::vector<double>& v) {
  os << "  \"" << key << "\": [";
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << "]";
}

}  // namespace

void write_gamma_json(const GammaEstimate& est, std::ostream& os) {
  os.precision(17);
  os << "{\n";
  write_array(os, "h", est.h);
  os << ",\n";
  write_array(os, "cost_flops", est.cost_flops);
  os << ",\n";
  write_array(os, "cost_seconds", est.cost_seconds);
  os << ",\n"
     << "  \"gamma_flops\": " << est.gamma_flops << ",\n"
     << "  \"r2_flops\": " << est.r2_flops << ",\n"
     << "  \"gamma_seconds\": " << est.gamma_seconds << ",\n"
     << "  \"r2_seconds\": " << est.r2_seconds << "\n"
     << "}\n";
}

}  // namespace sdmlmc
