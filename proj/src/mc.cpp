#include "sdmlmc/mc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <string>

#include "sdmlmc/errors.hpp"
#include "sdmlmc/rng.hpp"

namespace sdmlmc {

double norm_component(const NormTriple& t, Norm n) {
  switch (n) {
    case Norm::l2: return t.l2;
    case Norm::linf: return t.linf;
    case Norm::h1: return t.h1;
  }
  return t.l2;
}

std::vector<double> VarianceModel::extrapolate(int levels, double ch) const {
  std::vector<double> v(levels);
  for (int l = 0; l < levels; ++l) v[l] = v0 * std::pow(ch, -beta * l);
  return v;
}

MlmcPlan allocate(const std::vector<double>& v, const std::vector<double>& C, double e_L) {
  if (e_L <= 0.0) throw ArgumentError("allocate: e_L must be positive");
  if (v.empty() || v.size() != C.size())
    throw ArgumentError("allocate: variance and cost vectors must match");
  for (std::size_t l = 0; l < v.size(); ++l)
    if (v[l] <= 0.0 || C[l] <= 0.0)
      throw ArgumentError("allocate: variances and costs must be positive");
  MlmcPlan plan;
  plan.e_L = e_L;
  double s = 0.0;
  for (std::size_t l = 0; l < v.size(); ++l) s += std::sqrt(v[l] * C[l]);
  for (std::size_t l = 0; l < v.size(); ++l) {
    const double nl = std::sqrt(v[l] / C[l]) * s / e_L;
    plan.N_real.push_back(nl);
    plan.N.push_back(static_cast<long>(std::ceil(nl - 1e-12)));
  }
  for (std::size_t l = 0; l < v.size(); ++l) plan.predicted_error += v[l] / plan.N[l];
  if (plan.predicted_error > e_L * (1.0 + 1e-12))
    throw ArgumentError("allocate: rounded plan violates the error budget");
  plan.optimal_cost = s * s / e_L;
  return plan;
}

double sampling_error_target(double v_L_hat, long N_SL) {
  if (v_L_hat <= 0.0 || N_SL <= 0) throw ArgumentError("sampling_error_target: positive inputs");
  return v_L_hat / static_cast<double>(N_SL);
}

Estimate telescope_estimate(
    const std::vector<long>& N, int dim,
    const std::function<Eigen::VectorXd(int, long, double*, long*)>& sample,
    const std::function<NormTriple(const Eigen::VectorXd&)>& norms) {
  const auto t0 = std::chrono::steady_clock::now();
  Estimate est;
  est.mean = Eigen::VectorXd::Zero(dim);
  for (int t = 0; t < static_cast<int>(N.size()); ++t) {
    if (N[t] < 1) throw ArgumentError("telescope_estimate: every N must be >= 1");
    LevelStats ls;
    ls.N = N[t];
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(dim);
    double sum_l2sq = 0.0, sum_h1sq = 0.0;
    for (long i = 0; i < N[t]; ++i) {
      Eigen::VectorXd q;
      try {
        q = sample(t, i, &ls.flops, &ls.cycles);
      } catch (const SolveFailure& e) {
        throw SolveFailure(std::string(e.what()) + " [term " + std::to_string(t) +
                           ", sample " + std::to_string(i) + "]");
      }
      if (q.size() != dim) throw ArgumentError("telescope_estimate: sample size mismatch");
      sum += q;
      sumsq += q.cwiseProduct(q);
      const NormTriple nq = norms(q);
      sum_l2sq += nq.l2 * nq.l2;
      sum_h1sq += nq.h1 * nq.h1;
    }
    ls.mean = sum / static_cast<double>(N[t]);
    if (N[t] > 1) {
      const double n = static_cast<double>(N[t]);
      const NormTriple nm = norms(ls.mean);
      ls.variance.l2 = std::max(0.0, (sum_l2sq - n * nm.l2 * nm.l2) / (n - 1.0));
      ls.variance.h1 = std::max(0.0, (sum_h1sq - n * nm.h1 * nm.h1) / (n - 1.0));
      double vmax = 0.0;
      for (int j = 0; j < dim; ++j)
        vmax = std::max(vmax, (sumsq[j] - n * ls.mean[j] * ls.mean[j]) / (n - 1.0));
      ls.variance.linf = std::max(0.0, vmax);
    }
    est.mean += ls.mean;
    est.sampling_error.l2 += ls.variance.l2 / ls.N;
    est.sampling_error.linf += ls.variance.linf / ls.N;
    est.sampling_error.h1 += ls.variance.h1 / ls.N;
    est.flops += ls.flops;
    est.total_samples += ls.N;
    est.levels.push_back(std::move(ls));
  }
  est.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return est;
}

CoupledSampler::CoupledSampler(const MeshHierarchy& hier, const PointSet& ps,
                               const FieldSampler& fs, PhysicalParams pp, Forcing fo,
                               BoundaryData bd, SolveOptions opts)
    : hier_(&hier), ps_(&ps), fs_(&fs), pp_(pp), fo_(std::move(fo)), bd_(std::move(bd)),
      opts_(opts) {
  if (ps.levels() < hier.depth() + 1)
    throw ArgumentError("point set does not cover the hierarchy");
}

std::vector<Eigen::VectorXd> CoupledSampler::solve_levels(std::uint64_t seed, int lmin,
                                                          int lmax, bool warm, double* flops,
                                                          long* cycles) const {
  if (lmin < 0 || lmax > hier_->depth() || lmin > lmax)
    throw ArgumentError("solve_levels: bad level range");
  const FieldRealization field = realize(*ps_, *fs_, seed, 0, lmax);
  std::vector<BlockSystem> systems;
  for (int l = 0; l <= lmax; ++l)
    systems.push_back(assemble(hier_->level(l), field, l, pp_, fo_, bd_));
  const MultigridSolver mg(*hier_, std::move(systems), opts_);
  std::vector<Eigen::VectorXd> out;
  if (warm) {
    SolveReport rep;
    Eigen::VectorXd x = mg.solve_x_at(0, &rep);
    if (cycles) *cycles += rep.cycles;
    if (lmin == 0) out.push_back(x);
    for (int l = 1; l <= lmax; ++l) {
      const Eigen::VectorXd x0 = hier_->prolongate(l, x);
      x = mg.solve_x_at(l, &rep, &x0);
      if (cycles) *cycles += rep.cycles;
      if (l >= lmin) out.push_back(x);
    }
  } else {
    for (int l = lmin; l <= lmax; ++l) {
      SolveReport rep;
      out.push_back(mg.solve_x_at(l, &rep));
      if (cycles) *cycles += rep.cycles;
    }
  }
  if (flops) *flops += mg.meter().flops;
  return out;
}

Eigen::VectorXd CoupledSampler::to_finest(int level, Eigen::VectorXd x) const {
  for (int l = level + 1; l <= hier_->depth(); ++l) x = hier_->prolongate(l, x);
  return x;
}

NormTriple CoupledSampler::combined_norms(const Eigen::VectorXd& x) const {
  const MeshLevel& m = hier_->level(hier_->depth());
  const DofCounts nd = m.dofs();
  const NormTriple a = phi_norms(m, phi_part(nd, x));
  const NormTriple b = u_norms(m, u_part(nd, x));
  const NormTriple c = p_norms(m, p_part(nd, x));
  NormTriple out;
  out.l2 = std::sqrt(a.l2 * a.l2 + b.l2 * b.l2 + c.l2 * c.l2);
  out.h1 = std::sqrt(a.h1 * a.h1 + b.h1 * b.h1 + c.h1 * c.h1);
  out.linf = std::max({a.linf, b.linf, c.linf});
  return out;
}

Estimate slmc(const CoupledSampler& cs, int level, long N, std::uint64_t base_seed) {
  if (N < 1) throw ArgumentError("slmc: N must be >= 1");
  const int dim = cs.hierarchy().level(cs.finest_level()).dofs().total();
  Estimate est = telescope_estimate(
      {N}, dim,
      [&](int, long i, double* fl, long* cy) {
        const std::uint64_t seed = rng::derive_seed(base_seed, 0, static_cast<std::uint64_t>(i));
        auto sols = cs.solve_levels(seed, level, level, false, fl, cy);
        return cs.to_finest(level, std::move(sols[0]));
      },
      [&](const Eigen::VectorXd& x) { return cs.combined_norms(x); });
  est.finest_level = cs.finest_level();
  return est;
}

Estimate mlmc(const CoupledSampler& cs, const MlmcPlan& plan, std::uint64_t base_seed,
              bool warm_start) {
  const int L = static_cast<int>(plan.N.size()) - 1;
  if (L < 0 || L > cs.finest_level()) throw ArgumentError("mlmc: plan depth exceeds hierarchy");
  const int dim = cs.hierarchy().level(cs.finest_level()).dofs().total();
  Estimate est = telescope_estimate(
      plan.N, dim,
      [&](int term, long i, double* fl, long* cy) -> Eigen::VectorXd {
        const std::uint64_t seed =
            rng::derive_seed(base_seed, static_cast<std::uint64_t>(term),
                             static_cast<std::uint64_t>(i));
        if (term == 0) {
          auto sols = cs.solve_levels(seed, 0, 0, warm_start, fl, cy);
          return cs.to_finest(0, std::move(sols[0]));
        }
        auto sols = cs.solve_levels(seed, term - 1, term, warm_start, fl, cy);
        return cs.to_finest(term, std::move(sols[1])) -
               cs.to_finest(term - 1, std::move(sols[0]));
      },
      [&](const Eigen::VectorXd& x) { return cs.combined_norms(x); });
  est.finest_level = cs.finest_level();
  return est;
}

Estimate mgmlmc(const CoupledSampler& cs, const MlmcPlan& plan, std::uint64_t base_seed) {
  return mlmc(cs, plan, base_seed, true);
}

double pilot_variance(const CoupledSampler& cs, int level, long N_pilot, Norm norm,
                      std::uint64_t base_seed) {
  if (N_pilot < 2) throw ArgumentError("pilot_variance: N_pilot must be >= 2");
  const Estimate est = slmc(cs, level, N_pilot, base_seed);
  return norm_component(est.levels[0].variance, norm);
}

std::vector<double> pilot_correction_variances(const CoupledSampler& cs, int level,
                                               long N_pilot, Norm norm,
                                               std::uint64_t base_seed) {
  if (N_pilot < 2) throw ArgumentError("pilot_correction_variances: N_pilot must be >= 2");
  MlmcPlan plan;
  plan.N.assign(level + 1, N_pilot);
  const Estimate est = mlmc(cs, plan, base_seed);
  std::vector<double> v;
  for (const LevelStats& ls : est.levels) v.push_back(norm_component(ls.variance, norm));
  return v;
}

void write_efficiency_json(const Efficiency& e, std::ostream& os) {
  os.precision(17);
  os << "{\n"
     << "  \"T_sl\": " << e.T_sl << ",\n"
     << "  \"T_ml\": " << e.T_ml << ",\n"
     << "  \"T_mgml\": " << e.T_mgml << ",\n"
     << "  \"ratio_ml_sl\": " << (e.T_sl > 0 ? e.T_ml / e.T_sl : 0.0) << ",\n"
     << "  \"ratio_mgml_sl\": " << (e.T_sl > 0 ? e.T_mgml / e.T_sl : 0.0) << ",\n"
     << "  \"ratio_mgml_ml\": " << (e.T_ml > 0 ? e.T_mgml / e.T_ml : 0.0) << ",\n"
     << "  \"gamma\": " << e.gamma << ",\n"
     << "  \"beta\": " << e.beta << ",\n"
     << "  \"e_L\": " << e.e_L << "\n"
     << "}\n";
}

void write_estimate_csv(const DofCounts& nd, const Eigen::VectorXd& mean, std::ostream& os) {
  os.precision(17);
  os << "node,field,mean\n";
  for (int d = 0; d < nd.n_phi; ++d) os << d << ",phi," << mean[d] << "\n";
  for (int n = 0; n < nd.n_u_nodes; ++n) {
    os << n << ",u1," << mean[nd.n_phi + 2 * n] << "\n";
    os << n << ",u2," << mean[nd.n_phi + 2 * n + 1] << "\n";
  }
  for (int d = 0; d < nd.n_p; ++d) os << d << ",p," << mean[nd.n_phi + nd.n_u() + d] << "\n";
}

void write_levels_csv(const Estimate& est, Norm norm, std::ostream& os) {
  os.precision(17);
  os << "level,N,variance,cost\n";
  for (std::size_t l = 0; l < est.levels.size(); ++l)
    os << l << "," << est.levels[l].N << "," << norm_component(est.levels[l].variance, norm)
       << "," << est.levels[l].flops / static_cast<double>(est.levels[l].N) << "\n";
}

}  // namespace sdmlmc
