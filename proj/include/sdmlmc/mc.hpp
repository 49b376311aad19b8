#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "sdmlmc/solver.hpp"

namespace sdmlmc {

enum class Norm { l2, linf, h1 };

double norm_component(const NormTriple& t, Norm n);

// ---- sample allocation ------------------------------------------------------

struct VarianceModel {
  double v0 = 0.0;   // total variance at the coarsest level
  double beta = 0.0; // decay exponent of the correction variances
  Norm norm = Norm::l2;

  // v_l = v0 (h_l/h_0)^beta for a coarsening ratio ch
  std::vector<double> extrapolate(int levels, double ch = 2.0) const;
};

struct CostModel {
  std::vector<double> flops;    // per level, operation counts
  std::vector<double> seconds;  // per level, wall clock
  double gamma = 0.0;
};

struct MlmcPlan {
  double e_L = 0.0;
  std::vector<long> N;         // integer counts after ceiling
  std::vector<double> N_real;  // pre-ceiling optimizer output
  double predicted_error = 0.0;  // sum v_l / N_l with the integer counts
  double optimal_cost = 0.0;     // (sum sqrt(v_l C_l))^2 / e_L
};

// N_l = ceil( sqrt(v_l/C_l) (sum_j sqrt(v_j C_j)) / e_L )
MlmcPlan allocate(const std::vector<double>& v, const std::vector<double>& C, double e_L);

// e_L = v_L / N_SL
double sampling_error_target(double v_L_hat, long N_SL);

// ---- estimators -------------------------------------------------------------

struct LevelStats {
  long N = 0;
  Eigen::VectorXd mean;      // contribution of this telescope term, finest nodes
  NormTriple variance;       // sample variance of the term (per norm)
  double flops = 0.0;
  long cycles = 0;
};

struct Estimate {
  int finest_level = 0;
  Eigen::VectorXd mean;            // exact sum of the stored level means
  std::vector<LevelStats> levels;
  NormTriple sampling_error;       // sum over levels of variance / N
  double flops = 0.0;
  double seconds = 0.0;
  long total_samples = 0;
};

// Generic telescoping accumulator: term t, sample i is produced by `sample`
// (which also reports the work spent and iteration count); `norms` evaluates
// the three norms of a value vector. Accumulation is sequential in (t, i), so
// results are independent of any parallel execution schedule.
Estimate telescope_estimate(
    const std::vector<long>& N, int dim,
    const std::function<Eigen::VectorXd(int term, long index, double* flops, long* cycles)>&
        sample,
    const std::function<NormTriple(const Eigen::VectorXd&)>& norms);

// Per-sample PDE solves shared by the estimators. One instance fixes the
// hierarchy, the random field and the physics; each call handles a single
// realization identified by (term, index) under `base_seed`.
class CoupledSampler {
 public:
  CoupledSampler(const MeshHierarchy& hier, const PointSet& ps, const FieldSampler& fs,
                 PhysicalParams pp = {}, Forcing fo = {}, BoundaryData bd = {},
                 SolveOptions opts = {});

  const MeshHierarchy& hierarchy() const { return *hier_; }
  int finest_level() const { return hier_->depth(); }

  // Solutions at levels lmin..lmax of one realization (front() = lmin). With
  // `warm` the levels are solved bottom-up, each seeded by the prolongated
  // previous solution; otherwise every requested level starts from zero.
  std::vector<Eigen::VectorXd> solve_levels(std::uint64_t seed, int lmin, int lmax, bool warm,
                                            double* flops, long* cycles) const;

  // prolongate a level solution to the finest mesh
  Eigen::VectorXd to_finest(int level, Eigen::VectorXd x) const;

  // norms of a stacked finest-level vector, fields combined
  NormTriple combined_norms(const Eigen::VectorXd& x) const;

 private:
  const MeshHierarchy* hier_;
  const PointSet* ps_;
  const FieldSampler* fs_;
  PhysicalParams pp_;
  Forcing fo_;
  BoundaryData bd_;
  SolveOptions opts_;
};

// Single-level Monte Carlo at `level` with N samples.
Estimate slmc(const CoupledSampler& cs, int level, long N, std::uint64_t base_seed);

// Multi-level telescoping estimator with plan.N samples per term; fresh
// independent realizations per term, both resolutions of a correction share
// one realization. `warm_start` switches to the nested-iteration variant
// that seeds each level solve with the sample's own coarser solution.
Estimate mlmc(const CoupledSampler& cs, const MlmcPlan& plan, std::uint64_t base_seed,
              bool warm_start = false);
Estimate mgmlmc(const CoupledSampler& cs, const MlmcPlan& plan, std::uint64_t base_seed);

// Total-variance pilot at one level (unbiased, N-1 divisor).
double pilot_variance(const CoupledSampler& cs, int level, long N_pilot, Norm norm,
                      std::uint64_t base_seed);

// Correction-variance pilot for every telescope term 0..level.
std::vector<double> pilot_correction_variances(const CoupledSampler& cs, int level,
                                               long N_pilot, Norm norm,
                                               std::uint64_t base_seed);

// ---- reporting --------------------------------------------------------------

struct Efficiency {
  double T_sl = 0.0, T_ml = 0.0, T_mgml = 0.0;        // operation counts
  double sec_sl = 0.0, sec_ml = 0.0, sec_mgml = 0.0;  // wall clock
  double gamma = 0.0, beta = 0.0, e_L = 0.0;
};

void write_efficiency_json(const Efficiency& e, std::ostream& os);
// node,field,mean rows for phi, u1, u2, p at the finest level
void write_estimate_csv(const DofCounts& nd, const Eigen::VectorXd& mean, std::ostream& os);
// level,N,variance,cost rows
void write_levels_csv(const Estimate& est, Norm norm, std::ostream& os);

}  // namespace sdmlmc
