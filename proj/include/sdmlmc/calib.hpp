#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "sdmlmc/mc.hpp"

namespace sdmlmc {

// Piecewise-constant white-noise surrogate on the porous rectangle,
// f(x) = sigma * sum_i V_i^{-1/2} chi_i(x) X_i, with the cells D_i taken as
// the coarsest-level porous triangles and X_i i.i.d. standard normal. The
// scaling makes the cell integrals satisfy E[(int_{D_i} f)^2] = sigma^2 V_i.
class WhiteNoiseForcing {
 public:
  WhiteNoiseForcing(const MeshLevel& cells, double sigma, std::uint64_t seed);

  double sigma() const { return sigma_; }
  int cells() const { return static_cast<int>(V_.size()); }
  const std::vector<double>& volumes() const { return V_; }
  double normal(int cell) const { return X_.at(cell); }
  // exact integral of f over cell i: sigma * sqrt(V_i) * X_i
  double cell_integral(int cell) const;

  double operator()(const Vec2& p) const;

 private:
  int locate(const Vec2& p) const;

  const MeshLevel* mesh_;
  double sigma_;
  std::vector<double> V_, X_, coef_;
};

// Geometric V-cycle for the scalar porous operator alone: pointwise
// Gauss-Seidel smoothing, residual transfer through the quadratic porous
// interpolation, exact coarsest solve. `systems` may cover only the first
// levels of the hierarchy.
class DarcyMultigrid {
 public:
  DarcyMultigrid(const MeshHierarchy& hier, std::vector<DarcySystem> systems,
                 SolveOptions opts = {});

  int depth() const { return static_cast<int>(systems_.size()) - 1; }
  const DarcySystem& system(int level) const { return systems_.at(level); }

  // Solve A_level x = b; b need not be the assembled right-hand side (the
  // variance calibration swaps forcings under a fixed conductivity).
  Eigen::VectorXd solve_at(int level, const Eigen::VectorXd& b,
                           SolveReport* rep = nullptr) const;
  Eigen::VectorXd solve(SolveReport* rep = nullptr) const;

 private:
  void vcycle(int level, Eigen::VectorXd& x, const Eigen::VectorXd& b) const;

  const MeshHierarchy* hier_;
  std::vector<DarcySystem> systems_;
  std::vector<Eigen::SparseMatrix<double, Eigen::RowMajor>> A_row_;
  Eigen::SparseLU<SpMat> coarse_lu_;
  SolveOptions opts_;
};

// Porous-only solve of one realization at `level` (coarser levels are built
// internally for the V-cycle).
Eigen::VectorXd darcy_solve(const MeshHierarchy& hier, const FieldRealization& field,
                            int level, const std::function<double(const Vec2&)>& f,
                            double g = 1.0, SolveOptions opts = {});

// ---- least-squares fits -----------------------------------------------------

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Fit log y = slope * log x + intercept; all entries must be positive.
LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

// ---- variance-decay exponent ------------------------------------------------

struct BetaOptions {
  std::vector<double> sigmas{0.02, 0.8, 1.2};
  int n_samples = 40;   // forcing draws per sigma
  int n_inner = 50;     // conductivity draws per forcing
  int top_level = 2;    // corrections fitted on levels 1..top_level
  CovarianceParams covariance{};
  double g = 1.0;
  SolveOptions solver{};
};

struct BetaSample {
  double sigma = 0.0;
  int f_index = 0;
  NormTriple beta;
};

struct BetaEstimate {
  std::vector<double> sigmas;
  int n_samples = 0;
  int n_inner = 0;
  int top_level = 0;
  std::vector<BetaSample> samples;
  NormTriple mean;                        // over all retained samples
  NormTriple sigma_mean(double sigma) const;
};

// Correction-variance decay of the porous problem under white-noise forcing:
// for every (sigma, forcing draw), the per-level correction variances are
// estimated over an inner conductivity ensemble and the decay exponent is
// the log-log slope against h. Conductivity draws are shared across all
// (sigma, forcing) pairs; forcing draws are fresh per pair. Samples with a
// degenerate (zero) variance are dropped with a note on `warnings`.
BetaEstimate estimate_beta(const MeshHierarchy& hier, const BetaOptions& opt,
                           std::uint64_t base_seed, std::ostream* warnings = nullptr);

// ---- cost-growth exponent ---------------------------------------------------

struct GammaEstimate {
  std::vector<double> h;
  std::vector<double> cost_flops;
  std::vector<double> cost_seconds;
  double gamma_flops = 0.0, r2_flops = 0.0;
  double gamma_seconds = 0.0, r2_seconds = 0.0;
};

// gamma = slope of log C against log(1/h); needs >= 3 levels. The seconds
// column may be empty (operation counts only).
GammaEstimate estimate_gamma(const std::vector<double>& h, const std::vector<double>& flops,
                             const std::vector<double>& seconds = {});

// Measure per-level coupled-solve costs of one realization (setup included)
// and fit gamma on them. Level 0 is excluded: its exact solve is not a
// V-cycle, so the fit covers levels 1..depth and needs depth >= 3.
GammaEstimate measure_gamma(const MeshHierarchy& hier, const FieldRealization& field,
                            PhysicalParams pp = {}, Forcing fo = {}, BoundaryData bd = {},
                            SolveOptions opts = {});

// ---- reporting --------------------------------------------------------------

// sigma,f_index,norm,beta rows
void write_beta_csv(const BetaEstimate& est, std::ostream& os);
void write_gamma_json(const GammaEstimate& est, std::ostream& os);

}  // namespace sdmlmc
