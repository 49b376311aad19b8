#pragma once

#include <Eigen/SparseLU>
#include <iosfwd>
#include <memory>
#include <vector>

#include "sdmlmc/fem.hpp"
#include "sdmlmc/mesh.hpp"

namespace sdmlmc {

// Platform-independent work counter: 2 flops per stored nonzero for sparse
// matrix-vector products and smoother rows, 2 flops per factor nonzero for
// triangular solves.
struct CostMeter {
  double flops = 0.0;
  void add(double f) { flops += f; }
  void reset() { flops = 0.0; }
};

struct SolveOptions {
  double tol = 1e-8;   // relative residual of the transformed system
  int max_cycles = 50;
  int pre_smooth = 2;
  int post_smooth = 2;
};

struct SolveReport {
  int cycles = 0;
  double rel_residual = 0.0;
  bool converged = false;
  double flops = 0.0;
  double seconds = 0.0;
};

// One JSON object per line.
void write_report_json(const SolveReport& rep, std::ostream& os);

// The transformed operator S = L M of one level, where L is the block system
// and M the least-squares commutator transformation
//
//   M = [[I,0,0],[0,I,Bp'],[0,0,-(B_p Bp')^{-1} B_p A_s Bp']].
//
// S is never formed: its third block column is applied through one cached
// factorization of B_p Bp' per product, which keeps the per-sweep work
// proportional to the number of stored nonzeros.
class LscOperator {
 public:
  explicit LscOperator(const BlockSystem& sys, CostMeter* meter = nullptr);

  const BlockSystem& system() const { return *sys_; }
  int n() const { return sys_->nd.total(); }

  Eigen::VectorXd apply_S(const Eigen::VectorXd& y) const;
  Eigen::VectorXd residual(const Eigen::VectorXd& y, const Eigen::VectorXd& b) const;
  // one forward block Gauss-Seidel sweep on S y = b, in-place
  void gs_sweep(Eigen::VectorXd& y, const Eigen::VectorXd& b) const;

  // change of variables x = M y and its inverse
  Eigen::VectorXd to_x(const Eigen::VectorXd& y) const;
  Eigen::VectorXd from_x(const Eigen::VectorXd& x) const;

  // column-by-column materialization (verification at small sizes only)
  Eigen::MatrixXd dense_S() const;

  // work estimate of the two factorizations held by this operator
  double setup_cost() const { return bpbp_solve_cost_ + bpasbp_solve_cost_; }

 private:
  using RowMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  Eigen::VectorXd apply_W(const Eigen::VectorXd& yp) const;
  Eigen::VectorXd bpbp_solve(const Eigen::VectorXd& r) const;

  const BlockSystem* sys_;
  CostMeter* meter_;
  SpMat BpBp_;           // B_p Bp'
  SpMat BpAsBp_;         // B_p A_s Bp'
  RowMat Am_row_, As_row_, BpBp_row_;
  Eigen::SparseLU<SpMat> bpbp_lu_, bpasbp_lu_;
  double bpbp_solve_cost_ = 0.0, bpasbp_solve_cost_ = 0.0;
};

// Geometric V-cycle on the transformed systems of every level. Residuals are
// restricted with the transpose of the finite element interpolation and the
// coarsest level is solved exactly through a direct factorization of its
// untransformed matrix. `systems` may cover only the first levels of the
// hierarchy; the solver's depth is systems.size() - 1.
class MultigridSolver {
 public:
  MultigridSolver(const MeshHierarchy& hier, std::vector<BlockSystem> systems,
                  SolveOptions opts = {});

  int depth() const { return static_cast<int>(ops_.size()) - 1; }
  const LscOperator& op(int level) const { return *ops_.at(level); }
  const BlockSystem& system(int level) const { return systems_.at(level); }
  CostMeter& meter() const { return meter_; }
  const SolveOptions& options() const { return opts_; }

  // Solve the top-level transformed system S y = b. An empty y0 starts from
  // zero; otherwise y0 seeds the iteration (warm start).
  Eigen::VectorXd solve(const Eigen::VectorXd& b, SolveReport* rep = nullptr,
                        const Eigen::VectorXd* y0 = nullptr) const;

  // Convenience wrapper: solve with the assembled right-hand side and return
  // the physical unknowns x = M y. An optional x0 is converted to a warm
  // start in the transformed variables.
  Eigen::VectorXd solve_x(SolveReport* rep = nullptr,
                          const Eigen::VectorXd* x0 = nullptr) const;

  // Same as solve / solve_x but iterating at an intermediate level.
  Eigen::VectorXd solve_at(int level, const Eigen::VectorXd& b, SolveReport* rep = nullptr,
                           const Eigen::VectorXd* y0 = nullptr) const;
  Eigen::VectorXd solve_x_at(int level, SolveReport* rep = nullptr,
                             const Eigen::VectorXd* x0 = nullptr) const;

  // residual contraction factor of a single V-cycle at the top level,
  // measured from a zero initial guess (geometric mean over `cycles` cycles)
  double contraction_factor(int cycles = 5) const;

 private:
  void vcycle(int level, Eigen::VectorXd& y, const Eigen::VectorXd& b) const;

  const MeshHierarchy* hier_;
  std::vector<BlockSystem> systems_;
  std::vector<std::unique_ptr<LscOperator>> ops_;
  std::vector<std::vector<char>> fixed_mask_;  // per level, per stacked dof
  Eigen::SparseLU<SpMat> coarse_lu_;
  double coarse_solve_cost_ = 0.0;
  SolveOptions opts_;
  mutable CostMeter meter_;
};

}  // namespace sdmlmc
