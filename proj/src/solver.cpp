#include "sdmlmc/solver.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

#include "sdmlmc/errors.hpp"

namespace sdmlmc {

void write_report_json(const SolveReport& rep, std::ostream& os) {
  os.precision(17);
  os << "{\"cycles\":" << rep.cycles << ",\"rel_residual\":" << rep.rel_residual
     << ",\"converged\":" << (rep.converged ? "true" : "false") << ",\"flops\":" << rep.flops
     << ",\"seconds\":" << rep.seconds << "}\n";
}

namespace {

// forward Gauss-Seidel pass over a row-major matrix
void gauss_seidel(const Eigen::SparseMatrix<double, Eigen::RowMajor>& A, Eigen::VectorXd& x,
                  const Eigen::VectorXd& b) {
  using RowMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
  for (int i = 0; i < A.rows(); ++i) {
    double diag = 0.0, sum = 0.0;
    for (RowMat::InnerIterator it(A, i); it; ++it) {
      if (it.col() == i)
        diag = it.value();
      else
        sum += it.value() * x[it.col()];
    }
    if (diag == 0.0) throw SmootherError("zero diagonal in Gauss-Seidel row");
    x[i] = (b[i] - sum) / diag;
  }
}

double lu_solve_cost(const Eigen::SparseLU<SpMat>& lu) {
  return 2.0 * (static_cast<double>(lu.nnzL()) + static_cast<double>(lu.nnzU()));
}

}  // namespace

LscOperator::LscOperator(const BlockSystem& sys, CostMeter* meter)
    : sys_(&sys), meter_(meter) {
  if (sys.pinned)
    throw SolverSetupError("the transformed operator requires the unpinned block system");
  BpBp_ = (sys.B_p * sys.Bp_prime).pruned();
  BpAsBp_ = (sys.B_p * (sys.A_s * sys.Bp_prime).eval()).pruned();
  BpBp_.makeCompressed();
  BpAsBp_.makeCompressed();
  bpbp_lu_.compute(BpBp_);
  if (bpbp_lu_.info() != Eigen::Success)
    throw SolverSetupError("factorization of B_p Bp' failed");
  bpasbp_lu_.compute(BpAsBp_);
  if (bpasbp_lu_.info() != Eigen::Success)
    throw SolverSetupError("factorization of B_p A_s Bp' failed");
  bpbp_solve_cost_ = lu_solve_cost(bpbp_lu_);
  bpasbp_solve_cost_ = lu_solve_cost(bpasbp_lu_);
  Am_row_ = RowMat(sys.A_m);
  As_row_ = RowMat(sys.A_s);
  BpBp_row_ = RowMat(BpBp_);
}

Eigen::VectorXd LscOperator::bpbp_solve(const Eigen::VectorXd& r) const {
  if (meter_) meter_->add(bpbp_solve_cost_);
  return bpbp_lu_.solve(r);
}

Eigen::VectorXd LscOperator::apply_W(const Eigen::VectorXd& yp) const {
  const BlockSystem& s = *sys_;
  const Eigen::VectorXd g = s.Bp_prime * yp;
  const Eigen::VectorXd ag = s.A_s * g;
  const Eigen::VectorXd corr = s.Bp_prime * bpbp_solve(s.B_p * ag);
  if (meter_)
    meter_->add(2.0 * (2.0 * s.Bp_prime.nonZeros() + s.A_s.nonZeros() + s.B_p.nonZeros()));
  return ag - corr;
}

Eigen::VectorXd LscOperator::apply_S(const Eigen::VectorXd& y) const {
  const BlockSystem& s = *sys_;
  const DofCounts& nd = s.nd;
  const Eigen::VectorXd yphi = y.segment(0, nd.n_phi);
  const Eigen::VectorXd yu = y.segment(nd.n_phi, nd.n_u());
  const Eigen::VectorXd yp = y.segment(nd.n_phi + nd.n_u(), nd.n_p);
  const Eigen::VectorXd gp = s.Bp_prime * yp;
  Eigen::VectorXd out(nd.total());
  out.segment(0, nd.n_phi) = s.A_m * yphi + s.B1 * (yu + gp);
  out.segment(nd.n_phi, nd.n_u()) = s.B2 * yphi + s.A_s * yu + apply_W(yp);
  out.segment(nd.n_phi + nd.n_u(), nd.n_p) = s.B_p * yu + BpBp_ * yp;
  if (meter_)
    meter_->add(2.0 * (s.A_m.nonZeros() + s.B1.nonZeros() + s.B2.nonZeros() +
                       s.A_s.nonZeros() + s.B_p.nonZeros() + s.Bp_prime.nonZeros() +
                       BpBp_.nonZeros()));
  return out;
}

Eigen::VectorXd LscOperator::residual(const Eigen::VectorXd& y, const Eigen::VectorXd& b) const {
  return b - apply_S(y);
}

void LscOperator::gs_sweep(Eigen::VectorXd& y, const Eigen::VectorXd& b) const {
  const BlockSystem& s = *sys_;
  const DofCounts& nd = s.nd;
  auto yphi = y.segment(0, nd.n_phi);
  auto yu = y.segment(nd.n_phi, nd.n_u());
  auto yp = y.segment(nd.n_phi + nd.n_u(), nd.n_p);
  const Eigen::VectorXd gp = s.Bp_prime * yp;

  // head block: A_m y_phi = b_phi - B1 (y_u + Bp' y_p)
  Eigen::VectorXd yphi_v = yphi;
  const Eigen::VectorXd rphi = b.segment(0, nd.n_phi) - s.B1 * (yu + gp);
  gauss_seidel(Am_row_, yphi_v, rphi);
  yphi = yphi_v;

  // velocity block: A_s y_u = b_u - B2 y_phi - W y_p
  Eigen::VectorXd yu_v = yu;
  const Eigen::VectorXd ru =
      b.segment(nd.n_phi, nd.n_u()) - s.B2 * yphi_v - apply_W(yp);
  gauss_seidel(As_row_, yu_v, ru);
  yu = yu_v;

  // pressure block: (B_p Bp') y_p = b_p - B_p y_u
  Eigen::VectorXd yp_v = yp;
  const Eigen::VectorXd rp = b.segment(nd.n_phi + nd.n_u(), nd.n_p) - s.B_p * yu_v;
  gauss_seidel(BpBp_row_, yp_v, rp);
  yp = yp_v;

  if (meter_)
    meter_->add(2.0 * (s.B1.nonZeros() + s.Bp_prime.nonZeros() + s.B2.nonZeros() +
                       s.B_p.nonZeros() + Am_row_.nonZeros() + As_row_.nonZeros() +
                       BpBp_row_.nonZeros()));
}

Eigen::VectorXd LscOperator::to_x(const Eigen::VectorXd& y) const {
  const BlockSystem& s = *sys_;
  const DofCounts& nd = s.nd;
  const Eigen::VectorXd yp = y.segment(nd.n_phi + nd.n_u(), nd.n_p);
  Eigen::VectorXd x = y;
  const Eigen::VectorXd gp = s.Bp_prime * yp;
  x.segment(nd.n_phi, nd.n_u()) += gp;
  x.segment(nd.n_phi + nd.n_u(), nd.n_p) = -bpbp_solve(s.B_p * (s.A_s * gp).eval());
  if (meter_)
    meter_->add(2.0 * (2.0 * s.Bp_prime.nonZeros() + s.A_s.nonZeros() + s.B_p.nonZeros()));
  return x;
}

Eigen::VectorXd LscOperator::from_x(const Eigen::VectorXd& x) const {
  const BlockSystem& s = *sys_;
  const DofCounts& nd = s.nd;
  const Eigen::VectorXd xp = x.segment(nd.n_phi + nd.n_u(), nd.n_p);
  Eigen::VectorXd y = x;
  if (meter_) meter_->add(bpasbp_solve_cost_ + 2.0 * (BpBp_.nonZeros() + s.Bp_prime.nonZeros()));
  const Eigen::VectorXd yp = -bpasbp_lu_.solve((BpBp_ * xp).eval());
  y.segment(nd.n_phi + nd.n_u(), nd.n_p) = yp;
  y.segment(nd.n_phi, nd.n_u()) -= s.Bp_prime * yp;
  return y;
}

Eigen::MatrixXd LscOperator::dense_S() const {
  const int m = n();
  Eigen::MatrixXd S(m, m);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
  for (int j = 0; j < m; ++j) {
    e[j] = 1.0;
    S.col(j) = apply_S(e);
    e[j] = 0.0;
  }
  return S;
}

MultigridSolver::MultigridSolver(const MeshHierarchy& hier, std::vector<BlockSystem> systems,
                                 SolveOptions opts)
    : hier_(&hier), systems_(std::move(systems)), opts_(opts) {
  if (systems_.empty() || static_cast<int>(systems_.size()) > hier.depth() + 1)
    throw SolverSetupError("need between 1 and depth+1 block systems");
  for (const BlockSystem& s : systems_) {
    ops_.push_back(std::make_unique<LscOperator>(s, &meter_));
    meter_.add(ops_.back()->setup_cost());
  }
  for (int l = 0; l < static_cast<int>(systems_.size()); ++l) {
    const BlockSystem& s = systems_[l];
    std::vector<char> mask(s.nd.total(), 0);
    for (int d = 0; d < s.nd.n_phi; ++d) mask[d] = s.phi_fixed[d];
    for (int nd = 0; nd < s.nd.n_u_nodes; ++nd)
      if (s.u_fixed[nd]) mask[s.nd.n_phi + 2 * nd] = mask[s.nd.n_phi + 2 * nd + 1] = 1;
    fixed_mask_.push_back(std::move(mask));
  }
  SpMat L0 = systems_[0].full_matrix();
  L0.makeCompressed();
  coarse_lu_.compute(L0);
  if (coarse_lu_.info() != Eigen::Success)
    throw SolverSetupError("coarse-level factorization failed");
  coarse_solve_cost_ = lu_solve_cost(coarse_lu_);
  meter_.add(coarse_solve_cost_);  // factorization work estimate
}

void MultigridSolver::vcycle(int level, Eigen::VectorXd& y, const Eigen::VectorXd& b) const {
  if (level == 0) {
    // exact coarse solve of the untransformed system, mapped back to the
    // transformed variables
    meter_.add(coarse_solve_cost_);
    y = ops_[0]->from_x(coarse_lu_.solve(b));
    return;
  }
  const LscOperator& op = *ops_[level];
  for (int s = 0; s < opts_.pre_smooth; ++s) op.gs_sweep(y, b);
  Eigen::VectorXd r = op.residual(y, b);
  Eigen::VectorXd rc = hier_->restrict_residual(level, r);
  // Dirichlet rows carry no error; keep the coarse problem consistent
  const std::vector<char>& mask = fixed_mask_[level - 1];
  for (int i = 0; i < rc.size(); ++i)
    if (mask[i]) rc[i] = 0.0;
  Eigen::VectorXd ec = Eigen::VectorXd::Zero(rc.size());
  vcycle(level - 1, ec, rc);
  // the correction is a finite element function only in the physical
  // variables, so transfer it as x = M y and re-transform on the fine level
  Eigen::VectorXd ef = hier_->prolongate(level, ops_[level - 1]->to_x(ec));
  const std::vector<char>& fmask = fixed_mask_[level];
  for (int i = 0; i < ef.size(); ++i)
    if (fmask[i]) ef[i] = 0.0;
  y += ops_[level]->from_x(ef);
  for (int s = 0; s < opts_.post_smooth; ++s) op.gs_sweep(y, b);
}

Eigen::VectorXd MultigridSolver::solve(const Eigen::VectorXd& b, SolveReport* rep,
                                       const Eigen::VectorXd* y0) const {
  return solve_at(depth(), b, rep, y0);
}

Eigen::VectorXd MultigridSolver::solve_at(int level, const Eigen::VectorXd& b, SolveReport* rep,
                                          const Eigen::VectorXd* y0) const {
  if (level < 0 || level > depth()) throw ArgumentError("solve_at: level out of range");
  const auto t0 = std::chrono::steady_clock::now();
  const double f0 = meter_.flops;
  const LscOperator& top = *ops_[level];
  Eigen::VectorXd y = (y0 && y0->size() == b.size()) ? *y0 : Eigen::VectorXd::Zero(b.size());
  const double bnorm = b.norm();
  const double scale = (bnorm > 0.0) ? bnorm : 1.0;
  double rel = top.residual(y, b).norm() / scale;
  int cycles = 0;
  while (rel > opts_.tol && cycles < opts_.max_cycles) {
    vcycle(level, y, b);
    rel = top.residual(y, b).norm() / scale;
    ++cycles;
  }
  if (rep) {
    rep->cycles = cycles;
    rep->rel_residual = rel;
    rep->converged = rel <= opts_.tol;
    rep->flops = meter_.flops - f0;
    rep->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  if (rel > opts_.tol)
    throw SolveFailure("multigrid iteration did not reach the requested tolerance");
  return y;
}

Eigen::VectorXd MultigridSolver::solve_x(SolveReport* rep, const Eigen::VectorXd* x0) const {
  return solve_x_at(depth(), rep, x0);
}

Eigen::VectorXd MultigridSolver::solve_x_at(int level, SolveReport* rep,
                                            const Eigen::VectorXd* x0) const {
  if (level < 0 || level > depth()) throw ArgumentError("solve_x_at: level out of range");
  const LscOperator& top = *ops_[level];
  const Eigen::VectorXd b = systems_[level].rhs();
  if (x0 && x0->size() == b.size()) {
    const Eigen::VectorXd y0 = top.from_x(*x0);
    return top.to_x(solve_at(level, b, rep, &y0));
  }
  return top.to_x(solve_at(level, b, rep, nullptr));
}

double MultigridSolver::contraction_factor(int cycles) const {
  const LscOperator& top = *ops_.back();
  const Eigen::VectorXd b = systems_.back().rhs();
  Eigen::VectorXd y = Eigen::VectorXd::Zero(b.size());
  double prev = top.residual(y, b).norm();
  double prod = 1.0;
  for (int c = 0; c < cycles; ++c) {
    vcycle(depth(), y, b);
    const double cur = top.residual(y, b).norm();
    if (prev == 0.0) break;
    prod *= cur / prev;
    prev = cur;
  }
  return std::pow(prod, 1.0 / cycles);
}

}  // namespace sdmlmc
