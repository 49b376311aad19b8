#pragma once

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>

#include "sdmlmc/mesh.hpp"
#include "sdmlmc/randfield.hpp"

namespace sdmlmc {

struct PhysicalParams {
  double nu = 1.0;     // kinematic viscosity
  double g = 1.0;      // gravitational acceleration
  double alpha = 1.0;  // slip coefficient in the tangential interface condition
  double z = 0.0;      // elevation datum entering the interface forcing
};

struct Forcing {
  std::function<double(const Vec2&)> f_m = [](const Vec2&) { return 0.0; };
  std::function<Vec2(const Vec2&)> f_s = [](const Vec2&) { return Vec2{0.0, 0.0}; };
};

// Dirichlet data. The velocity callback also receives the wall tag so data
// can differ between the inflow walls and the no-slip bottom.
struct BoundaryData {
  std::function<double(const Vec2&)> phi = [](const Vec2&) { return 0.0; };
  std::function<Vec2(const Vec2&, BoundaryTag)> u = [](const Vec2&, BoundaryTag tag) {
    return tag == BoundaryTag::gamma_s2 ? Vec2{0.0, 0.0} : Vec2{1.0, 0.0};
  };
};

// Block discretization of the coupled problem on one mesh level, ordered
// [phi; u; p] with velocity components interleaved (2*node + comp).
//
//   [ A_m  B_1   0   ] [phi]   [b_phi]
//   [ B_2  A_s  Bp'  ] [ u ] = [b_u  ]
//   [  0   B_p   C   ] [ p ]   [b_p  ]
//
// Dirichlet rows are replaced by the identity and the corresponding columns
// are lifted into the right-hand sides. C is empty unless the pressure has
// been pinned (only needed when every interface velocity dof is fixed).
struct BlockSystem {
  DofCounts nd;
  SpMat A_m, A_s, B1, B2, Bp_prime, B_p, C;
  Eigen::VectorXd b_phi, b_u, b_p;
  std::vector<char> phi_fixed;  // per phi dof
  std::vector<char> u_fixed;    // per velocity node (both components)
  bool pinned = false;

  int n() const { return nd.total(); }
  Eigen::VectorXd rhs() const;
  SpMat full_matrix() const;
};

// `apply_dirichlet=false` keeps the raw Galerkin blocks (used for energy and
// divergence identities in the tests).
BlockSystem assemble(const MeshLevel& mesh, const FieldRealization& field, int level,
                     const PhysicalParams& pp, const Forcing& fo, const BoundaryData& bd,
                     bool apply_dirichlet = true);

// Fix the pressure at the first node (needed only for fully enclosed flows).
void pin_pressure(BlockSystem& sys);

// --- solution post-processing ----------------------------------------------

struct NormTriple {
  double l2 = 0.0;
  double linf = 0.0;
  double h1 = 0.0;
};

NormTriple phi_norms(const MeshLevel& mesh, const Eigen::VectorXd& phi);
NormTriple u_norms(const MeshLevel& mesh, const Eigen::VectorXd& u);  // interleaved
NormTriple p_norms(const MeshLevel& mesh, const Eigen::VectorXd& p);

// l2 norm of the discrete divergence residual B_p u - b_p.
double discrete_divergence(const BlockSystem& sys, const Eigen::VectorXd& u);

Eigen::VectorXd phi_part(const DofCounts& nd, const Eigen::VectorXd& x);
Eigen::VectorXd u_part(const DofCounts& nd, const Eigen::VectorXd& x);
Eigen::VectorXd p_part(const DofCounts& nd, const Eigen::VectorXd& x);

// "row col value" triples, 17 significant digits.
void export_matrix(const SpMat& A, std::ostream& os);

// --- scalar auxiliary problem ----------------------------------------------

// Darcy operator on the porous rectangle alone with homogeneous Dirichlet
// data on its whole boundary (interface included); used by the variance-decay
// calibration.
struct DarcySystem {
  SpMat A;
  Eigen::VectorXd b;
  std::vector<char> fixed;  // per phi dof
};

DarcySystem assemble_darcy(const MeshLevel& mesh, const FieldRealization& field, int level,
                           double g, const std::function<double(const Vec2&)>& f);

}  // namespace sdmlmc
