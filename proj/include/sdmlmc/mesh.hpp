#pragma once

#include <Eigen/Sparse>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "sdmlmc/errors.hpp"

namespace sdmlmc {

using SpMat = Eigen::SparseMatrix<double>;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Two stacked rectangles sharing the segment y = 0: porous medium on top,
// free-flow conduit below.
struct DomainSpec {
  double x0 = 0.0;
  double x1 = 1.0;
  double porous_top = 0.75;      // D_m = (x0,x1) x (0, porous_top)
  double conduit_bottom = -0.25; // D_s = (x0,x1) x (conduit_bottom, 0)

  double width() const { return x1 - x0; }
};

enum class Subdomain : std::uint8_t { porous, conduit };

// Boundary classification of a node. `interface_` marks nodes on y = 0 that
// are not pinned by any Dirichlet segment.
enum class BoundaryTag : std::uint8_t {
  interior,
  interface_,
  gamma_m,   // porous outer boundary (sides + top)
  gamma_s1,  // conduit left wall  {x0} x (conduit_bottom, 0)
  gamma_s2,  // conduit bottom     (x0,x1) x {conduit_bottom}
  gamma_s3,  // conduit right wall {x1} x (conduit_bottom, 0)
};

struct Triangle {
  std::array<int, 3> v;  // vertex ids, counterclockwise
  Subdomain sub;
};

// Edge on y = 0 with its two neighbours. The conduit outward normal n_s is
// (0,1) and the tangent tau is (1,0) for every interface edge.
struct InterfaceEdge {
  int v_left = -1;
  int v_right = -1;
  int tri_porous = -1;
  int tri_conduit = -1;
};

struct QuadPoint {
  Vec2 p;
  double w = 0.0;
};

// 7-point symmetric rule, exact for polynomials of degree 5.
std::array<QuadPoint, 7> triangle_quadrature(const Vec2& a, const Vec2& b, const Vec2& c);

// 3-point Gauss rule on a segment, exact for degree 5.
std::array<QuadPoint, 3> segment_quadrature(const Vec2& a, const Vec2& b);

struct DofCounts {
  int n_phi = 0;      // quadratic scalar on the porous closure
  int n_u_nodes = 0;  // quadratic nodes on the conduit closure (x2 components)
  int n_p = 0;        // linear pressure nodes on the conduit closure
  int n_u() const { return 2 * n_u_nodes; }
  int total() const { return n_phi + n_u() + n_p; }
};

// One structured triangulation of the coupled domain. Vertices live on the
// lattice x = x0 + i*h, y = conduit_bottom + j*h; every cell is split along
// the diagonal from its lower-left to its upper-right corner, so uniform
// red refinement of a level reproduces the next finer level exactly.
class MeshLevel {
 public:
  MeshLevel(const DomainSpec& dom, double h, int nx, int ny_m, int ny_s);

  const DomainSpec& domain() const { return dom_; }
  double h() const { return h_; }
  int nx() const { return nx_; }
  int ny_m() const { return ny_m_; }
  int ny_s() const { return ny_s_; }
  int ny_total() const { return ny_m_ + ny_s_; }

  const std::vector<Vec2>& vertices() const { return vertices_; }
  const std::vector<Triangle>& tris() const { return tris_; }
  const std::vector<InterfaceEdge>& interface_edges() const { return iedges_; }
  const std::vector<int>& porous_tris() const { return porous_tris_; }

  int vertex_id(int i, int j) const { return j * (nx_ + 1) + i; }
  Vec2 vertex_pos(int i, int j) const;

  // --- degree-of-freedom layout -------------------------------------------
  // Quadratic nodes sit on the half-step lattice (hi, hj), hi in [0, 2nx],
  // hj in [0, 2(ny_s+ny_m)] measured from the conduit bottom. The interface
  // row is hj = 2*ny_s; phi and u both own their trace of it.
  int phi_dof(int hi, int hj) const;   // requires hj >= 2*ny_s
  int u_node(int hi, int hj) const;    // requires hj <= 2*ny_s
  int p_dof(int i, int j) const;       // full lattice, j <= ny_s
  DofCounts dofs() const;

  Vec2 half_node_pos(int hi, int hj) const;
  Vec2 phi_node_pos(int dof) const;
  Vec2 u_node_pos(int node) const;
  Vec2 p_node_pos(int dof) const;

  BoundaryTag phi_node_tag(int dof) const;
  BoundaryTag u_node_tag(int node) const;

  // Half-lattice indices of the 6 quadratic nodes of a triangle
  // (3 vertices then midpoints 01, 12, 20).
  std::array<std::pair<int, int>, 6> p2_nodes(const Triangle& t) const;

  // Quadrature points shared with the random-field sampler: the 7-point rule
  // over porous triangles (triangle-major) followed by the 3-point rule over
  // interface edges (edge-major).
  std::vector<Vec2> porous_quad_points() const;
  std::vector<Vec2> interface_quad_points() const;

  double triangle_area(const Triangle& t) const;

 private:
  DomainSpec dom_;
  double h_;
  int nx_, ny_m_, ny_s_;
  std::vector<Vec2> vertices_;
  std::vector<Triangle> tris_;
  std::vector<InterfaceEdge> iedges_;
  std::vector<int> porous_tris_;
};

// Nested levels T_0..T_L plus the inter-level transfer operators, split per
// field (quadratic porous scalar, quadratic conduit scalar component, linear
// conduit pressure). Immutable after construction.
class MeshHierarchy {
 public:
  MeshHierarchy(const DomainSpec& dom, double h0, int ch, int L);

  const DomainSpec& domain() const { return dom_; }
  int coarsening_ratio() const { return ch_; }
  int depth() const { return static_cast<int>(levels_.size()) - 1; }
  const MeshLevel& level(int l) const { return levels_.at(l); }

  // Interpolation matrices from level-1 to level, 1 <= level <= depth().
  const SpMat& P_phi(int level) const { return P_phi_.at(level - 1); }
  const SpMat& P_u(int level) const { return P_u_.at(level - 1); }  // scalar component
  const SpMat& P_p(int level) const { return P_p_.at(level - 1); }

  // Stacked transfer on [phi; u; p] vectors.
  Eigen::VectorXd prolongate(int level, const Eigen::VectorXd& coarse) const;
  // Residual transfer: transpose of the prolongation (see restriction_matrix
  // for the averaged variant).
  Eigen::VectorXd restrict_residual(int level, const Eigen::VectorXd& fine) const;

  // Full stacked prolongation matrix (mainly for verification at small h).
  SpMat stacked_prolongation(int level) const;
  // Averaged restriction (1/ch^2) P^T; row sums are 1 on interior nodes of
  // the linear pressure block.
  SpMat restriction_matrix(int level) const;

 private:
  DomainSpec dom_;
  int ch_;
  std::vector<MeshLevel> levels_;
  std::vector<SpMat> P_phi_, P_u_, P_p_;
};

// h0 must subdivide all three rectangle side lengths into whole cells.
MeshHierarchy build_hierarchy(const DomainSpec& dom, double h0, int ch, int L);

// Plain-text dump: vertex table, triangle table with subdomain tag, and
// interface edge table.
void export_mesh(const MeshLevel& level, std::ostream& os);

}  // namespace sdmlmc
