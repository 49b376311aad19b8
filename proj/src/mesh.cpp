#include "sdmlmc/mesh.hpp"

#include <cmath>
#include <ostream>
#include <vector>

namespace sdmlmc {

namespace {

constexpr double kDropTol = 1e-14;

bool divides_evenly(double len, double h, int* n_out) {
  const double q = len / h;
  const int n = static_cast<int>(std::lround(q));
  if (n < 1 || std::fabs(q - n) > 1e-9 * q) return false;
  *n_out = n;
  return true;
}

}  // namespace

std::array<QuadPoint, 7> triangle_quadrature(const Vec2& a, const Vec2& b, const Vec2& c) {
  // Degree-5 symmetric rule; weights sum to 1 before scaling by area.
  constexpr double w0 = 9.0 / 40.0;
  constexpr double a1 = 0.059715871789769820;
  constexpr double b1 = 0.470142064105115090;
  constexpr double w1 = 0.132394152788506180;
  constexpr double a2 = 0.797426985353087320;
  constexpr double b2 = 0.101286507323456340;
  constexpr double w2 = 0.125939180544827150;
  constexpr double bary[7][4] = {
      {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, w0}, {a1, b1, b1, w1}, {b1, a1, b1, w1},
      {b1, b1, a1, w1},                      {a2, b2, b2, w2}, {b2, a2, b2, w2},
      {b2, b2, a2, w2},
  };
  const double area =
      0.5 * std::fabs((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
  std::array<QuadPoint, 7> out;
  for (int q = 0; q < 7; ++q) {
    const double l0 = bary[q][0], l1 = bary[q][1], l2 = bary[q][2];
    out[q].p = {l0 * a.x + l1 * b.x + l2 * c.x, l0 * a.y + l1 * b.y + l2 * c.y};
    out[q].w = bary[q][3] * area;
  }
  return out;
}

std::array<QuadPoint, 3> segment_quadrature(const Vec2& a, const Vec2& b) {
  const double xi = std::sqrt(3.0 / 5.0);
  const double len = std::hypot(b.x - a.x, b.y - a.y);
  const double mx = 0.5 * (a.x + b.x), my = 0.5 * (a.y + b.y);
  const double dx = 0.5 * (b.x - a.x), dy = 0.5 * (b.y - a.y);
  std::array<QuadPoint, 3> out;
  const double pts[3] = {-xi, 0.0, xi};
  const double wts[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  for (int q = 0; q < 3; ++q) {
    out[q].p = {mx + pts[q] * dx, my + pts[q] * dy};
    out[q].w = wts[q] * 0.5 * len;
  }
  return out;
}

MeshLevel::MeshLevel(const DomainSpec& dom, double h, int nx, int ny_m, int ny_s)
    : dom_(dom), h_(h), nx_(nx), ny_m_(ny_m), ny_s_(ny_s) {
  const int ny = ny_m + ny_s;
  vertices_.reserve((nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      vertices_.push_back({dom.x0 + i * h, dom.conduit_bottom + j * h});

  tris_.reserve(2 * nx * ny);
  for (int cy = 0; cy < ny; ++cy) {
    const Subdomain sub = (cy >= ny_s) ? Subdomain::porous : Subdomain::conduit;
    for (int cx = 0; cx < nx; ++cx) {
      // diagonal from lower-left to upper-right
      tris_.push_back({{vertex_id(cx, cy), vertex_id(cx + 1, cy), vertex_id(cx + 1, cy + 1)}, sub});
      tris_.push_back({{vertex_id(cx, cy), vertex_id(cx + 1, cy + 1), vertex_id(cx, cy + 1)}, sub});
    }
  }
  for (int t = 0; t < static_cast<int>(tris_.size()); ++t)
    if (tris_[t].sub == Subdomain::porous) porous_tris_.push_back(t);

  iedges_.reserve(nx);
  for (int cx = 0; cx < nx; ++cx) {
    InterfaceEdge e;
    e.v_left = vertex_id(cx, ny_s);
    e.v_right = vertex_id(cx + 1, ny_s);
    e.tri_porous = (ny_s * nx + cx) * 2;            // lower triangle of cell (cx, ny_s)
    e.tri_conduit = ((ny_s - 1) * nx + cx) * 2 + 1; // upper triangle of cell (cx, ny_s-1)
    iedges_.push_back(e);
  }
}

Vec2 MeshLevel::vertex_pos(int i, int j) const {
  return {dom_.x0 + i * h_, dom_.conduit_bottom + j * h_};
}

int MeshLevel::phi_dof(int hi, int hj) const { return (hj - 2 * ny_s_) * (2 * nx_ + 1) + hi; }

int MeshLevel::u_node(int hi, int hj) const { return hj * (2 * nx_ + 1) + hi; }

int MeshLevel::p_dof(int i, int j) const { return j * (nx_ + 1) + i; }

DofCounts MeshLevel::dofs() const {
  DofCounts d;
  d.n_phi = (2 * nx_ + 1) * (2 * ny_m_ + 1);
  d.n_u_nodes = (2 * nx_ + 1) * (2 * ny_s_ + 1);
  d.n_p = (nx_ + 1) * (ny_s_ + 1);
  return d;
}

Vec2 MeshLevel::half_node_pos(int hi, int hj) const {
  return {dom_.x0 + 0.5 * hi * h_, dom_.conduit_bottom + 0.5 * hj * h_};
}

Vec2 MeshLevel::phi_node_pos(int dof) const {
  const int w = 2 * nx_ + 1;
  return half_node_pos(dof % w, dof / w + 2 * ny_s_);
}

Vec2 MeshLevel::u_node_pos(int node) const {
  const int w = 2 * nx_ + 1;
  return half_node_pos(node % w, node / w);
}

Vec2 MeshLevel::p_node_pos(int dof) const {
  const int w = nx_ + 1;
  return vertex_pos(dof % w, dof / w);
}

BoundaryTag MeshLevel::phi_node_tag(int dof) const {
  const int w = 2 * nx_ + 1;
  const int hi = dof % w;
  const int hj = dof / w + 2 * ny_s_;
  // side walls own the interface corners, so the trace of phi vanishes there
  if (hi == 0 || hi == 2 * nx_ || hj == 2 * (ny_s_ + ny_m_)) return BoundaryTag::gamma_m;
  if (hj == 2 * ny_s_) return BoundaryTag::interface_;
  return BoundaryTag::interior;
}

BoundaryTag MeshLevel::u_node_tag(int node) const {
  const int w = 2 * nx_ + 1;
  const int hi = node % w;
  const int hj = node / w;
  if (hj == 0) return BoundaryTag::gamma_s2;  // no-slip wins at the bottom corners
  if (hi == 0) return BoundaryTag::gamma_s1;
  if (hi == 2 * nx_) return BoundaryTag::gamma_s3;
  if (hj == 2 * ny_s_) return BoundaryTag::interface_;
  return BoundaryTag::interior;
}

std::array<std::pair<int, int>, 6> MeshLevel::p2_nodes(const Triangle& t) const {
  const int w = nx_ + 1;
  std::array<std::pair<int, int>, 3> v;
  for (int k = 0; k < 3; ++k) v[k] = {2 * (t.v[k] % w), 2 * (t.v[k] / w)};
  return {v[0],
          v[1],
          v[2],
          {(v[0].first + v[1].first) / 2, (v[0].second + v[1].second) / 2},
          {(v[1].first + v[2].first) / 2, (v[1].second + v[2].second) / 2},
          {(v[2].first + v[0].first) / 2, (v[2].second + v[0].second) / 2}};
}

std::vector<Vec2> MeshLevel::porous_quad_points() const {
  std::vector<Vec2> pts;
  pts.reserve(porous_tris_.size() * 7);
  for (int t : porous_tris_) {
    const Triangle& tr = tris_[t];
    const auto q =
        triangle_quadrature(vertices_[tr.v[0]], vertices_[tr.v[1]], vertices_[tr.v[2]]);
    for (const auto& qp : q) pts.push_back(qp.p);
  }
  return pts;
}

std::vector<Vec2> MeshLevel::interface_quad_points() const {
  std::vector<Vec2> pts;
  pts.reserve(iedges_.size() * 3);
  for (const auto& e : iedges_) {
    const auto q = segment_quadrature(vertices_[e.v_left], vertices_[e.v_right]);
    for (const auto& qp : q) pts.push_back(qp.p);
  }
  return pts;
}

double MeshLevel::triangle_area(const Triangle& t) const {
  const Vec2& a = vertices_[t.v[0]];
  const Vec2& b = vertices_[t.v[1]];
  const Vec2& c = vertices_[t.v[2]];
  return 0.5 * std::fabs((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

namespace {

// Quadratic shape values at barycentric (l0,l1,l2), nodes ordered
// [v0 v1 v2 m01 m12 m20].
void p2_shapes(double l0, double l1, double l2, double n[6]) {
  n[0] = l0 * (2.0 * l0 - 1.0);
  n[1] = l1 * (2.0 * l1 - 1.0);
  n[2] = l2 * (2.0 * l2 - 1.0);
  n[3] = 4.0 * l0 * l1;
  n[4] = 4.0 * l1 * l2;
  n[5] = 4.0 * l2 * l0;
}

struct CellLocation {
  int cx, cy;        // coarse cell
  double fx, fy;     // local coordinates in [0,1]^2
};

// Locate a node of the fine lattice (index `r` in units of 1/denom cells)
// inside the coarse cell range [lo, hi).
void locate_1d(int r, int denom, int lo, int hi, int* cell, double* frac) {
  int c = r / denom;
  int rem = r % denom;
  if (c >= hi) {  // node on the outer edge of the last admissible cell
    c = hi - 1;
    rem = denom;
  }
  if (c < lo) {
    c = lo;
    rem = 0;
  }
  *cell = c;
  *frac = static_cast<double>(rem) / denom;
}

// Interpolation matrix for quadratic nodes of `fine` from quadratic nodes of
// `coarse` over the cell rows [cy_lo, cy_hi) of the coarse mesh. `dof` maps a
// half-lattice pair to the field's dof index (or -1 to skip).
template <class DofC, class DofF>
SpMat build_p2_interpolation(const MeshLevel& coarse, const MeshLevel& fine, int ch, int cy_lo,
                             int cy_hi, int hj_lo, int hj_hi, int n_fine, int n_coarse,
                             DofC&& dof_c, DofF&& dof_f) {
  std::vector<Eigen::Triplet<double>> trips;
  const int denom = 2 * ch;
  for (int hj = hj_lo; hj <= hj_hi; ++hj) {
    for (int hi = 0; hi <= 2 * fine.nx(); ++hi) {
      const int row = dof_f(hi, hj);
      CellLocation loc;
      locate_1d(hi, denom, 0, coarse.nx(), &loc.cx, &loc.fx);
      locate_1d(hj, denom, cy_lo, cy_hi, &loc.cy, &loc.fy);
      // split along the cell diagonal from (0,0) to (1,1)
      double l0, l1, l2;
      std::array<std::pair<int, int>, 3> v;
      if (loc.fx >= loc.fy) {
        l0 = 1.0 - loc.fx;
        l1 = loc.fx - loc.fy;
        l2 = loc.fy;
        v = {{{2 * loc.cx, 2 * loc.cy},
              {2 * loc.cx + 2, 2 * loc.cy},
              {2 * loc.cx + 2, 2 * loc.cy + 2}}};
      } else {
        l0 = 1.0 - loc.fy;
        l1 = loc.fx;
        l2 = loc.fy - loc.fx;
        v = {{{2 * loc.cx, 2 * loc.cy},
              {2 * loc.cx + 2, 2 * loc.cy + 2},
              {2 * loc.cx, 2 * loc.cy + 2}}};
      }
      double n[6];
      p2_shapes(l0, l1, l2, n);
      const std::array<std::pair<int, int>, 6> nodes = {
          v[0],
          v[1],
          v[2],
          {(v[0].first + v[1].first) / 2, (v[0].second + v[1].second) / 2},
          {(v[1].first + v[2].first) / 2, (v[1].second + v[2].second) / 2},
          {(v[2].first + v[0].first) / 2, (v[2].second + v[0].second) / 2}};
      for (int k = 0; k < 6; ++k) {
        if (std::fabs(n[k]) < kDropTol) continue;
        trips.emplace_back(row, dof_c(nodes[k].first, nodes[k].second), n[k]);
      }
    }
  }
  SpMat P(n_fine, n_coarse);
  P.setFromTriplets(trips.begin(), trips.end());
  return P;
}

SpMat build_p1_interpolation(const MeshLevel& coarse, const MeshLevel& fine, int ch) {
  std::vector<Eigen::Triplet<double>> trips;
  for (int j = 0; j <= fine.ny_s(); ++j) {
    for (int i = 0; i <= fine.nx(); ++i) {
      const int row = fine.p_dof(i, j);
      int cx, cy;
      double fx, fy;
      locate_1d(i, ch, 0, coarse.nx(), &cx, &fx);
      locate_1d(j, ch, 0, coarse.ny_s(), &cy, &fy);
      double l[3];
      int vi[3][2];
      if (fx >= fy) {
        l[0] = 1.0 - fx;
        l[1] = fx - fy;
        l[2] = fy;
        vi[0][0] = cx, vi[0][1] = cy;
        vi[1][0] = cx + 1, vi[1][1] = cy;
        vi[2][0] = cx + 1, vi[2][1] = cy + 1;
      } else {
        l[0] = 1.0 - fy;
        l[1] = fx;
        l[2] = fy - fx;
        vi[0][0] = cx, vi[0][1] = cy;
        vi[1][0] = cx + 1, vi[1][1] = cy + 1;
        vi[2][0] = cx, vi[2][1] = cy + 1;
      }
      for (int k = 0; k < 3; ++k) {
        if (std::fabs(l[k]) < kDropTol) continue;
        trips.emplace_back(row, coarse.p_dof(vi[k][0], vi[k][1]), l[k]);
      }
    }
  }
  SpMat P(fine.dofs().n_p, coarse.dofs().n_p);
  P.setFromTriplets(trips.begin(), trips.end());
  return P;
}

}  // namespace

MeshHierarchy::MeshHierarchy(const DomainSpec& dom, double h0, int ch, int L)
    : dom_(dom), ch_(ch) {
  if (L < 0) throw ArgumentError("hierarchy depth L must be >= 0");
  if (ch < 2) throw ArgumentError("coarsening ratio c_h must be an integer >= 2");
  int nx0 = 0, nym0 = 0, nys0 = 0;
  if (!divides_evenly(dom.width(), h0, &nx0) || !divides_evenly(dom.porous_top, h0, &nym0) ||
      !divides_evenly(-dom.conduit_bottom, h0, &nys0))
    throw GeometryError("h0 must divide all rectangle side lengths evenly");

  int scale = 1;
  for (int l = 0; l <= L; ++l) {
    levels_.emplace_back(dom, h0 / scale, nx0 * scale, nym0 * scale, nys0 * scale);
    scale *= ch;
  }
  for (int l = 1; l <= L; ++l) {
    const MeshLevel& c = levels_[l - 1];
    const MeshLevel& f = levels_[l];
    auto phi_c = [&c](int hi, int hj) { return c.phi_dof(hi, hj); };
    auto phi_f = [&f](int hi, int hj) { return f.phi_dof(hi, hj); };
    P_phi_.push_back(build_p2_interpolation(c, f, ch, c.ny_s(), c.ny_total(), 2 * f.ny_s(),
                                            2 * f.ny_total(), f.dofs().n_phi, c.dofs().n_phi,
                                            phi_c, phi_f));
    auto u_c = [&c](int hi, int hj) { return c.u_node(hi, hj); };
    auto u_f = [&f](int hi, int hj) { return f.u_node(hi, hj); };
    P_u_.push_back(build_p2_interpolation(c, f, ch, 0, c.ny_s(), 0, 2 * f.ny_s(),
                                          f.dofs().n_u_nodes, c.dofs().n_u_nodes, u_c, u_f));
    P_p_.push_back(build_p1_interpolation(c, f, ch));
  }
}

Eigen::VectorXd MeshHierarchy::prolongate(int level, const Eigen::VectorXd& coarse) const {
  if (level < 1 || level > depth()) throw ArgumentError("prolongate: level out of range");
  const DofCounts cn = levels_[level - 1].dofs();
  const DofCounts fn = levels_[level].dofs();
  if (coarse.size() != cn.total()) throw ArgumentError("prolongate: coarse vector size mismatch");
  Eigen::VectorXd fine = Eigen::VectorXd::Zero(fn.total());
  const SpMat& Pphi = P_phi_[level - 1];
  const SpMat& Pu = P_u_[level - 1];
  const SpMat& Pp = P_p_[level - 1];
  for (int k = 0; k < Pphi.outerSize(); ++k)
    for (SpMat::InnerIterator it(Pphi, k); it; ++it)
      fine[it.row()] += it.value() * coarse[it.col()];
  const int co_u = cn.n_phi, fo_u = fn.n_phi;
  for (int k = 0; k < Pu.outerSize(); ++k)
    for (SpMat::InnerIterator it(Pu, k); it; ++it)
      for (int comp = 0; comp < 2; ++comp)
        fine[fo_u + 2 * it.row() + comp] += it.value() * coarse[co_u + 2 * it.col() + comp];
  const int co_p = cn.n_phi + cn.n_u(), fo_p = fn.n_phi + fn.n_u();
  for (int k = 0; k < Pp.outerSize(); ++k)
    for (SpMat::InnerIterator it(Pp, k); it; ++it)
      fine[fo_p + it.row()] += it.value() * coarse[co_p + it.col()];
  return fine;
}

Eigen::VectorXd MeshHierarchy::restrict_residual(int level, const Eigen::VectorXd& fine) const {
  if (level < 1 || level > depth()) throw ArgumentError("restrict: level out of range");
  const DofCounts cn = levels_[level - 1].dofs();
  const DofCounts fn = levels_[level].dofs();
  if (fine.size() != fn.total()) throw ArgumentError("restrict: fine vector size mismatch");
  Eigen::VectorXd coarse = Eigen::VectorXd::Zero(cn.total());
  const SpMat& Pphi = P_phi_[level - 1];
  const SpMat& Pu = P_u_[level - 1];
  const SpMat& Pp = P_p_[level - 1];
  for (int k = 0; k < Pphi.outerSize(); ++k)
    for (SpMat::InnerIterator it(Pphi, k); it; ++it)
      coarse[it.col()] += it.value() * fine[it.row()];
  const int co_u = cn.n_phi, fo_u = fn.n_phi;
  for (int k = 0; k < Pu.outerSize(); ++k)
    for (SpMat::InnerIterator it(Pu, k); it; ++it)
      for (int comp = 0; comp < 2; ++comp)
        coarse[co_u + 2 * it.col() + comp] += it.value() * fine[fo_u + 2 * it.row() + comp];
  const int co_p = cn.n_phi + cn.n_u(), fo_p = fn.n_phi + fn.n_u();
  for (int k = 0; k < Pp.outerSize(); ++k)
    for (SpMat::InnerIterator it(Pp, k); it; ++it)
      coarse[co_p + it.col()] += it.value() * fine[fo_p + it.row()];
  return coarse;
}

SpMat MeshHierarchy::stacked_prolongation(int level) const {
  if (level < 1 || level > depth()) throw ArgumentError("stacked_prolongation: level out of range");
  const DofCounts cn = levels_[level - 1].dofs();
  const DofCounts fn = levels_[level].dofs();
  std::vector<Eigen::Triplet<double>> trips;
  const SpMat& Pphi = P_phi_[level - 1];
  const SpMat& Pu = P_u_[level - 1];
  const SpMat& Pp = P_p_[level - 1];
  for (int k = 0; k < Pphi.outerSize(); ++k)
    for (SpMat::InnerIterator it(Pphi, k); it; ++it)
      trips.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < Pu.outerSize(); ++k)
    for (SpMat::InnerIterator it(Pu, k); it; ++it)
      for (int comp = 0; comp < 2; ++comp)
        trips.emplace_back(fn.n_phi + 2 * it.row() + comp, cn.n_phi + 2 * it.col() + comp,
                           it.value());
  for (int k = 0; k < Pp.outerSize(); ++k)
    for (SpMat::InnerIterator it(Pp, k); it; ++it)
      trips.emplace_back(fn.n_phi + fn.n_u() + it.row(), cn.n_phi + cn.n_u() + it.col(),
                         it.value());
  SpMat P(fn.total(), cn.total());
  P.setFromTriplets(trips.begin(), trips.end());
  return P;
}

SpMat MeshHierarchy::restriction_matrix(int level) const {
  SpMat R = SpMat(stacked_prolongation(level).transpose());
  R *= 1.0 / (static_cast<double>(ch_) * ch_);
  return R;
}

MeshHierarchy build_hierarchy(const DomainSpec& dom, double h0, int ch, int L) {
  return MeshHierarchy(dom, h0, ch, L);
}

void export_mesh(const MeshLevel& level, std::ostream& os) {
  os << "# vertices " << level.vertices().size() << "\n";
  for (std::size_t i = 0; i < level.vertices().size(); ++i)
    os << i << " " << level.vertices()[i].x << " " << level.vertices()[i].y << "\n";
  os << "# triangles " << level.tris().size() << "\n";
  for (std::size_t t = 0; t < level.tris().size(); ++t) {
    const Triangle& tr = level.tris()[t];
    os << t << " " << tr.v[0] << " " << tr.v[1] << " " << tr.v[2] << " "
       << (tr.sub == Subdomain::porous ? "porous" : "conduit") << "\n";
  }
  os << "# interface_edges " << level.interface_edges().size() << "\n";
  for (std::size_t e = 0; e < level.interface_edges().size(); ++e) {
    const InterfaceEdge& ie = level.interface_edges()[e];
    os << e << " " << ie.v_left << " " << ie.v_right << " " << ie.tri_porous << " "
       << ie.tri_conduit << "\n";
  }
}

}  // namespace sdmlmc
