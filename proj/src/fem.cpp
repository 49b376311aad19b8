#include "sdmlmc/fem.hpp"

#include <cmath>
#include <ostream>
#include <vector>

#include "sdmlmc/errors.hpp"

namespace sdmlmc {

namespace {

using Trip = Eigen::Triplet<double>;

// Barycentric machinery of one counterclockwise triangle:
// lambda_i(p) = (a_i + b_i x + c_i y) / (2 area).
struct TriGeom {
  double twoA;
  double a[3], b[3], c[3];

  TriGeom(const Vec2& v0, const Vec2& v1, const Vec2& v2) {
    const Vec2 v[3] = {v0, v1, v2};
    for (int i = 0; i < 3; ++i) {
      const Vec2& vj = v[(i + 1) % 3];
      const Vec2& vk = v[(i + 2) % 3];
      a[i] = vj.x * vk.y - vk.x * vj.y;
      b[i] = vj.y - vk.y;
      c[i] = vk.x - vj.x;
    }
    twoA = (v1.x - v0.x) * (v2.y - v0.y) - (v2.x - v0.x) * (v1.y - v0.y);
    if (twoA <= 0.0) throw AssemblyError("triangle is not counterclockwise");
  }

  void bary(const Vec2& p, double l[3]) const {
    for (int i = 0; i < 3; ++i) l[i] = (a[i] + b[i] * p.x + c[i] * p.y) / twoA;
  }
};

// Quadratic shapes and gradients at barycentric l, local nodes ordered
// [v0 v1 v2 m01 m12 m20] to match MeshLevel::p2_nodes.
void p2_eval(const TriGeom& G, const double l[3], double N[6], double dN[6][2]) {
  double gl[3][2];
  for (int i = 0; i < 3; ++i) {
    gl[i][0] = G.b[i] / G.twoA;
    gl[i][1] = G.c[i] / G.twoA;
  }
  for (int i = 0; i < 3; ++i) {
    N[i] = l[i] * (2.0 * l[i] - 1.0);
    dN[i][0] = (4.0 * l[i] - 1.0) * gl[i][0];
    dN[i][1] = (4.0 * l[i] - 1.0) * gl[i][1];
  }
  const int e[3][2] = {{0, 1}, {1, 2}, {2, 0}};
  for (int m = 0; m < 3; ++m) {
    const int i = e[m][0], j = e[m][1];
    N[3 + m] = 4.0 * l[i] * l[j];
    dN[3 + m][0] = 4.0 * (l[j] * gl[i][0] + l[i] * gl[j][0]);
    dN[3 + m][1] = 4.0 * (l[j] * gl[i][1] + l[i] * gl[j][1]);
  }
}

// 1d quadratic trace shapes on an interface edge, t in [0,1] left to right,
// nodes ordered [left, mid, right].
void trace_eval(double t, double N[3], double dNdt[3]) {
  N[0] = (1.0 - t) * (1.0 - 2.0 * t);
  N[1] = 4.0 * t * (1.0 - t);
  N[2] = t * (2.0 * t - 1.0);
  dNdt[0] = 4.0 * t - 3.0;
  dNdt[1] = 4.0 - 8.0 * t;
  dNdt[2] = 4.0 * t - 1.0;
}

}  // namespace

Eigen::VectorXd BlockSystem::rhs() const {
  Eigen::VectorXd b(nd.total());
  b << b_phi, b_u, b_p;
  return b;
}

SpMat BlockSystem::full_matrix() const {
  std::vector<Trip> trips;
  const int ou = nd.n_phi;
  const int op = nd.n_phi + nd.n_u();
  auto add = [&trips](const SpMat& M, int ro, int co) {
    for (int k = 0; k < M.outerSize(); ++k)
      for (SpMat::InnerIterator it(M, k); it; ++it)
        trips.emplace_back(ro + it.row(), co + it.col(), it.value());
  };
  add(A_m, 0, 0);
  add(B1, 0, ou);
  add(B2, ou, 0);
  add(A_s, ou, ou);
  add(Bp_prime, ou, op);
  add(B_p, op, ou);
  if (C.rows() > 0) add(C, op, op);
  SpMat L(nd.total(), nd.total());
  L.setFromTriplets(trips.begin(), trips.end());
  return L;
}

BlockSystem assemble(const MeshLevel& mesh, const FieldRealization& field, int level,
                     const PhysicalParams& pp, const Forcing& fo, const BoundaryData& bd,
                     bool apply_dirichlet) {
  BlockSystem S;
  S.nd = mesh.dofs();
  const int n_phi = S.nd.n_phi, n_u = S.nd.n_u(), n_p = S.nd.n_p;
  S.b_phi = Eigen::VectorXd::Zero(n_phi);
  S.b_u = Eigen::VectorXd::Zero(n_u);
  S.b_p = Eigen::VectorXd::Zero(n_p);

  std::vector<Trip> am, as, b1, b2, bp;

  // ---- porous volume: g K grad(phi) . grad(psi) and the porous forcing ----
  const auto& ptris = mesh.porous_tris();
  for (int ord = 0; ord < static_cast<int>(ptris.size()); ++ord) {
    const Triangle& t = mesh.tris()[ptris[ord]];
    const Vec2& v0 = mesh.vertices()[t.v[0]];
    const Vec2& v1 = mesh.vertices()[t.v[1]];
    const Vec2& v2 = mesh.vertices()[t.v[2]];
    const TriGeom G(v0, v1, v2);
    const auto nodes = mesh.p2_nodes(t);
    int dof[6];
    for (int k = 0; k < 6; ++k) dof[k] = mesh.phi_dof(nodes[k].first, nodes[k].second);
    const auto quad = triangle_quadrature(v0, v1, v2);
    for (int q = 0; q < 7; ++q) {
      const double k = field.at_tri(level, ord, q);
      const double w = quad[q].w;
      double l[3], N[6], dN[6][2];
      G.bary(quad[q].p, l);
      p2_eval(G, l, N, dN);
      const double fm = fo.f_m(quad[q].p);
      for (int ia = 0; ia < 6; ++ia) {
        S.b_phi[dof[ia]] += pp.g * fm * N[ia] * w;
        for (int ib = 0; ib < 6; ++ib)
          am.emplace_back(dof[ia], dof[ib],
                          pp.g * k * (dN[ia][0] * dN[ib][0] + dN[ia][1] * dN[ib][1]) * w);
      }
    }
  }

  // ---- conduit volume: viscous term, divergence coupling, body force ------
  for (const Triangle& t : mesh.tris()) {
    if (t.sub != Subdomain::conduit) continue;
    const Vec2& v0 = mesh.vertices()[t.v[0]];
    const Vec2& v1 = mesh.vertices()[t.v[1]];
    const Vec2& v2 = mesh.vertices()[t.v[2]];
    const TriGeom G(v0, v1, v2);
    const auto nodes = mesh.p2_nodes(t);
    int un[6];
    for (int k = 0; k < 6; ++k) un[k] = mesh.u_node(nodes[k].first, nodes[k].second);
    // conduit vertex ids coincide with linear pressure dofs
    const int pd[3] = {t.v[0], t.v[1], t.v[2]};
    const auto quad = triangle_quadrature(v0, v1, v2);
    for (int q = 0; q < 7; ++q) {
      const double w = quad[q].w;
      double l[3], N[6], dN[6][2];
      G.bary(quad[q].p, l);
      p2_eval(G, l, N, dN);
      const Vec2 fs = fo.f_s(quad[q].p);
      for (int ia = 0; ia < 6; ++ia) {
        S.b_u[2 * un[ia]] += fs.x * N[ia] * w;
        S.b_u[2 * un[ia] + 1] += fs.y * N[ia] * w;
        const double dax = dN[ia][0], day = dN[ia][1];
        for (int ib = 0; ib < 6; ++ib) {
          const double dbx = dN[ib][0], dby = dN[ib][1];
          // 2 nu D(u):D(v) expanded per component pair
          as.emplace_back(2 * un[ia], 2 * un[ib], pp.nu * (2.0 * dax * dbx + day * dby) * w);
          as.emplace_back(2 * un[ia], 2 * un[ib] + 1, pp.nu * day * dbx * w);
          as.emplace_back(2 * un[ia] + 1, 2 * un[ib], pp.nu * dax * dby * w);
          as.emplace_back(2 * un[ia] + 1, 2 * un[ib] + 1,
                          pp.nu * (2.0 * day * dby + dax * dbx) * w);
        }
        for (int j = 0; j < 3; ++j) {
          bp.emplace_back(2 * un[ia], pd[j], l[j] * dN[ia][0] * w);
          bp.emplace_back(2 * un[ia] + 1, pd[j], l[j] * dN[ia][1] * w);
        }
      }
    }
  }

  // ---- interface terms ----------------------------------------------------
  const int hj_if = 2 * mesh.ny_s();
  for (int e = 0; e < static_cast<int>(mesh.interface_edges().size()); ++e) {
    const InterfaceEdge& ie = mesh.interface_edges()[e];
    const Vec2 vl = mesh.vertices()[ie.v_left];
    const Vec2 vr = mesh.vertices()[ie.v_right];
    const double he = vr.x - vl.x;
    const int hi0 = 2 * e;
    const int pd[3] = {mesh.phi_dof(hi0, hj_if), mesh.phi_dof(hi0 + 1, hj_if),
                       mesh.phi_dof(hi0 + 2, hj_if)};
    const int un[3] = {mesh.u_node(hi0, hj_if), mesh.u_node(hi0 + 1, hj_if),
                       mesh.u_node(hi0 + 2, hj_if)};
    const auto quad = segment_quadrature(vl, vr);
    for (int q = 0; q < 3; ++q) {
      const double K = field.at_edge(level, e, q);
      const double wq = quad[q].w;
      const double t = (quad[q].p.x - vl.x) / he;
      double N[3], dNdt[3];
      trace_eval(t, N, dNdt);
      // friction weight alpha nu sqrt(d) / sqrt(trace Pi), Pi = K nu / g
      const double wc = pp.alpha * std::sqrt(pp.nu * pp.g / K);
      for (int ia = 0; ia < 3; ++ia) {
        // elevation forcing g z v . n_s
        S.b_u[2 * un[ia] + 1] += pp.g * pp.z * N[ia] * wq;
        for (int ib = 0; ib < 3; ++ib) {
          as.emplace_back(2 * un[ia], 2 * un[ib], wc * N[ia] * N[ib] * wq);
          b1.emplace_back(pd[ia], 2 * un[ib] + 1, -pp.g * N[ia] * N[ib] * wq);
          b2.emplace_back(2 * un[ia] + 1, pd[ib], pp.g * N[ia] * N[ib] * wq);
          // tangential part of K grad(phi) reduces to the trace derivative
          b2.emplace_back(2 * un[ia], pd[ib], wc * K * (dNdt[ib] / he) * N[ia] * wq);
        }
      }
    }
  }

  // ---- Dirichlet data -----------------------------------------------------
  S.phi_fixed.assign(n_phi, 0);
  S.u_fixed.assign(S.nd.n_u_nodes, 0);
  Eigen::VectorXd phi_val = Eigen::VectorXd::Zero(n_phi);
  Eigen::VectorXd u_val = Eigen::VectorXd::Zero(n_u);
  for (int d = 0; d < n_phi; ++d) {
    if (mesh.phi_node_tag(d) != BoundaryTag::gamma_m) continue;
    S.phi_fixed[d] = 1;
    phi_val[d] = bd.phi(mesh.phi_node_pos(d));
  }
  for (int nd_ = 0; nd_ < S.nd.n_u_nodes; ++nd_) {
    const BoundaryTag tag = mesh.u_node_tag(nd_);
    if (tag != BoundaryTag::gamma_s1 && tag != BoundaryTag::gamma_s2 &&
        tag != BoundaryTag::gamma_s3)
      continue;
    S.u_fixed[nd_] = 1;
    const Vec2 val = bd.u(mesh.u_node_pos(nd_), tag);
    u_val[2 * nd_] = val.x;
    u_val[2 * nd_ + 1] = val.y;
  }

  auto ufix = [&S](int dof) { return S.u_fixed[dof / 2] != 0; };

  if (apply_dirichlet) {
    std::vector<Trip> am2, as2, b12, b22, bp2;
    for (const Trip& tr : am) {
      if (S.phi_fixed[tr.row()]) continue;
      if (S.phi_fixed[tr.col()]) {
        S.b_phi[tr.row()] -= tr.value() * phi_val[tr.col()];
        continue;
      }
      am2.push_back(tr);
    }
    for (const Trip& tr : b1) {
      if (S.phi_fixed[tr.row()]) continue;
      if (ufix(tr.col())) {
        S.b_phi[tr.row()] -= tr.value() * u_val[tr.col()];
        continue;
      }
      b12.push_back(tr);
    }
    for (const Trip& tr : as) {
      if (ufix(tr.row())) continue;
      if (ufix(tr.col())) {
        S.b_u[tr.row()] -= tr.value() * u_val[tr.col()];
        continue;
      }
      as2.push_back(tr);
    }
    for (const Trip& tr : b2) {
      if (ufix(tr.row())) continue;
      if (S.phi_fixed[tr.col()]) {
        S.b_u[tr.row()] -= tr.value() * phi_val[tr.col()];
        continue;
      }
      b22.push_back(tr);
    }
    for (const Trip& tr : bp) {
      if (ufix(tr.row())) {
        // transposed block: the fixed velocity lifts into the mass equation
        S.b_p[tr.col()] -= tr.value() * u_val[tr.row()];
        continue;
      }
      bp2.push_back(tr);
    }
    for (int d = 0; d < n_phi; ++d)
      if (S.phi_fixed[d]) {
        am2.emplace_back(d, d, 1.0);
        S.b_phi[d] = phi_val[d];
      }
    for (int d = 0; d < n_u; ++d)
      if (ufix(d)) {
        as2.emplace_back(d, d, 1.0);
        S.b_u[d] = u_val[d];
      }
    am.swap(am2);
    as.swap(as2);
    b1.swap(b12);
    b2.swap(b22);
    bp.swap(bp2);
  }

  S.A_m.resize(n_phi, n_phi);
  S.A_m.setFromTriplets(am.begin(), am.end());
  S.A_s.resize(n_u, n_u);
  S.A_s.setFromTriplets(as.begin(), as.end());
  S.B1.resize(n_phi, n_u);
  S.B1.setFromTriplets(b1.begin(), b1.end());
  S.B2.resize(n_u, n_phi);
  S.B2.setFromTriplets(b2.begin(), b2.end());
  S.Bp_prime.resize(n_u, n_p);
  S.Bp_prime.setFromTriplets(bp.begin(), bp.end());
  S.B_p = SpMat(S.Bp_prime.transpose());
  S.C.resize(n_p, n_p);
  return S;
}

void pin_pressure(BlockSystem& sys) {
  if (sys.pinned) return;
  // remove pressure dof 0 from the coupling and add the equation p_0 = 0
  sys.Bp_prime.prune([](int, int col, double) { return col != 0; });
  sys.B_p.prune([](int row, int, double) { return row != 0; });
  std::vector<Trip> c = {{0, 0, 1.0}};
  sys.C.setFromTriplets(c.begin(), c.end());
  sys.b_p[0] = 0.0;
  sys.pinned = true;
}

namespace {

NormTriple quad_norms(const MeshLevel& mesh, const Eigen::VectorXd& vals, bool porous,
                      int ncomp) {
  NormTriple n;
  double l2sq = 0.0, h1semi = 0.0;
  for (const Triangle& t : mesh.tris()) {
    if ((t.sub == Subdomain::porous) != porous) continue;
    const Vec2& v0 = mesh.vertices()[t.v[0]];
    const Vec2& v1 = mesh.vertices()[t.v[1]];
    const Vec2& v2 = mesh.vertices()[t.v[2]];
    const TriGeom G(v0, v1, v2);
    const auto nodes = mesh.p2_nodes(t);
    int dof[6];
    for (int k = 0; k < 6; ++k)
      dof[k] = porous ? mesh.phi_dof(nodes[k].first, nodes[k].second)
                      : mesh.u_node(nodes[k].first, nodes[k].second);
    const auto quad = triangle_quadrature(v0, v1, v2);
    for (int q = 0; q < 7; ++q) {
      double l[3], N[6], dN[6][2];
      G.bary(quad[q].p, l);
      p2_eval(G, l, N, dN);
      for (int comp = 0; comp < ncomp; ++comp) {
        double val = 0.0, gx = 0.0, gy = 0.0;
        for (int k = 0; k < 6; ++k) {
          const double c = vals[ncomp * dof[k] + comp];
          val += c * N[k];
          gx += c * dN[k][0];
          gy += c * dN[k][1];
        }
        l2sq += val * val * quad[q].w;
        h1semi += (gx * gx + gy * gy) * quad[q].w;
      }
    }
  }
  n.l2 = std::sqrt(l2sq);
  n.h1 = std::sqrt(l2sq + h1semi);
  n.linf = vals.size() ? vals.cwiseAbs().maxCoeff() : 0.0;
  return n;
}

}  // namespace

NormTriple phi_norms(const MeshLevel& mesh, const Eigen::VectorXd& phi) {
  return quad_norms(mesh, phi, true, 1);
}

NormTriple u_norms(const MeshLevel& mesh, const Eigen::VectorXd& u) {
  return quad_norms(mesh, u, false, 2);
}

NormTriple p_norms(const MeshLevel& mesh, const Eigen::VectorXd& p) {
  NormTriple n;
  double l2sq = 0.0, h1semi = 0.0;
  for (const Triangle& t : mesh.tris()) {
    if (t.sub != Subdomain::conduit) continue;
    const Vec2& v0 = mesh.vertices()[t.v[0]];
    const Vec2& v1 = mesh.vertices()[t.v[1]];
    const Vec2& v2 = mesh.vertices()[t.v[2]];
    const TriGeom G(v0, v1, v2);
    const auto quad = triangle_quadrature(v0, v1, v2);
    for (int q = 0; q < 7; ++q) {
      double l[3];
      G.bary(quad[q].p, l);
      double val = 0.0, gx = 0.0, gy = 0.0;
      for (int k = 0; k < 3; ++k) {
        const double c = p[t.v[k]];
        val += c * l[k];
        gx += c * G.b[k] / G.twoA;
        gy += c * G.c[k] / G.twoA;
      }
      l2sq += val * val * quad[q].w;
      h1semi += (gx * gx + gy * gy) * quad[q].w;
    }
  }
  n.l2 = std::sqrt(l2sq);
  n.h1 = std::sqrt(l2sq + h1semi);
  n.linf = p.size() ? p.cwiseAbs().maxCoeff() : 0.0;
  return n;
}

double discrete_divergence(const BlockSystem& sys, const Eigen::VectorXd& u) {
  return (sys.B_p * u - sys.b_p).norm();
}

Eigen::VectorXd phi_part(const DofCounts& nd, const Eigen::VectorXd& x) {
  return x.segment(0, nd.n_phi);
}

Eigen::VectorXd u_part(const DofCounts& nd, const Eigen::VectorXd& x) {
  return x.segment(nd.n_phi, nd.n_u());
}

Eigen::VectorXd p_part(const DofCounts& nd, const Eigen::VectorXd& x) {
  return x.segment(nd.n_phi + nd.n_u(), nd.n_p);
}

void export_matrix(const SpMat& A, std::ostream& os) {
  os.precision(17);
  os << A.rows() << " " << A.cols() << " " << A.nonZeros() << "\n";
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it)
      os << it.row() << " " << it.col() << " " << it.value() << "\n";
}

DarcySystem assemble_darcy(const MeshLevel& mesh, const FieldRealization& field, int level,
                           double g, const std::function<double(const Vec2&)>& f) {
  DarcySystem S;
  const int n = mesh.dofs().n_phi;
  S.b = Eigen::VectorXd::Zero(n);
  S.fixed.assign(n, 0);
  for (int d = 0; d < n; ++d)
    if (mesh.phi_node_tag(d) != BoundaryTag::interior) S.fixed[d] = 1;

  std::vector<Trip> trips;
  const auto& ptris = mesh.porous_tris();
  for (int ord = 0; ord < static_cast<int>(ptris.size()); ++ord) {
    const Triangle& t = mesh.tris()[ptris[ord]];
    const Vec2& v0 = mesh.vertices()[t.v[0]];
    const Vec2& v1 = mesh.vertices()[t.v[1]];
    const Vec2& v2 = mesh.vertices()[t.v[2]];
    const TriGeom G(v0, v1, v2);
    const auto nodes = mesh.p2_nodes(t);
    int dof[6];
    for (int k = 0; k < 6; ++k) dof[k] = mesh.phi_dof(nodes[k].first, nodes[k].second);
    const auto quad = triangle_quadrature(v0, v1, v2);
    for (int q = 0; q < 7; ++q) {
      const double kq = field.at_tri(level, ord, q);
      const double w = quad[q].w;
      double l[3], N[6], dN[6][2];
      G.bary(quad[q].p, l);
      p2_eval(G, l, N, dN);
      const double fq = f(quad[q].p);
      for (int ia = 0; ia < 6; ++ia) {
        if (!S.fixed[dof[ia]]) S.b[dof[ia]] += g * fq * N[ia] * w;
        if (S.fixed[dof[ia]]) continue;
        for (int ib = 0; ib < 6; ++ib) {
          if (S.fixed[dof[ib]]) continue;  // homogeneous data: nothing to lift
          trips.emplace_back(dof[ia], dof[ib],
                             g * kq * (dN[ia][0] * dN[ib][0] + dN[ia][1] * dN[ib][1]) * w);
        }
      }
    }
  }
  for (int d = 0; d < n; ++d)
    if (S.fixed[d]) trips.emplace_back(d, d, 1.0);
  S.A.resize(n, n);
  S.A.setFromTriplets(trips.begin(), trips.end());
  return S;
}

}  // namespace sdmlmc
