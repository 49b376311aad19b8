#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "sdmlmc/mesh.hpp"
#include "sdmlmc/rng.hpp"

namespace sdmlmc {

// Separable exponential covariance of the log-conductivity,
// r(x,y) = variance * exp(-|x1-y1|/len_x - |x2-y2|/len_y).
struct CovarianceParams {
  double variance = 0.1;
  double len_x = 0.2;
  double len_y = 0.2;
  double mean_log = 0.0;  // mean of log K
};

double exp_covariance(const CovarianceParams& cp, const Vec2& a, const Vec2& b);

Eigen::MatrixXd covariance_matrix(const CovarianceParams& cp, const std::vector<Vec2>& pts);

// All evaluation points the solver ever needs from one hierarchy: the porous
// triangle quadrature points and the interface quadrature points of every
// level, deduplicated, ordered level-major so that levels 0..l occupy a
// contiguous prefix of the master array.
class PointSet {
 public:
  explicit PointSet(const MeshHierarchy& hier);

  int size() const { return static_cast<int>(pts_.size()); }
  int levels() const { return static_cast<int>(prefix_.size()); }
  // number of master points needed by levels 0..level
  int prefix_size(int level) const { return prefix_.at(level); }
  const std::vector<Vec2>& points() const { return pts_; }

  // master index of quadrature point q of the porous triangle with ordinal
  // `tri` (position in MeshLevel::porous_tris()) on `level`
  int tri_point(int level, int tri, int q) const { return tri_idx_.at(level)[tri * 7 + q]; }
  // master index of quadrature point q of interface edge `edge` on `level`
  int edge_point(int level, int edge, int q) const { return edge_idx_.at(level)[edge * 3 + q]; }

 private:
  std::vector<Vec2> pts_;
  std::vector<int> prefix_;
  std::vector<std::vector<int>> tri_idx_, edge_idx_;
};

// Joint sampler over the master point set: one dense Cholesky factor of the
// full covariance matrix. Because the factor is lower triangular and the
// ordering puts coarse levels first, a sample restricted to a prefix is
// bit-identical to the corresponding entries of the full sample.
class FieldSampler {
 public:
  FieldSampler(const PointSet& ps, const CovarianceParams& cp);

  const CovarianceParams& params() const { return cp_; }
  const Eigen::MatrixXd& cholesky_factor() const { return L_; }
  double jitter() const { return jitter_; }

  // log-conductivity at the first n master points for draw (seed, index)
  Eigen::VectorXd sample_log(std::uint64_t seed, std::uint64_t index, int n) const;

 private:
  CovarianceParams cp_;
  Eigen::MatrixXd L_;
  double jitter_ = 0.0;
};

// One realization of the conductivity K = exp(mean_log + Z) at a prefix of
// the master points.
struct FieldRealization {
  const PointSet* ps = nullptr;
  Eigen::VectorXd k;

  double at_tri(int level, int tri, int q) const { return k[ps->tri_point(level, tri, q)]; }
  double at_edge(int level, int edge, int q) const { return k[ps->edge_point(level, edge, q)]; }
};

// Sample a realization covering levels 0..level.
FieldRealization realize(const PointSet& ps, const FieldSampler& fs, std::uint64_t seed,
                         std::uint64_t index, int level);

// Deterministic K = k0 everywhere (all levels).
FieldRealization constant_field(const PointSet& ps, double k0);

// CSV dump "x,y,k" of the realized prefix.
void export_field(const FieldRealization& f, std::ostream& os);

}  // namespace sdmlmc
