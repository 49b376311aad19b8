#include "sdmlmc/randfield.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include "sdmlmc/errors.hpp"

namespace sdmlmc {

double exp_covariance(const CovarianceParams& cp, const Vec2& a, const Vec2& b) {
  return cp.variance *
         std::exp(-std::fabs(a.x - b.x) / cp.len_x - std::fabs(a.y - b.y) / cp.len_y);
}

Eigen::MatrixXd covariance_matrix(const CovarianceParams& cp, const std::vector<Vec2>& pts) {
  const int n = static_cast<int>(pts.size());
  Eigen::MatrixXd R(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) R(i, j) = exp_covariance(cp, pts[i], pts[j]);
  return R;
}

PointSet::PointSet(const MeshHierarchy& hier) {
  std::map<std::pair<double, double>, int> seen;
  auto intern = [&](const Vec2& p) {
    const auto key = std::make_pair(p.x, p.y);
    const auto it = seen.find(key);
    if (it != seen.end()) return it->second;
    const int id = static_cast<int>(pts_.size());
    pts_.push_back(p);
    seen.emplace(key, id);
    return id;
  };
  for (int l = 0; l <= hier.depth(); ++l) {
    const MeshLevel& m = hier.level(l);
    std::vector<int> tri_ids;
    tri_ids.reserve(m.porous_tris().size() * 7);
    for (const Vec2& p : m.porous_quad_points()) tri_ids.push_back(intern(p));
    std::vector<int> edge_ids;
    edge_ids.reserve(m.interface_edges().size() * 3);
    for (const Vec2& p : m.interface_quad_points()) edge_ids.push_back(intern(p));
    tri_idx_.push_back(std::move(tri_ids));
    edge_idx_.push_back(std::move(edge_ids));
    prefix_.push_back(static_cast<int>(pts_.size()));
  }
}

FieldSampler::FieldSampler(const PointSet& ps, const CovarianceParams& cp) : cp_(cp) {
  const Eigen::MatrixXd R = covariance_matrix(cp, ps.points());
  const int n = static_cast<int>(R.rows());
  const double base = std::numeric_limits<double>::epsilon() * R.trace() / std::max(n, 1);
  double jitter = 0.0;
  for (int attempt = 0; attempt <= 10; ++attempt) {
    Eigen::MatrixXd A = R;
    if (jitter > 0.0) A.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) {
      L_ = llt.matrixL();
      jitter_ = jitter;
      return;
    }
    jitter = (attempt == 0) ? base : jitter * 10.0;
  }
  throw IndefiniteCovarianceError(
      "covariance matrix not positive definite after jitter escalation");
}

Eigen::VectorXd FieldSampler::sample_log(std::uint64_t seed, std::uint64_t index, int n) const {
  if (n < 0 || n > L_.rows()) throw ArgumentError("sample_log: prefix length out of range");
  const std::uint64_t s = rng::derive_seed(seed, 1, index);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = rng::standard_normal(s, static_cast<std::uint64_t>(i));
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  // lower-triangular factor: entry i only touches y[0..i], so a prefix draw
  // matches the corresponding entries of a full draw exactly
  z.noalias() = L_.topLeftCorner(n, n).triangularView<Eigen::Lower>() * y;
  return z;
}

FieldRealization realize(const PointSet& ps, const FieldSampler& fs, std::uint64_t seed,
                         std::uint64_t index, int level) {
  const int n = ps.prefix_size(level);
  FieldRealization f;
  f.ps = &ps;
  f.k = fs.sample_log(seed, index, n);
  const double m = fs.params().mean_log;
  for (int i = 0; i < n; ++i) f.k[i] = std::exp(m + f.k[i]);
  return f;
}

FieldRealization constant_field(const PointSet& ps, double k0) {
  FieldRealization f;
  f.ps = &ps;
  f.k = Eigen::VectorXd::Constant(ps.size(), k0);
  return f;
}

void export_field(const FieldRealization& f, std::ostream& os) {
  os << "x,y,k\n";
  os.precision(17);
  for (int i = 0; i < f.k.size(); ++i)
    os << f.ps->points()[i].x << "," << f.ps->points()[i].y << "," << f.k[i] << "\n";
}

}  // namespace sdmlmc
