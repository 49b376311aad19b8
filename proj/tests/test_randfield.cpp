#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sdmlmc/randfield.hpp"

using namespace sdmlmc;

TEST_CASE("covariance kernel matches hand-computed values") {
  CovarianceParams cp;
  CHECK(exp_covariance(cp, {0.3, 0.5}, {0.3, 0.5}) == doctest::Approx(0.1).epsilon(1e-15));
  // one correlation length apart in x: 0.1 * e^{-1}
  CHECK(exp_covariance(cp, {0.1, 0.5}, {0.3, 0.5}) ==
        doctest::Approx(0.036787944117144235).epsilon(1e-14));
  // separable: offsets in both coordinates multiply
  CHECK(exp_covariance(cp, {0.0, 0.0}, {0.2, 0.1}) ==
        doctest::Approx(0.1 * std::exp(-1.0) * std::exp(-0.5)).epsilon(1e-14));
}

TEST_CASE("covariance matrix of a crafted pair and its hand Cholesky factor") {
  CovarianceParams cp;
  const double dx = cp.len_x * std::log(2.0);  // makes the correlation exactly 1/2
  const std::vector<Vec2> pts = {{0.3, 0.5}, {0.3 + dx, 0.5}};
  const Eigen::MatrixXd R = covariance_matrix(cp, pts);
  CHECK(R(0, 0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(R(0, 1) == doctest::Approx(0.05).epsilon(1e-14));
  CHECK(R(1, 0) == doctest::Approx(0.05).epsilon(1e-14));
  // hand factor: L = sqrt(0.1) * [[1, 0], [1/2, sqrt(3)/2]]
  const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(R).matrixL();
  const double s = std::sqrt(0.1);
  CHECK(L(0, 0) == doctest::Approx(s).epsilon(1e-14));
  CHECK(L(1, 0) == doctest::Approx(0.5 * s).epsilon(1e-13));
  CHECK(L(1, 1) == doctest::Approx(std::sqrt(0.75) * s).epsilon(1e-13));
  CHECK(L(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("point set orders levels as contiguous prefixes") {
  const MeshHierarchy hier = build_hierarchy({}, 0.25, 2, 1);
  const PointSet ps(hier);
  CHECK(ps.prefix_size(0) == 24 * 7 + 4 * 3);
  CHECK(ps.prefix_size(1) >= ps.prefix_size(0));
  CHECK(ps.prefix_size(1) == ps.size());

  // level-0 entities only reference the level-0 prefix, level-1 the full set
  const MeshLevel& m0 = hier.level(0);
  const auto tq0 = m0.porous_quad_points();
  for (int t = 0; t < static_cast<int>(m0.porous_tris().size()); ++t)
    for (int q = 0; q < 7; ++q) {
      const int id = ps.tri_point(0, t, q);
      CHECK(id < ps.prefix_size(0));
      CHECK(ps.points()[id].x == doctest::Approx(tq0[t * 7 + q].x).epsilon(1e-15));
      CHECK(ps.points()[id].y == doctest::Approx(tq0[t * 7 + q].y).epsilon(1e-15));
    }
  const MeshLevel& m1 = hier.level(1);
  const auto eq1 = m1.interface_quad_points();
  for (int e = 0; e < static_cast<int>(m1.interface_edges().size()); ++e)
    for (int q = 0; q < 3; ++q) {
      const int id = ps.edge_point(1, e, q);
      CHECK(id < ps.prefix_size(1));
      CHECK(ps.points()[id].x == doctest::Approx(eq1[e * 3 + q].x).epsilon(1e-15));
      CHECK(ps.points()[id].y == doctest::Approx(0.0));
    }
}

TEST_CASE("cholesky factor reproduces the covariance matrix") {
  const MeshHierarchy hier = build_hierarchy({}, 0.25, 2, 1);
  const PointSet ps(hier);
  CovarianceParams cp;
  const FieldSampler fs(ps, cp);
  const Eigen::MatrixXd R = covariance_matrix(cp, ps.points());
  const Eigen::MatrixXd& L = fs.cholesky_factor();
  const double err = (L * L.transpose() - R).cwiseAbs().maxCoeff();
  CHECK(err <= 1e-10 * cp.variance + fs.jitter());
}

TEST_CASE("prefix draws are bit-identical to truncated full draws") {
  const MeshHierarchy hier = build_hierarchy({}, 0.25, 2, 1);
  const PointSet ps(hier);
  const FieldSampler fs(ps, CovarianceParams{});
  const int n0 = ps.prefix_size(0);
  const Eigen::VectorXd full = fs.sample_log(2024, 17, ps.size());
  const Eigen::VectorXd pre = fs.sample_log(2024, 17, n0);
  for (int i = 0; i < n0; ++i) CHECK(pre[i] == full[i]);  // exact equality
}

TEST_CASE("draws are deterministic in (seed, index) and differ across indices") {
  const MeshHierarchy hier = build_hierarchy({}, 0.25, 2, 0);
  const PointSet ps(hier);
  const FieldSampler fs(ps, CovarianceParams{});
  const Eigen::VectorXd a = fs.sample_log(5, 0, ps.size());
  const Eigen::VectorXd b = fs.sample_log(5, 0, ps.size());
  const Eigen::VectorXd c = fs.sample_log(5, 1, ps.size());
  const Eigen::VectorXd d = fs.sample_log(6, 0, ps.size());
  CHECK((a - b).norm() == 0.0);
  CHECK((a - c).norm() > 0.0);
  CHECK((a - d).norm() > 0.0);
}

TEST_CASE("sample moments match the target law") {
  const MeshHierarchy hier = build_hierarchy({}, 0.25, 2, 0);
  const PointSet ps(hier);
  CovarianceParams cp;
  const FieldSampler fs(ps, cp);
  const int n = ps.size();
  const int N = 10000;
  // track two master points with a known covariance
  const int i0 = 0, i1 = n / 2;
  const double r01 = exp_covariance(cp, ps.points()[i0], ps.points()[i1]);
  double s0 = 0, s1 = 0, s00 = 0, s11 = 0, s01 = 0, sk = 0;
  for (int j = 0; j < N; ++j) {
    const Eigen::VectorXd z = fs.sample_log(77, j, n);
    s0 += z[i0];
    s1 += z[i1];
    s00 += z[i0] * z[i0];
    s11 += z[i1] * z[i1];
    s01 += z[i0] * z[i1];
    sk += std::exp(z[i0]);
  }
  const double m0 = s0 / N, m1 = s1 / N;
  CHECK(std::fabs(m0) < 0.02);
  CHECK(std::fabs(m1) < 0.02);
  CHECK(std::fabs(s00 / N - m0 * m0 - cp.variance) < 5e-3);
  CHECK(std::fabs(s11 / N - m1 * m1 - cp.variance) < 5e-3);
  CHECK(std::fabs(s01 / N - m0 * m1 - r01) < 5e-3);
  // lognormal mean of K = exp(variance / 2)
  CHECK(std::fabs(sk / N - std::exp(0.5 * cp.variance)) < 1e-2);
}

TEST_CASE("realizations expose conductivity at quadrature points") {
  const MeshHierarchy hier = build_hierarchy({}, 0.25, 2, 1);
  const PointSet ps(hier);
  const FieldSampler fs(ps, CovarianceParams{});
  const FieldRealization f = realize(ps, fs, 9, 3, 1);
  CHECK(f.k.size() == ps.prefix_size(1));
  for (int i = 0; i < f.k.size(); ++i) CHECK(f.k[i] > 0.0);
  // the accessor agrees with the raw array
  CHECK(f.at_tri(0, 5, 2) == f.k[ps.tri_point(0, 5, 2)]);
  CHECK(f.at_edge(1, 3, 1) == f.k[ps.edge_point(1, 3, 1)]);

  const FieldRealization one = constant_field(ps, 1.0);
  CHECK(one.at_tri(1, 0, 0) == 1.0);
  CHECK(one.at_edge(0, 0, 0) == 1.0);
}
