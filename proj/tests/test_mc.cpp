#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "sdmlmc/mc.hpp"
#include "sdmlmc/rng.hpp"

using namespace sdmlmc;

namespace {

struct Setup {
  MeshHierarchy hier;
  PointSet ps;
  FieldSampler fs;
  CoupledSampler cs;

  explicit Setup(int L)
      : hier(build_hierarchy({}, 0.25, 2, L)), ps(hier), fs(ps, CovarianceParams{}),
        cs(hier, ps, fs) {}
};

NormTriple abs_norms(const Eigen::VectorXd& q) {
  const double a = std::abs(q[0]);
  return NormTriple{a, a, a};
}

// exhaustive three-level allocation oracle: cheapest integer counts meeting
// the error budget with every N <= cap
double cheapest_cost(const std::vector<double>& v, const std::vector<double>& C, double e,
                     long cap) {
  double best = std::numeric_limits<double>::infinity();
  for (long n0 = 1; n0 <= cap; ++n0)
    for (long n1 = 1; n1 <= cap; ++n1) {
      const double rem = e - v[0] / n0 - v[1] / n1;
      if (rem <= 0.0) continue;
      const long n2 = static_cast<long>(std::ceil(v[2] / rem - 1e-12));
      if (n2 < 1 || n2 > cap) continue;
      best = std::min(best, n0 * C[0] + n1 * C[1] + n2 * C[2]);
    }
  return best;
}

}  // namespace

TEST_CASE("sample allocation reproduces the hand-checked instance") {
  const std::vector<double> v{1.0, 0.25, 0.0625};
  const std::vector<double> C{1.0, 4.0, 16.0};
  const MlmcPlan plan = allocate(v, C, 3.0 / 16.0);
  REQUIRE(plan.N.size() == 3);
  CHECK(plan.N[0] == 16);
  CHECK(plan.N[1] == 4);
  CHECK(plan.N[2] == 1);
  CHECK(plan.predicted_error <= plan.e_L + 1e-15);
  // (sum sqrt(v C))^2 / e = (1 + 1 + 1)^2 / (3/16) = 48
  CHECK(plan.optimal_cost == doctest::Approx(48.0).epsilon(1e-14));
}

TEST_CASE("the pre-ceiling counts satisfy the stationarity ratios exactly") {
  const std::vector<double> v{0.7, 0.21, 0.004};
  const std::vector<double> C{2.0, 9.5, 44.0};
  const MlmcPlan plan = allocate(v, C, 0.05);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double ratio = plan.N_real[j] / plan.N_real[i];
      const double expect = std::sqrt(v[j] * C[i] / (v[i] * C[j]));
      CHECK(ratio == doctest::Approx(expect).epsilon(1e-13));
    }
  // the real-valued optimum meets the budget with equality
  double err = 0.0;
  for (int l = 0; l < 3; ++l) err += v[l] / plan.N_real[l];
  CHECK(err == doctest::Approx(plan.e_L).epsilon(1e-13));
}

TEST_CASE("the relaxed optimum is within one percent of the exhaustive integer search") {
  for (int t = 0; t < 5; ++t) {
    const std::uint64_t s = 900 + t;
    std::vector<double> v, C;
    double sum = 0.0, rmax = 0.0;
    for (int l = 0; l < 3; ++l) {
      v.push_back(0.5 + 0.5 * rng::uniform01(s, 2 * l));
      C.push_back(1.0 + rng::uniform01(s, 2 * l + 1));
      sum += std::sqrt(v[l] * C[l]);
      rmax = std::max(rmax, std::sqrt(v[l] / C[l]));
    }
    // budget chosen so the largest count lands just under the search cap
    const double e = rmax * sum / 199.0;
    const MlmcPlan plan = allocate(v, C, e);
    for (int l = 0; l < 3; ++l) REQUIRE(plan.N[l] <= 200);
    const double best = cheapest_cost(v, C, e, 200);
    CHECK(plan.optimal_cost <= best * (1.0 + 1e-12));
    CHECK(best - plan.optimal_cost <= 0.01 * best);
  }
}

TEST_CASE("allocation rejects bad input") {
  CHECK_THROWS_AS(allocate({1.0}, {1.0}, 0.0), ArgumentError);
  CHECK_THROWS_AS(allocate({1.0, -1.0}, {1.0, 1.0}, 0.1), ArgumentError);
  CHECK_THROWS_AS(allocate({1.0}, {1.0, 2.0}, 0.1), ArgumentError);
  CHECK_THROWS_AS(allocate({}, {}, 0.1), ArgumentError);
}

TEST_CASE("the single-level budget rule divides variance by the sample count") {
  CHECK(sampling_error_target(0.5, 25) == doctest::Approx(0.02).epsilon(1e-15));
  CHECK_THROWS_AS(sampling_error_target(0.0, 10), ArgumentError);
  CHECK_THROWS_AS(sampling_error_target(1.0, 0), ArgumentError);
}

TEST_CASE("variance extrapolation follows the power law") {
  VarianceModel m;
  m.v0 = 1.0;
  m.beta = 2.0;
  const auto v = m.extrapolate(3, 2.0);
  REQUIRE(v.size() == 3);
  CHECK(v[0] == doctest::Approx(1.0));
  CHECK(v[1] == doctest::Approx(0.25));
  CHECK(v[2] == doctest::Approx(0.0625));
}

TEST_CASE("the accumulator matches a direct two-pass computation") {
  const long N = 64;
  std::vector<double> vals;
  const Estimate est = telescope_estimate(
      {N}, 1,
      [&](int, long i, double*, long*) {
        Eigen::VectorXd q(1);
        q[0] = 3.0 + rng::standard_normal(17, static_cast<std::uint64_t>(i));
        vals.push_back(q[0]);
        return q;
      },
      abs_norms);
  double mean = 0.0;
  for (double x : vals) mean += x;
  mean /= N;
  double var = 0.0;
  for (double x : vals) var += (x - mean) * (x - mean);
  var /= (N - 1);
  CHECK(est.mean[0] == doctest::Approx(mean).epsilon(1e-13));
  CHECK(est.levels[0].variance.l2 == doctest::Approx(var).epsilon(1e-10));
  CHECK(est.levels[0].variance.linf == doctest::Approx(var).epsilon(1e-10));
  CHECK(est.sampling_error.l2 == doctest::Approx(var / N).epsilon(1e-10));
  CHECK(est.total_samples == N);
}

TEST_CASE("a toy two-term telescope recovers the true mean within four standard errors") {
  // term 0 ~ N(2, 1), term 1 ~ N(0.5, 0.01): true total mean 2.5
  const std::vector<long> N{4000, 400};
  const Estimate est = telescope_estimate(
      N, 1,
      [&](int t, long i, double*, long*) {
        const std::uint64_t seed =
            rng::derive_seed(5, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(i));
        Eigen::VectorXd q(1);
        q[0] = (t == 0) ? 2.0 + rng::standard_normal(seed, 0)
                        : 0.5 + 0.1 * rng::standard_normal(seed, 0);
        return q;
      },
      abs_norms);
  const double se = std::sqrt(est.sampling_error.l2);
  CHECK(std::abs(est.mean[0] - 2.5) <= 4.0 * se);
  // the stored mean is the exact sum of the per-term means
  CHECK(est.mean[0] == est.levels[0].mean[0] + est.levels[1].mean[0]);
}

TEST_CASE("identical samples produce zero variance") {
  const Estimate est = telescope_estimate(
      {10}, 2,
      [&](int, long, double*, long*) {
        Eigen::VectorXd q(2);
        q << 1.25, -0.5;
        return q;
      },
      [](const Eigen::VectorXd& q) {
        return NormTriple{q.norm(), q.cwiseAbs().maxCoeff(), q.norm()};
      });
  CHECK(est.levels[0].variance.l2 <= 1e-12);
  CHECK(est.levels[0].variance.linf <= 1e-12);
  CHECK(est.levels[0].variance.h1 <= 1e-12);
}

TEST_CASE("a one-sample term is accepted with zero variance") {
  const Estimate est = telescope_estimate(
      {1}, 1,
      [](int, long, double*, long*) {
        Eigen::VectorXd q(1);
        q[0] = 7.0;
        return q;
      },
      abs_norms);
  CHECK(est.levels[0].variance.l2 == 0.0);
  CHECK(est.mean[0] == 7.0);
  CHECK_THROWS_AS(telescope_estimate(
                      {0}, 1, [](int, long, double*, long*) { return Eigen::VectorXd(1); },
                      abs_norms),
                  ArgumentError);
}

TEST_CASE("single-level estimates replay bit-identically under one seed") {
  Setup s(1);
  const Estimate a = slmc(s.cs, 1, 3, 42);
  const Estimate b = slmc(s.cs, 1, 3, 42);
  CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.levels[0].variance.l2 == b.levels[0].variance.l2);
  const Estimate c = slmc(s.cs, 1, 3, 43);
  CHECK((a.mean - c.mean).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("a depth-zero multilevel plan is the single-level estimator") {
  Setup s(1);
  MlmcPlan plan;
  plan.N = {4};
  const Estimate ml = mlmc(s.cs, plan, 11);
  const Estimate sl = slmc(s.cs, 0, 4, 11);
  CHECK((ml.mean - sl.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK(ml.levels[0].variance.l2 == sl.levels[0].variance.l2);
}

TEST_CASE("warm-started estimates agree with cold-started ones") {
  Setup s(1);
  MlmcPlan plan;
  plan.N = {3, 2};
  const Estimate cold = mlmc(s.cs, plan, 7, false);
  const Estimate warm = mgmlmc(s.cs, plan, 7);
  const double tol = 1e-8;
  CHECK((warm.mean - cold.mean).norm() <= 10.0 * tol * cold.mean.norm());
  CHECK(warm.finest_level == 1);
  CHECK(warm.total_samples == 5);
}

TEST_CASE("nested iteration does not need more cycles than cold starts") {
  Setup s(1);
  MlmcPlan plan;
  plan.N = {1, 20};
  const Estimate cold = mlmc(s.cs, plan, 123, false);
  const Estimate warm = mlmc(s.cs, plan, 123, true);
  CHECK(warm.levels[1].cycles <= cold.levels[1].cycles);
  CHECK(warm.levels[1].N == 20);
}

TEST_CASE("pilot variances are positive and the corrections decay") {
  Setup s(1);
  const double v = pilot_variance(s.cs, 0, 12, Norm::l2, 3);
  CHECK(v > 0.0);
  const auto vc = pilot_correction_variances(s.cs, 1, 12, Norm::l2, 3);
  REQUIRE(vc.size() == 2);
  CHECK(vc[0] > 0.0);
  CHECK(vc[1] > 0.0);
  CHECK(vc[1] < vc[0]);
  // the term-0 pilot is the total-variance pilot
  CHECK(vc[0] == doctest::Approx(v).epsilon(1e-12));
}

TEST_CASE("estimator work is metered") {
  Setup s(1);
  const Estimate est = slmc(s.cs, 1, 2, 1);
  CHECK(est.flops > 0.0);
  CHECK(est.levels[0].flops == est.flops);
  CHECK(est.levels[0].cycles > 0);
  CHECK(est.seconds > 0.0);
}

TEST_CASE("report files carry the expected layout") {
  Setup s(1);
  const Estimate est = slmc(s.cs, 1, 2, 1);
  const DofCounts nd = s.hier.level(1).dofs();

  std::ostringstream ecsv;
  write_estimate_csv(nd, est.mean, ecsv);
  std::istringstream in(ecsv.str());
  std::string line;
  long rows = 0;
  std::getline(in, line);
  CHECK(line == "node,field,mean");
  while (std::getline(in, line)) ++rows;
  CHECK(rows == nd.n_phi + nd.n_u() + nd.n_p);

  std::ostringstream lcsv;
  write_levels_csv(est, Norm::l2, lcsv);
  CHECK(lcsv.str().rfind("level,N,variance,cost\n", 0) == 0);

  Efficiency e;
  e.T_sl = 4.0;
  e.T_ml = 2.0;
  e.T_mgml = 1.0;
  e.gamma = 2.5;
  std::ostringstream js;
  write_efficiency_json(e, js);
  CHECK(js.str().find("\"ratio_mgml_sl\": 0.25") != std::string::npos);
  CHECK(js.str().find("\"gamma\": 2.5") != std::string::npos);
}
