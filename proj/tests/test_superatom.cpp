#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "rydjc/dynamics.hpp"
#include "rydjc/superatom.hpp"

using namespace rydjc;

namespace {

const PhysicalParams kParams = PhysicalParams::from_mhz(1.0, 3.2e6);
const double kRabi = kParams.rabi;

double sin2(double x) { return std::sin(x) * std::sin(x); }

double max_abs_difference(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace

TEST(MeanCoupling, SinglePair) {
  const SpatialConfiguration a{{{0, 0, 0}}}, b{{{0, 0, 7.5}}};
  EXPECT_NEAR(mean_coupling(a, b, kParams), kParams.c6 / std::pow(7.5, 6), 1e-12 * kParams.c6 / std::pow(7.5, 6));
}

TEST(MeanCoupling, NineTermSum) {
  // Atoms on the x axis so every separation is a plain difference of coordinates.
  const double xs1[] = {-0.4, 0.1, 0.5}, xs2[] = {8.0, 8.7, 9.3};
  SpatialConfiguration a, b;
  for (double x : xs1) a.positions.push_back({x, 0, 0});
  for (double x : xs2) b.positions.push_back({x, 0, 0});
  const double c6 = kParams.c6;
  const double expected =
      (c6 / std::pow(8.4, 6) + c6 / std::pow(9.1, 6) + c6 / std::pow(9.7, 6) + c6 / std::pow(7.9, 6) +
       c6 / std::pow(8.6, 6) + c6 / std::pow(9.2, 6) + c6 / std::pow(7.5, 6) + c6 / std::pow(8.2, 6) +
       c6 / std::pow(8.8, 6)) /
      9.0;
  EXPECT_NEAR(mean_coupling(a, b, kParams), expected, 1e-12 * expected);
}

TEST(MeanCoupling, CompactCloudsApproachPointCoupling) {
  // Measured from the cloud centroids the first-order terms cancel. Averaging
  // C6/|D + delta|^6 over offsets of variance 2 r^2 per axis then leaves a
  // correction of 30 (r/D)^2 at leading order; allow twice that.
  RandomStream rng(3);
  for (double r : {0.25, 0.5, 1.0}) {
    auto a = sample_positions(GaussianCloud{r}, 40, rng);
    auto b = sample_positions(GaussianCloud{r}, 40, rng);
    for (Vec3& p : b.positions) p.x += 20.0;
    Vec3 ca{}, cb{};
    for (const Vec3& p : a.positions) ca.x += p.x / 40, ca.y += p.y / 40, ca.z += p.z / 40;
    for (const Vec3& p : b.positions) cb.x += p.x / 40, cb.y += p.y / 40, cb.z += p.z / 40;
    const double d2 = distance_squared(ca, cb);
    const double point = kParams.c6 / (d2 * d2 * d2);
    const double rel = std::abs(mean_coupling(a, b, kParams) / point - 1.0);
    EXPECT_LT(rel, 60.0 * r * r / d2) << "r=" << r;
  }
}

TEST(MeanCoupling, Errors) {
  const SpatialConfiguration a{{{0, 0, 0}}}, empty;
  EXPECT_THROW(mean_coupling(a, a, kParams), SingularityError);
  EXPECT_THROW(mean_coupling(a, empty, kParams), ArgumentError);
}

TEST(EvolvePair, DecoupledEnsemblesOscillateIndependently) {
  const auto grid = uniform_time_grid(10.0, 201);
  for (int n : {1, 4, 10}) {
    const auto s = evolve_pair({n, n, 0.0, kRabi}, grid);
    for (std::size_t i = 0; i < grid.size(); ++i)
      EXPECT_NEAR(s.n_ry[i], 2.0 * sin2(std::sqrt(double(n)) * kRabi * grid[i] / 2.0), 1e-10);
  }
  // unequal numbers: product of two independent two-level systems
  const auto s = evolve_pair({3, 8, 0.0, kRabi}, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double p1 = sin2(std::sqrt(3.0) * kRabi * grid[i] / 2.0), p2 = sin2(std::sqrt(8.0) * kRabi * grid[i] / 2.0);
    EXPECT_NEAR(s.p_rr[i], p1 * p2, 1e-10);
    EXPECT_NEAR(s.p_rg[i], p1 * (1.0 - p2), 1e-10);
    EXPECT_NEAR(s.p_gr[i], (1.0 - p1) * p2, 1e-10);
  }
}

TEST(EvolvePair, StrongCouplingActsAsOneSuperatom) {
  const auto grid = uniform_time_grid(10.0, 201);
  const SuperatomPair frozen{10, 10, std::numeric_limits<double>::infinity(), kRabi};
  const auto inf = evolve_pair(frozen, grid);
  const auto large = evolve_pair({10, 10, 1e3 * kRabi * std::sqrt(20.0), kRabi}, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double single = sin2(std::sqrt(20.0) * kRabi * grid[i] / 2.0);
    EXPECT_NEAR(inf.n_ry[i], single, 1e-10);
    EXPECT_NEAR(large.n_ry[i], single, 1e-3);
    EXPECT_EQ(inf.p_rr[i], 0.0);
  }
}

TEST(EvolvePair, CouplingContinuityOnBlockadePlateau) {
  const auto grid = uniform_time_grid(10.0, 401);
  for (auto [n1, n2] : {std::pair{10, 10}, std::pair{3, 14}, std::pair{1, 2}}) {
    const double unit = kRabi * std::sqrt(double(n1 + n2));
    const auto a = evolve_pair({n1, n2, 1e3 * unit, kRabi}, grid);
    const auto b = evolve_pair({n1, n2, 1e4 * unit, kRabi}, grid);
    EXPECT_LT(max_abs_difference(a.n_ry, b.n_ry), 1e-3) << n1 << "," << n2;
  }
}

TEST(EvolvePair, EmptyPartner) {
  const auto grid = uniform_time_grid(10.0, 101);
  const auto a = evolve_pair({6, 0, 5.0, kRabi}, grid);
  const auto b = evolve_pair({0, 6, 5.0, kRabi}, grid);
  const auto none = evolve_pair({0, 0, 5.0, kRabi}, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double single = sin2(std::sqrt(6.0) * kRabi * grid[i] / 2.0);
    EXPECT_NEAR(a.n_ry[i], single, 1e-14);
    EXPECT_NEAR(a.p_rg[i], single, 1e-14);
    EXPECT_NEAR(b.p_gr[i], single, 1e-14);
    EXPECT_EQ(none.n_ry[i], 0.0);
  }
}

TEST(EvolvePair, SwapSymmetry) {
  const auto grid = uniform_time_grid(10.0, 201);
  for (double k : {0.3, 7.0, 40.0}) {
    const auto a = evolve_pair({4, 11, k, kRabi}, grid);
    const auto b = evolve_pair({11, 4, k, kRabi}, grid);
    EXPECT_LT(max_abs_difference(a.n_ry, b.n_ry), 1e-10);
    EXPECT_LT(max_abs_difference(a.p_gr, b.p_rg), 1e-10);
  }
}

TEST(EvolvePair, RungeKuttaAgreesWithExact) {
  const auto grid = uniform_time_grid(10.0, 101);
  for (double k : {0.0, 2.0, 25.0}) {
    const SuperatomPair p{5, 9, k, kRabi};
    const auto a = evolve_pair(p, grid, PairPropagator::exact);
    const auto b = evolve_pair(p, grid, PairPropagator::runge_kutta);
    EXPECT_LT(max_abs_difference(a.n_ry, b.n_ry), 1e-8);
    EXPECT_LT(max_abs_difference(a.p_rr, b.p_rr), 1e-8);
  }
}

TEST(EvolvePair, EqualNumbersAgreeWithSingleRootForm) {
  // With N1 = N2 = N every coupling is Omega sqrt(N) / 2; integrate that form directly.
  const int n = 7;
  const double k = 9.0, a = kRabi * std::sqrt(double(n)) / 2.0;
  const auto grid = uniform_time_grid(10.0, 101);
  Eigen::Matrix4cd h;
  h << 0, a, a, 0, a, 0, 0, a, a, 0, 0, a, 0, a, a, k;
  const auto s = evolve_pair({n, n, k, kRabi}, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Eigen::Matrix4cd u = (std::complex<double>(0, -grid[i]) * h).exp();
    const Eigen::Vector4cd c = u.col(0);
    EXPECT_NEAR(s.n_ry[i], std::norm(c[1]) + std::norm(c[2]) + 2.0 * std::norm(c[3]), 1e-9);
  }
}

TEST(EvolvePair, MatchesFourAtomDynamicsForCompactEnsembles) {
  // Two atoms per ensemble, 0.3 um apart inside each, 10 um between ensembles.
  const double d = 10.0;
  SpatialConfiguration first{{{0, 0, 0}, {0, 0.3, 0}}}, second{{{d, 0, 0}, {d, 0, 0.3}}};
  SpatialConfiguration all = first;
  all.positions.insert(all.positions.end(), second.positions.begin(), second.positions.end());
  const auto grid = uniform_time_grid(10.0, 201);
  const auto h = build_hamiltonian(kParams, all, StateSpace(4, 2));
  const auto full = excitation_expectations(evolve(h, grid)).n_ry;
  const auto pair = evolve_pair({2, 2, mean_coupling(first, second, kParams), kRabi}, grid);
  const double peak = *std::max_element(full.begin(), full.end());
  EXPECT_LT(max_abs_difference(full, pair.n_ry) / peak, 0.05);
}

TEST(EvolvePair, RejectsInvalidInput) {
  const std::vector<double> grid{0.0, 1.0};
  EXPECT_THROW(evolve_pair({-1, 2, 0.0, kRabi}, grid), ArgumentError);
  EXPECT_THROW(evolve_pair({1, 2, -1.0, kRabi}, grid), ArgumentError);
  EXPECT_THROW(evolve_pair({1, 2, 0.0, kRabi}, std::vector<double>{0.1, 1.0}), ArgumentError);
}

namespace {

TwoEnsembleSpec small_spec(double d) {
  TwoEnsembleSpec s;
  s.distance = d;
  s.time_grid = uniform_time_grid(10.0, 101);
  s.samples = 200;
  s.seed = 17;
  s.workers = 1;
  return s;
}

}  // namespace

TEST(TwoEnsemble, WorkerCountDoesNotChangeResult) {
  auto s = small_spec(9.0);
  const auto a = two_ensemble_scenario(s);
  s.workers = 3;
  const auto b = two_ensemble_scenario(s);
  EXPECT_EQ(a.n_ry, b.n_ry);
  EXPECT_EQ(a.n_ry_se, b.n_ry_se);
  s.cloud_sigma = 0.5;
  s.samples = 40;
  const auto c = two_ensemble_scenario(s);
  s.workers = 1;
  const auto e = two_ensemble_scenario(s);
  EXPECT_EQ(c.n_ry, e.n_ry);
  EXPECT_EQ(c.coupling_mode, "sampled");
}

TEST(TwoEnsemble, FarApartIsTwiceTheSingleEnsemble) {
  // Same draws with K = 0 give exactly the sum of the two single-ensemble curves.
  auto s = small_spec(200.0);
  const auto far = two_ensemble_scenario(s);
  const PoissonDist dist{s.mean_atoms, s.n_max};
  for (std::size_t i = 0; i < s.time_grid.size(); ++i) {
    const double expected = 2.0 * collective_p1({kRabi, 0.0}, dist, s.time_grid[i]);
    EXPECT_LT(std::abs(far.n_ry[i] - expected), 4.0 * far.n_ry_se[i] + 1e-3) << "t=" << s.time_grid[i];
  }
  EXPECT_NEAR(far.tail_mass, poisson_tail_mass(dist), 1e-18);
  EXPECT_EQ(far.coupling_mode, "point");
}

TEST(TwoEnsemble, MeanMatchesExactPoissonAverage) {
  // Exact expectation over the truncated joint Poisson law, for comparison with the sample mean.
  auto s = small_spec(8.0);
  s.mean_atoms = 3.0;
  s.n_max = 12;
  s.samples = 400;
  const auto mc = two_ensemble_scenario(s);
  const PoissonDist dist{s.mean_atoms, s.n_max};
  const double k = kParams.c6 / std::pow(s.distance, 6);
  std::vector<double> exact(s.time_grid.size(), 0.0);
  double mass = 0.0;
  for (int n1 = 0; n1 <= s.n_max; ++n1)
    for (int n2 = 0; n2 <= s.n_max; ++n2) {
      const double w = poisson_pmf(dist, n1) * poisson_pmf(dist, n2);
      mass += w;
      const auto p = evolve_pair({n1, n2, k, kRabi}, s.time_grid);
      for (std::size_t i = 0; i < exact.size(); ++i) exact[i] += w * p.n_ry[i];
    }
  int outside = 0;
  for (std::size_t i = 0; i < exact.size(); ++i)
    if (std::abs(mc.n_ry[i] - exact[i] / mass) > 3.0 * mc.n_ry_se[i] + 1e-9) ++outside;
  EXPECT_LE(outside, 5);
  EXPECT_GT(mc.empty_draws, 0);
}

TEST(TwoEnsemble, SweepEndpointsMatchScenarios) {
  const auto base = small_spec(10.0);
  const std::vector<double> ds{4.0, 9.0, 20.0};
  const auto sweep = distance_sweep(base, ds);
  ASSERT_EQ(sweep.results.size(), 3u);
  auto near = base;
  near.distance = 4.0;
  auto far = base;
  far.distance = 20.0;
  EXPECT_EQ(sweep.results.front().n_ry, two_ensemble_scenario(near).n_ry);
  EXPECT_EQ(sweep.results.back().n_ry, two_ensemble_scenario(far).n_ry);
  const std::vector<double> one{9.0};
  auto mid = base;
  mid.distance = 9.0;
  EXPECT_EQ(distance_sweep(base, one).results[0].n_ry, two_ensemble_scenario(mid).n_ry);
}

TEST(TwoEnsemble, RejectsInvalidInput) {
  auto s = small_spec(0.0);
  EXPECT_THROW(two_ensemble_scenario(s), ArgumentError);
  s = small_spec(5.0);
  s.samples = 0;
  EXPECT_THROW(two_ensemble_scenario(s), ArgumentError);
  const std::vector<double> unsorted{5.0, 4.0};
  EXPECT_THROW(distance_sweep(small_spec(5.0), unsorted), ArgumentError);
  EXPECT_THROW(distance_sweep(small_spec(5.0), std::vector<double>{}), ArgumentError);
}
