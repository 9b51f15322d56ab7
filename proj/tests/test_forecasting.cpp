#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fform/forecasting.hpp"
#include "oracles.hpp"

using namespace fform;

namespace {

std::vector<double> steps(int n) {
  std::vector<double> t(n);
  for (int k = 0; k < n; ++k) t[k] = k;
  return t;
}

EdgeSeries constant_edge(PersonId a, PersonId b, double v, int n = 10) {
  return EdgeSeries{a, b, steps(n), std::vector<double>(n, v)};
}

// Two stable pairs {0,1} and {2,3} with weak links across.
std::vector<EdgeSeries> frozen_scene() {
  std::vector<EdgeSeries> e;
  for (PersonId a = 0; a < 4; ++a)
    for (PersonId b = a + 1; b < 4; ++b) e.push_back(constant_edge(a, b, a / 2 == b / 2 ? 0.9 : 0.05));
  return e;
}

}  // namespace

TEST_CASE("constant series is reproduced at the data and reverts slowly beyond") {
  const GprModel m = GprModel::fit(steps(10), std::vector<double>(10, 0.7));
  const auto t = steps(10);
  const Eigen::VectorXd at = m.posterior_mean(t);
  for (int k = 0; k < 10; ++k) CHECK(std::abs(at(k) - 0.7) < 1e-3);
  const std::vector<double> q = {10, 12, 15};
  const Eigen::VectorXd beyond = m.posterior_mean(q);
  for (int k = 0; k < 3; ++k) {
    CHECK(beyond(k) < 0.7);
    CHECK(beyond(k) > 0.69);
  }
}

TEST_CASE("near noise-free posterior passes through the data") {
  const std::vector<double> y = {0.1, 0.4, 0.8, 0.6, 0.3, 0.2, 0.5};
  GprOptions opt;
  opt.noise_variance = 1e-8;
  const GprModel m = GprModel::with_length_scale(steps(7), y, 1.5, opt);
  const auto t = steps(7);
  const Eigen::VectorXd mean = m.posterior_mean(t);
  for (int k = 0; k < 7; ++k) CHECK(std::abs(mean(k) - y[k]) < 1e-6);
}

TEST_CASE("length-scale of data drawn from a known process is recovered") {
  const auto t = steps(50);
  Eigen::MatrixXd k(50, 50);
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 50; ++j) k(i, j) = std::exp(-std::pow(t[i] - t[j], 2) / 8.0) + (i == j ? 1e-4 : 0.0);
  const Eigen::MatrixXd l = k.llt().matrixL();
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd z(50);
  for (auto& v : z) v = n(rng);
  const Eigen::VectorXd y = l * z;
  const GprModel m = GprModel::fit(t, std::vector<double>(y.data(), y.data() + 50));
  CHECK(m.length_scale() >= 1.0);
  CHECK(m.length_scale() <= 4.0);
}

TEST_CASE("posterior interpolates observations and is confident there") {
  std::vector<double> y = {0.1, 0.4, 0.8, 0.6, 0.3, 0.2, 0.5};
  const GprModel m = GprModel::with_length_scale(steps(7), y, 1.5);
  const auto t = steps(7);
  const Eigen::VectorXd mean = m.posterior_mean(t);
  const Eigen::MatrixXd cov = m.posterior_covariance(t);
  for (int k = 0; k < 7; ++k) {
    CHECK(mean(k) == doctest::Approx(y[k]).epsilon(1e-2));
    CHECK(cov(k, k) < 1e-4);
    CHECK(cov(k, k) >= -1e-12);
  }
  CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("log marginal likelihood matches a hand-written Cholesky") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 0.4);
  std::vector<double> y(15);
  for (double& v : y) v = n(rng);
  const auto t = steps(15);
  const GprOptions opt;
  for (double l : {0.3, 1.0, 2.5, 9.0, 40.0}) {
    const double ours = rbf_log_marginal_likelihood(t, y, l, opt).value;
    CHECK(ours == doctest::Approx(oracle::rbf_lml(t, y, l, opt.signal_variance, opt.noise_variance)).epsilon(1e-9));
    // d/dlog(l) against a central difference.
    const double h = 1e-5;
    const double fd = (rbf_log_marginal_likelihood(t, y, l * std::exp(h), opt).value -
                       rbf_log_marginal_likelihood(t, y, l * std::exp(-h), opt).value) /
                      (2 * h);
    CHECK(rbf_log_marginal_likelihood(t, y, l, opt).d_log_length == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("fitted length-scale is at least as likely as any grid point") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto t = steps(20);
  std::vector<double> y(20);
  for (int k = 0; k < 20; ++k) y[k] = 0.5 * std::sin(0.4 * k) + 0.05 * n(rng);
  const GprModel m = GprModel::fit(t, y);
  const GprOptions opt;
  for (int g = 0; g <= 60; ++g) {
    const double l = opt.min_length_scale * std::pow(opt.max_length_scale / opt.min_length_scale, g / 60.0);
    CHECK(m.log_marginal_likelihood() >= oracle::rbf_lml(t, y, l, opt.signal_variance, opt.noise_variance) - 1e-6);
  }
}

TEST_CASE("posterior samples have the posterior mean") {
  const std::vector<double> y = {0.2, 0.5, 0.6, 0.4};
  const GprModel m = GprModel::with_length_scale(steps(4), y, 2.0);
  const std::vector<double> q = {4, 6};
  const Eigen::MatrixXd draws = sample_posterior(m, q, 10000, 77, false);
  const Eigen::VectorXd mean = m.posterior_mean(q);
  const Eigen::MatrixXd cov = m.posterior_covariance(q);
  for (int k = 0; k < 2; ++k) {
    const double se = std::sqrt(cov(k, k) / 10000.0);
    CHECK(std::abs(draws.col(k).mean() - mean(k)) < 3.0 * se);
  }
  const Eigen::MatrixXd clamped = sample_posterior(m, q, 500, 77);
  CHECK(clamped.minCoeff() >= 0.0);
  CHECK(clamped.maxCoeff() <= 1.0);
  CHECK(sample_posterior(m, q, 50, 3) == sample_posterior(m, q, 50, 3));
}

TEST_CASE("bad inputs raise") {
  CHECK_THROWS_AS(GprModel::fit({0.0}, {1.0}), GprError);
  CHECK_THROWS_AS(GprModel::fit({0.0, 0.0}, {1.0, 1.0}), GprError);
  CHECK_THROWS_AS(GprModel::fit({0.0, 1.0}, {1.0}), GprError);
  CHECK_THROWS_AS(GprModel::with_length_scale({0.0, 1.0}, {1.0, 1.0}, -1.0), GprError);
  const GprModel m = GprModel::with_length_scale(steps(3), {0.1, 0.2, 0.3}, 1.0);
  CHECK_THROWS_AS(sample_posterior(m, std::vector<double>{4.0}, 0, 1), GprError);
}

TEST_CASE("frozen scene forecasts its own grouping at every horizon") {
  const auto edges = frozen_scene();
  const std::vector<GroupPartition> gt(6, GroupPartition({{0, 1}, {2, 3}}));
  const SceneForecast f = forecast_groups(edges, 5, 20, DSConfig{}, 1, gt);
  REQUIRE(f.horizons.size() == 5);
  CHECK(f.persons == std::vector<PersonId>{0, 1, 2, 3});
  for (const auto& h : f.horizons) {
    CHECK(h.samples.size() == 20);
    REQUIRE(h.summary.has_value());
    CHECK(h.summary->mean_f1_exact == 1.0);
    CHECK(h.summary->std_f1_exact == 0.0);
  }
}

TEST_CASE("zero horizon reclusters the last observation") {
  auto edges = frozen_scene();
  edges[1].values.back() = 0.95;  // pair (0,2) jumps at the last step
  edges[0].values.back() = 0.95;  // pair (0,1)
  edges[3].values.back() = 0.95;  // pair (1,2)
  const SceneForecast f = forecast_groups(edges, 0, 10, DSConfig{}, 1);
  REQUIRE(f.horizons.size() == 1);
  CHECK(f.horizons[0].horizon == 0);
  REQUIRE(f.horizons[0].samples.size() == 1);
  AffinityMatrix last{{0, 1, 2, 3}, Eigen::MatrixXd::Zero(4, 4)};
  int k = 0;
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b, ++k) last.values(a, b) = last.values(b, a) = edges[k].values.back();
  CHECK(f.horizons[0].samples[0] == cluster(last, DSConfig{}));
}

TEST_CASE("forecast is deterministic and independent of edge order") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<EdgeSeries> edges;
  for (PersonId a = 0; a < 4; ++a)
    for (PersonId b = a + 1; b < 4; ++b) {
      EdgeSeries e{b, a, steps(8), {}};
      for (int k = 0; k < 8; ++k) e.values.push_back(u(rng));
      edges.push_back(e);
    }
  const SceneForecast a = forecast_groups(edges, 4, 15, DSConfig{}, 42);
  std::reverse(edges.begin(), edges.end());
  const SceneForecast b = forecast_groups(edges, 4, 15, DSConfig{}, 42);
  for (int h = 0; h < 4; ++h) CHECK(a.horizons[h].samples == b.horizons[h].samples);
  CHECK_FALSE(a.horizons[0].summary.has_value());

  std::vector<GroupPartition> gt(5, GroupPartition({{0, 1}, {2}, {3}}));
  const SceneForecast scored = forecast_groups(edges, 4, 15, DSConfig{}, 42, gt);
  for (const auto& h : scored.horizons) {
    REQUIRE(h.summary.has_value());
    for (double v : {h.summary->mean_f1_exact, h.summary->mean_f1_majority}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(h.summary->std_f1_exact >= 0.0);
    CHECK(h.summary->n_samples == 15);
  }
}

TEST_CASE("edge set must be complete and unique") {
  auto edges = frozen_scene();
  const auto dropped = std::vector<EdgeSeries>(edges.begin() + 1, edges.end());
  CHECK_THROWS_WITH_AS(forecast_groups(dropped, 2, 5, DSConfig{}, 0), doctest::Contains("missing"),
                       std::invalid_argument);
  edges.push_back(constant_edge(1, 0, 0.3));
  CHECK_THROWS_WITH_AS(forecast_groups(edges, 2, 5, DSConfig{}, 0), doctest::Contains("duplicate"),
                       std::invalid_argument);
  CHECK_THROWS(forecast_groups(frozen_scene(), -1, 5, DSConfig{}, 0));
  const std::vector<GroupPartition> short_gt(2);
  CHECK_THROWS(forecast_groups(frozen_scene(), 3, 5, DSConfig{}, 0, short_gt));
}

TEST_CASE("mix_seed spreads nearby inputs") {
  CHECK(mix_seed(0, 1) != mix_seed(0, 2));
  CHECK(mix_seed(1, 0) != mix_seed(0, 1));
  CHECK(mix_seed(5, 5) == mix_seed(5, 5));
}
