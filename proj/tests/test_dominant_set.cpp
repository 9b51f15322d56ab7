#include <doctest.h>

#include <random>

#include "fform/dominant_set.hpp"
#include "fform/evaluation.hpp"
#include "oracles.hpp"

using namespace fform;

namespace {

AffinityMatrix blocks(const std::vector<std::vector<PersonId>>& groups, int n, double inside, double across) {
  AffinityMatrix a;
  for (int k = 0; k < n; ++k) a.person_ids.push_back(k);
  a.values = Eigen::MatrixXd::Constant(n, n, across);
  for (const auto& g : groups)
    for (PersonId x : g)
      for (PersonId y : g) a.values(x, y) = inside;
  a.values.diagonal().setZero();
  return a;
}

}  // namespace

TEST_CASE("symmetrization strategies") {
  Eigen::MatrixXd a(2, 2);
  a << 0.0, 0.8, 0.2, 0.0;
  CHECK(symmetrize(a, Symmetrization::raw) == a);
  CHECK(symmetrize(a, Symmetrization::average)(0, 1) == doctest::Approx(0.5));
  CHECK(symmetrize(a, Symmetrization::average)(1, 0) == doctest::Approx(0.5));
  CHECK(symmetrize(a, Symmetrization::minimum)(0, 1) == 0.2);
  CHECK(symmetrize(a, Symmetrization::maximum)(1, 0) == 0.8);
  for (Symmetrization s : kAllSymmetrizations) CHECK(parse_symmetrization(to_string(s)) == s);
  CHECK_FALSE(parse_symmetrization("median").has_value());
}

TEST_CASE("planted blocks are recovered exactly") {
  const std::vector<std::vector<PersonId>> groups = {{0, 3, 5}, {1, 2}, {4}, {6, 7}};
  DSConfig cfg;
  cfg.affinity_threshold = 0.3;
  const GroupPartition got = cluster(blocks(groups, 8, 0.9, 0.05), cfg);
  CHECK(got == GroupPartition(groups));
  CHECK(group_f1(got, GroupPartition(groups), GroupMatchConfig{kThrExact}).f1 == 1.0);
}

TEST_CASE("weakly tied pairs stay singletons under the threshold") {
  // Everyone mildly likes everyone: no set clears a 0.5 mutual affinity.
  const GroupPartition got = cluster(blocks({}, 5, 0.0, 0.2), DSConfig{});
  CHECK(got.multi_member_groups().empty());
  CHECK(got.groups.size() == 5);
}

TEST_CASE("a strong pair forms a group at the default threshold") {
  const GroupPartition got = cluster(blocks({{1, 2}}, 4, 0.9, 0.1), DSConfig{});
  CHECK(got.multi_member_groups() == std::vector<std::vector<PersonId>>{{1, 2}});
}

TEST_CASE("edge cases") {
  AffinityMatrix one{{7}, Eigen::MatrixXd::Zero(1, 1)};
  CHECK(cluster(one, DSConfig{}).groups == std::vector<std::vector<PersonId>>{{7}});
  AffinityMatrix zero{{0, 1, 2}, Eigen::MatrixXd::Zero(3, 3)};
  CHECK(cluster(zero, DSConfig{}).groups.size() == 3);
  const DominantSet d = extract_dominant_set(Eigen::MatrixXd::Zero(3, 3), DSConfig{});
  CHECK(d.degenerate);
  AffinityMatrix empty{{}, Eigen::MatrixXd(0, 0)};
  CHECK(cluster(empty, DSConfig{}).groups.empty());
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
  bad(0, 1) = -1.0;
  CHECK_THROWS(extract_dominant_set(bad, DSConfig{}));
  DSConfig wrong;
  wrong.affinity_threshold = 1.5;
  CHECK_THROWS(wrong.validate());
}

TEST_CASE("equal blocks are separated rather than merged") {
  const GroupPartition got = cluster(blocks({{0, 1}, {2, 3}}, 4, 1.0, 0.0), DSConfig{});
  CHECK(got == GroupPartition({{0, 1}, {2, 3}}));
}

TEST_CASE("extracted set is dominant on generic random matrices") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 5;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) a(i, j) = a(j, i) = u(rng);
    const DominantSet ds = extract_dominant_set(a, DSConfig{});
    oracle::DominantSetWeights w(a);
    CHECK(w.is_dominant(oracle::to_mask(ds.members)));
  }
}

TEST_CASE("mutual affinity is the mean pairwise weight for uniform support") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 3);
  a(0, 1) = a(1, 0) = 0.6;
  a(0, 2) = a(2, 0) = 0.3;
  a(1, 2) = a(2, 1) = 0.9;
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
  CHECK(mutual_affinity(a, x) == doctest::Approx(0.6));
  Eigen::VectorXd pair(3);
  pair << 0.5, 0.5, 0.0;
  CHECK(mutual_affinity(a, pair) == doctest::Approx(0.6));
}

TEST_CASE("cluster output is always a valid partition of the input ids") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 8;
    AffinityMatrix a;
    for (int k = 0; k < n; ++k) a.person_ids.push_back(10 + 3 * k);
    a.values = Eigen::MatrixXd(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a.values(i, j) = i == j ? 0.0 : u(rng);
    DSConfig cfg;
    cfg.strategy = kAllSymmetrizations[trial % 4];
    const GroupPartition p = cluster(a, cfg);
    CHECK_NOTHROW(p.validate());
    std::vector<PersonId> ids;
    for (const auto& g : p.groups) ids.insert(ids.end(), g.begin(), g.end());
    std::sort(ids.begin(), ids.end());
    CHECK(ids == a.person_ids);
  }
}

TEST_CASE("replicator dynamics fixed points") {
  Eigen::MatrixXd pair(2, 2);
  pair << 0, 1, 1, 0;
  const DominantSet d = extract_dominant_set(pair, DSConfig{});
  CHECK(d.members == std::vector<int>{0, 1});
  CHECK(d.weights(0) == doctest::Approx(0.5));
  CHECK(d.weights(1) == doctest::Approx(0.5));

  Eigen::MatrixXd three = Eigen::MatrixXd::Zero(3, 3);
  three(0, 1) = three(1, 0) = 0.9;
  CHECK(extract_dominant_set(three, DSConfig{}).members == std::vector<int>{0, 1});
  oracle::DominantSetWeights w(three);
  CHECK(w.is_dominant(oracle::to_mask(std::vector<int>{0, 1})));

  const DominantSet single = extract_dominant_set(Eigen::MatrixXd::Zero(1, 1), DSConfig{});
  CHECK(single.members == std::vector<int>{0});
  CHECK(single.weights(0) == 1.0);
}

TEST_CASE("symmetrization properties") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 6;
    Eigen::MatrixXd a(n, n), s(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = i == j ? 0.0 : u(rng);
    s = (a + a.transpose()) / 2;
    const Eigen::MatrixXd avg = symmetrize(a, Symmetrization::average);
    CHECK((avg - avg.transpose()).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(symmetrize(avg, Symmetrization::average) == avg);
    for (Symmetrization m : kAllSymmetrizations) CHECK(symmetrize(s, m) == s);
  }
}

TEST_CASE("scaling a matrix keeps the support") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 3 + trial % 4;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) a(i, j) = a(j, i) = u(rng);
    const auto base = extract_dominant_set(a, DSConfig{}).members;
    for (double gamma : {0.3, 2.0, 7.5}) CHECK(extract_dominant_set(gamma * a, DSConfig{}).members == base);
  }
}

TEST_CASE("clustering is deterministic") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  AffinityMatrix a;
  a.person_ids = {0, 1, 2, 3, 4, 5};
  a.values = Eigen::MatrixXd(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) a.values(i, j) = i == j ? 0.0 : u(rng);
  CHECK(cluster(a, DSConfig{}) == cluster(a, DSConfig{}));
}
