#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <random>

#include "fform/evaluation.hpp"
#include "oracles.hpp"

using namespace fform;

namespace {

GroupPartition gp(std::vector<std::vector<PersonId>> g) { return GroupPartition(std::move(g)); }

GroupPartition random_partition(std::mt19937_64& rng, int n) {
  std::vector<int> label(n);
  for (int& l : label) l = std::uniform_int_distribution<int>(0, n / 2)(rng);
  std::vector<std::vector<PersonId>> groups(n / 2 + 1);
  for (int k = 0; k < n; ++k) groups[label[k]].push_back(k);
  std::erase_if(groups, [](const auto& g) { return g.empty(); });
  return GroupPartition(groups);
}

}  // namespace

TEST_CASE("group F1 worked examples") {
  const GroupMatchConfig majority{kThrMajority}, exact{kThrExact};
  CHECK(group_f1(gp({{1, 2, 3}, {4, 5}}), gp({{1, 2, 3}, {4, 5}}), majority).f1 == 1.0);

  const GroupF1 partial = group_f1(gp({{1, 2, 4}}), gp({{1, 2, 3}}), majority);
  CHECK(partial.tp == 1);
  CHECK(partial.f1 == 1.0);
  CHECK(group_f1(gp({{1, 2, 4}}), gp({{1, 2, 3}}), exact).tp == 0);

  const GroupF1 split = group_f1(gp({{1, 2}, {3, 4, 5, 6}}), gp({{1, 2, 3}, {4, 5, 6}}), majority);
  CHECK(split.tp == 2);
  CHECK(split.fp == 0);
  CHECK(split.fn == 0);
  CHECK(split.f1 == 1.0);

  const GroupF1 merged = group_f1(gp({{1, 2, 3, 4, 5, 6}}), gp({{1, 2, 3}, {4, 5, 6}}), majority);
  CHECK(merged.tp == 1);
  CHECK(merged.fn == 1);
  CHECK(merged.f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("group F1 conventions") {
  CHECK(group_f1(gp({}), gp({}), GroupMatchConfig{}).f1 == 1.0);
  CHECK(group_f1(gp({{1}, {2}}), gp({{1}, {2}}), GroupMatchConfig{}).f1 == 1.0);  // singletons only
  const GroupF1 miss = group_f1(gp({{1}, {2}, {3}}), gp({{1}, {2, 3}}), GroupMatchConfig{});
  CHECK(miss.fn == 1);
  CHECK(miss.f1 == 0.0);
  // Exact matching rejects extra members.
  CHECK(group_f1(gp({{1, 2, 3}}), gp({{1, 2}}), GroupMatchConfig{kThrExact}).tp == 0);
  CHECK(group_f1(gp({{1, 2, 3}}), gp({{1, 2}}), GroupMatchConfig{kThrMajority}).tp == 1);
  CHECK_THROWS(group_f1(gp({{1, 2}, {2, 3}}), gp({}), GroupMatchConfig{}));
  CHECK_THROWS(GroupMatchConfig{0.0}.validate());
  CHECK_THROWS(GroupMatchConfig{1.5}.validate());
}

TEST_CASE("group F1 is symmetric at exact matching and bounded") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const GroupPartition a = random_partition(rng, 8), b = random_partition(rng, 8);
    const GroupF1 ab = group_f1(a, b, GroupMatchConfig{kThrExact});
    const GroupF1 ba = group_f1(b, a, GroupMatchConfig{kThrExact});
    CHECK(ab.f1 == doctest::Approx(ba.f1));
    CHECK(ab.precision == doctest::Approx(ba.recall));
    CHECK(ab.recall == doctest::Approx(ba.precision));
    const GroupF1 m = group_f1(a, b, GroupMatchConfig{kThrMajority});
    CHECK(m.f1 >= 0.0);
    CHECK(m.f1 <= 1.0);
    CHECK(m.tp >= ab.tp);  // a looser threshold never matches fewer groups
  }
}

TEST_CASE("AUC worked examples") {
  const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  const std::vector<int> y = {0, 0, 1, 1};
  CHECK(auc(s, y) == doctest::Approx(0.75));
  const std::vector<double> tied = {0.3, 0.3, 0.3};
  CHECK(auc(tied, std::vector<int>{0, 1, 1}) == 0.5);
  CHECK(auc(std::vector<double>{0.1, 0.9}, std::vector<int>{0, 1}) == 1.0);
  CHECK_THROWS(auc(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 1}));
  CHECK_THROWS(auc(std::vector<double>{0.1, 0.9}, std::vector<int>{0, 2}));
  CHECK_THROWS(auc(std::vector<double>{0.1}, std::vector<int>{0, 1}));
}

TEST_CASE("AUC equals pair counting and ignores monotone transforms") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial;
    std::vector<double> s(n), t(n);
    std::vector<int> y(n);
    for (int k = 0; k < n; ++k) {
      s[k] = std::round(std::uniform_real_distribution<double>(0.0, 1.0)(rng) * 8.0) / 8.0;
      y[k] = k < 2 ? k : std::bernoulli_distribution(0.3)(rng);
      t[k] = std::exp(3.0 * s[k]) - 7.0;
    }
    const double a = auc(s, y);
    CHECK(std::abs(a - oracle::pair_count_auc(s, y)) <= 1e-12);
    CHECK(auc(t, y) == a);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
  }
}

TEST_CASE("scene dynamics worked examples") {
  const std::vector<GroupPartition> still = {gp({{0, 1}}), gp({{0, 1}}), gp({{0, 1}})};
  for (const auto& d : scene_dynamics(still)) CHECK(d.total() == 0);

  const std::vector<GroupPartition> grow = {gp({{0, 1}}), gp({{0, 1}, {2, 3}})};
  CHECK(scene_dynamics(grow)[1] == DynamicsScore{1, 0, 0});

  const std::vector<GroupPartition> blink = {gp({{0, 1}, {2, 3}}), gp({{0, 1}, {2}, {3}}), gp({{0, 1}, {2, 3}})};
  const auto d = scene_dynamics(blink);
  CHECK(d[0].total() == 0);
  CHECK(d[1] == DynamicsScore{0, 1, 0});
  CHECK(d[2] == DynamicsScore{0, 0, 1});
  CHECK(scene_dynamics({}).empty());
}

TEST_CASE("scene dynamics counts balance appearances against breaks") {
  std::mt19937_64 rng(21);
  std::vector<GroupPartition> seq;
  for (int t = 0; t < 40; ++t) seq.push_back(random_partition(rng, 6));
  const auto fwd = scene_dynamics(seq);
  int breaks = 0, births = 0;
  for (std::size_t t = 0; t < fwd.size(); ++t) {
    CHECK(fwd[t].formations >= 0);
    CHECK(fwd[t].breaks >= 0);
    CHECK(fwd[t].reformations >= 0);
    CHECK(fwd[t].total() == fwd[t].formations + fwd[t].breaks + fwd[t].reformations);
    breaks += fwd[t].breaks;
    births += fwd[t].formations + fwd[t].reformations;
  }
  // Every group that appears after t=0 either breaks later or survives to the end.
  const int initial = static_cast<int>(seq.front().multi_member_groups().size());
  const int final = static_cast<int>(seq.back().multi_member_groups().size());
  CHECK(initial + births == breaks + final);
}
