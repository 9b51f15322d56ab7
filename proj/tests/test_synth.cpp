#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fform/evaluation.hpp"
#include "fform/scene.hpp"
#include "fform/synth.hpp"

using namespace fform;

namespace {

SynthConfig small(std::uint64_t seed = 3) {
  SynthConfig c;
  c.n_scenes = 6;
  c.steps_per_scene = 80;
  c.seed = seed;
  return c;
}

std::vector<PersonId> present_ids(const Frame& f) {
  std::vector<PersonId> ids;
  for (const auto& p : f.persons) ids.push_back(p.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

TEST_CASE("every frame is labelled with a valid partition of the present people") {
  const auto seqs = generate(small());
  REQUIRE(seqs.size() == 6);
  for (const auto& s : seqs) {
    CHECK(s.steps() == 80);
    CHECK(s.n == 8);
    for (const auto& f : s.frames) {
      REQUIRE(f.groups.has_value());
      CHECK_NOTHROW(f.groups->validate());
      std::vector<PersonId> members;
      for (const auto& g : f.groups->groups) members.insert(members.end(), g.begin(), g.end());
      std::sort(members.begin(), members.end());
      CHECK(members == present_ids(f));
      CHECK(static_cast<int>(f.persons.size()) >= 4);
      for (const auto& p : f.persons) {
        CHECK(p.head > -std::numbers::pi);
        CHECK(p.head <= std::numbers::pi);
      }
    }
  }
}

TEST_CASE("generation is deterministic in the seed") {
  CHECK(format_scene_sequences(generate(small(5))) == format_scene_sequences(generate(small(5))));
  CHECK(format_scene_sequences(generate(small(5))) != format_scene_sequences(generate(small(6))));
}

TEST_CASE("without events the grouping never changes") {
  SynthConfig c = small();
  c.event_rate = 0.0;
  for (const auto& s : generate(c)) {
    std::vector<GroupPartition> gt;
    for (const auto& f : s.frames) gt.push_back(*f.groups);
    for (const auto& p : gt) CHECK(p == gt.front());
    for (const auto& d : scene_dynamics(gt)) CHECK(d.total() == 0);
  }
}

TEST_CASE("events do change the grouping") {
  SynthConfig c = small();
  c.event_rate = 10.0;
  int total = 0;
  for (const auto& s : generate(c)) {
    std::vector<GroupPartition> gt;
    for (const auto& f : s.frames) gt.push_back(*f.groups);
    for (const auto& d : scene_dynamics(gt)) total += d.total();
  }
  CHECK(total > 0);
}

TEST_CASE("group mates stand closer than strangers on average") {
  double within = 0.0, between = 0.0;
  int n_within = 0, n_between = 0;
  for (const auto& s : generate(small(8)))
    for (const auto& f : s.frames)
      for (const auto& a : f.persons)
        for (const auto& b : f.persons) {
          if (a.id >= b.id) continue;
          const double d = std::hypot(a.x - b.x, a.y - b.y);
          if (f.groups->same_group(a.id, b.id)) {
            within += d;
            ++n_within;
          } else {
            between += d;
            ++n_between;
          }
        }
  REQUIRE(n_within > 0);
  REQUIRE(n_between > 0);
  CHECK(within / n_within < 0.5 * between / n_between);
}

TEST_CASE("without noise members face their group centre") {
  SynthConfig c = small(4);
  c.position_noise_std = 0.0;
  c.orientation_noise_std = 0.0;
  c.event_rate = 0.0;
  int checked = 0, facing = 0;
  for (const auto& s : generate(c))
    for (const auto& f : s.frames)
      for (const auto& g : f.groups->groups) {
        if (g.size() < 2) continue;
        double cx = 0.0, cy = 0.0;
        for (PersonId id : g) {
          cx += f.find(id)->x / g.size();
          cy += f.find(id)->y / g.size();
        }
        for (PersonId id : g) {
          const PersonState& p = *f.find(id);
          const double want = std::atan2(cy - p.y, cx - p.x);
          ++checked;
          if (std::abs(std::remainder(p.head - want, 2 * std::numbers::pi)) < 1e-6) ++facing;
        }
      }
  REQUIRE(checked > 0);
  CHECK(facing >= 0.99 * checked);
}

TEST_CASE("infeasible or invalid configurations are rejected") {
  SynthConfig c;
  c.arena_size = 3.0;
  CHECK_THROWS_WITH_AS(generate(c), doctest::Contains("infeasible"), std::invalid_argument);
  c = SynthConfig{};
  c.min_people = 9;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = SynthConfig{};
  c.group_size_distribution = {0.0, 0.0};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = SynthConfig{};
  c.position_noise_std = -0.1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK_NOTHROW(SynthConfig{}.validate());
}

TEST_CASE("subsampling keeps every k-th frame") {
  const auto s = generate(small()).front();
  const SceneSequence sub = subsample(s, 5);
  REQUIRE(sub.steps() == 16);
  for (int k = 0; k < sub.steps(); ++k) CHECK(sub.frames[k] == s.frames[5 * k]);
  CHECK(subsample(s, 1) == s);
  CHECK_THROWS(subsample(s, 0));
}

TEST_CASE("noise-free scenes are nearly separable by o-space centres") {
  SynthConfig c = small(12);
  c.position_noise_std = 0.0;
  c.orientation_noise_std = 0.0;
  int pairs = 0, right = 0;
  for (const auto& s : generate(c))
    for (const auto& f : s.frames)
      for (const auto& a : f.persons)
        for (const auto& b : f.persons) {
          if (a.id >= b.id) continue;
          // Each person votes for the point one radius ahead of them.
          const double ax = a.x + c.o_space_radius * std::cos(a.head), ay = a.y + c.o_space_radius * std::sin(a.head);
          const double bx = b.x + c.o_space_radius * std::cos(b.head), by = b.y + c.o_space_radius * std::sin(b.head);
          const bool guess = std::hypot(ax - bx, ay - by) < 0.5 * c.o_space_radius;
          ++pairs;
          if (guess == f.groups->same_group(a.id, b.id)) ++right;
        }
  REQUIRE(pairs > 0);
  CHECK(right >= 0.99 * pairs);
}
