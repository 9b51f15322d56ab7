#include <doctest.h>

#include <filesystem>
#include <numbers>
#include <string>

#include "fform/scene.hpp"
#include "fform/synth.hpp"

using namespace fform;

namespace {

const char* kTwoPeople =
    "{\"scene_id\":\"s\",\"units\":\"m\",\"n\":2}\n"
    "{\"t\":0,\"persons\":[{\"id\":0,\"x\":0,\"y\":0,\"head\":0},{\"id\":1,\"x\":1,\"y\":0,\"head\":3.14}],"
    "\"groups\":[[0,1]]}\n"
    "{\"t\":1,\"persons\":[{\"id\":0,\"x\":0,\"y\":0,\"head\":0},{\"id\":1,\"x\":1,\"y\":0,\"head\":3.14}]}\n"
    "{\"t\":2,\"persons\":[{\"id\":0,\"x\":0,\"y\":0,\"head\":0,\"body\":0.5},{\"id\":1,\"x\":1,\"y\":0,"
    "\"head\":3.14}]}\n";

std::size_t error_line(const std::string& text) {
  try {
    parse_scene_sequences(text);
  } catch (const SceneError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_CASE("well-formed file parses with every person present") {
  const auto seqs = parse_scene_sequences(kTwoPeople);
  REQUIRE(seqs.size() == 1);
  const auto& s = seqs[0];
  CHECK(s.scene_id == "s");
  CHECK(s.n == 2);
  REQUIRE(s.steps() == 3);
  for (const auto& f : s.frames) CHECK(f.persons.size() == 2);
  CHECK(s.frames[0].groups.has_value());
  CHECK_FALSE(s.frames[1].groups.has_value());
  CHECK(s.frames[2].find(0)->body_or_head() == doctest::Approx(0.5));
  CHECK(s.frames[1].find(0)->body_or_head() == 0.0);
}

TEST_CASE("invariant violations are rejected with the offending field") {
  const std::string header = "{\"scene_id\":\"s\",\"units\":\"m\",\"n\":2}\n";
  auto rec = [](const std::string& persons, double t = 0.0) {
    return "{\"t\":" + std::to_string(t) + ",\"persons\":[" + persons + "]}\n";
  };
  const std::string p0 = "{\"id\":0,\"x\":0,\"y\":0,\"head\":0}";
  CHECK_THROWS_WITH_AS(parse_scene_sequences(header + rec(p0 + "," + p0)), doctest::Contains("duplicate"), SceneError);
  CHECK_THROWS_WITH_AS(parse_scene_sequences(header + rec("{\"id\":2,\"x\":0,\"y\":0,\"head\":0}")),
                       doctest::Contains("outside [0, n)"), SceneError);
  CHECK_THROWS_WITH_AS(parse_scene_sequences(header + rec("{\"id\":0,\"x\":0,\"y\":0,\"head\":4.0}")),
                       doctest::Contains("head"), SceneError);
  CHECK_THROWS_WITH_AS(parse_scene_sequences(header + rec("{\"id\":0,\"x\":0,\"y\":0,\"head\":-3.1415926535897931}")),
                       doctest::Contains("head"), SceneError);
  CHECK_NOTHROW(parse_scene_sequences(header + rec("{\"id\":0,\"x\":0,\"y\":0,\"head\":3.1415926535897931}")));
  CHECK_THROWS_WITH_AS(parse_scene_sequences(header + rec(p0, 1.0) + rec(p0, 1.0)), doctest::Contains("increasing"),
                       SceneError);
  CHECK_THROWS_WITH_AS(
      parse_scene_sequences(header + "{\"t\":0,\"persons\":[" + p0 + "],\"groups\":[[0,1]]}\n"),
      doctest::Contains("not present"), SceneError);
  CHECK_THROWS_WITH_AS(parse_scene_sequences(header + "{\"t\":0,\"persons\":[{\"id\":0,\"x\":0,\"y\":0}]}\n"),
                       doctest::Contains("head"), SceneError);
}

TEST_CASE("parse errors carry line numbers") {
  const std::string header = "{\"scene_id\":\"s\",\"units\":\"m\",\"n\":2}\n";
  CHECK(error_line(header + "{\"t\":0,\"persons\":[}\n") == 2);
  CHECK(error_line(header + "\n{\"t\":0,\"persons\":5}\n") == 3);
  CHECK(error_line("{\"t\":0,\"persons\":[]}\n") == 1);
}

TEST_CASE("empty input is an error") {
  CHECK_THROWS_AS(parse_scene_sequences(""), SceneError);
  CHECK_THROWS_AS(parse_scene_sequences("\n\n"), SceneError);
}

TEST_CASE("missing file reports the path") {
  CHECK_THROWS_WITH_AS(load_scene_sequences("/nonexistent/scenes.jsonl"), doctest::Contains("/nonexistent"),
                       SceneError);
}

TEST_CASE("partitions are canonical and validated") {
  const GroupPartition p({{5, 3}, {1}, {4, 2}});
  CHECK(p.groups == std::vector<std::vector<PersonId>>{{1}, {2, 4}, {3, 5}});
  CHECK(p.multi_member_groups().size() == 2);
  CHECK(p.same_group(2, 4));
  CHECK_FALSE(p.same_group(1, 2));
  CHECK_THROWS(GroupPartition({{1, 2}, {2, 3}}).validate());
  CHECK_THROWS(GroupPartition(std::vector<std::vector<PersonId>>{{}}).validate());
}

TEST_CASE("affinity matrix validation") {
  AffinityMatrix a{{0, 1}, Eigen::MatrixXd::Zero(2, 2)};
  CHECK_NOTHROW(a.validate());
  a.values(0, 1) = 1.5;
  CHECK_THROWS(a.validate());
  a.values = Eigen::MatrixXd::Zero(3, 3);
  CHECK_THROWS(a.validate());
}

TEST_CASE("save then load reproduces a synthetic corpus exactly") {
  SynthConfig cfg;
  cfg.n_scenes = 5;
  cfg.steps_per_scene = 30;
  cfg.seed = 11;
  const auto seqs = generate(cfg);
  const std::string text = format_scene_sequences(seqs);
  const auto back = parse_scene_sequences(text);
  CHECK(back == seqs);
  CHECK(format_scene_sequences(back) == text);

  const auto path = std::filesystem::temp_directory_path() / "fform_scene_roundtrip.jsonl";
  save_scene_sequences(seqs, path);
  CHECK(load_scene_sequences(path) == seqs);
  std::filesystem::remove(path);
}

TEST_CASE("one-person scene writes one record per step") {
  SceneSequence s;
  s.scene_id = "solo";
  s.n = 1;
  for (int t = 0; t < 4; ++t) {
    Frame f;
    f.t = t;
    f.persons.push_back(PersonState{0, 0.1 * t, 0.0, std::numbers::pi, std::nullopt});
    s.frames.push_back(f);
  }
  const std::string text = format_scene_sequences({s});
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
  CHECK(format_scene_sequences({}).empty());
}
