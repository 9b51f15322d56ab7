#include "fform/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fform {

namespace {

using nlohmann::json;

std::string with_line(const std::string& what, std::size_t line) {
  if (line == 0) return what;
  return "line " + std::to_string(line) + ": " + what;
}

bool angle_in_range(double a) {
  return std::isfinite(a) && a > -std::numbers::pi && a <= std::numbers::pi;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const json& require(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SceneError(std::string("missing field '") + key + "'", line);
  return *it;
}

double require_number(const json& obj, const char* key, std::size_t line) {
  const json& v = require(obj, key, line);
  if (!v.is_number()) throw SceneError(std::string("field '") + key + "' must be a number", line);
  return v.get<double>();
}

PersonId require_id(const json& v, const char* what, std::size_t line) {
  if (!v.is_number_integer()) throw SceneError(std::string(what) + " must be an integer", line);
  return v.get<PersonId>();
}

}  // namespace

SceneError::SceneError(const std::string& what, std::size_t line)
    : std::runtime_error(with_line(what, line)), line_(line) {}

GroupPartition::GroupPartition(std::vector<std::vector<PersonId>> g) : groups(std::move(g)) {
  for (auto& members : groups) std::sort(members.begin(), members.end());
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) {
    if (a.empty() || b.empty()) return a.size() < b.size();
    return a.front() < b.front();
  });
}

void GroupPartition::validate() const {
  std::set<PersonId> seen;
  for (const auto& members : groups) {
    if (members.empty()) throw SceneError("groups: empty group");
    for (PersonId id : members) {
      if (!seen.insert(id).second)
        throw SceneError("groups: person " + std::to_string(id) + " appears in more than one group");
    }
  }
}

std::vector<std::vector<PersonId>> GroupPartition::multi_member_groups() const {
  std::vector<std::vector<PersonId>> out;
  for (const auto& g : groups)
    if (g.size() >= 2) out.push_back(g);
  return out;
}

std::optional<std::size_t> GroupPartition::group_of(PersonId id) const {
  for (std::size_t k = 0; k < groups.size(); ++k)
    if (std::binary_search(groups[k].begin(), groups[k].end(), id)) return k;
  return std::nullopt;
}

bool GroupPartition::same_group(PersonId a, PersonId b) const {
  auto ga = group_of(a);
  return ga && ga == group_of(b);
}

void AffinityMatrix::validate() const {
  const auto p = static_cast<Eigen::Index>(person_ids.size());
  if (values.rows() != p || values.cols() != p)
    throw SceneError("affinity matrix: dimension does not match person count");
  for (Eigen::Index r = 0; r < p; ++r)
    for (Eigen::Index c = 0; c < p; ++c) {
      if (r == c) continue;
      double v = values(r, c);
      if (!std::isfinite(v) || v < 0.0 || v > 1.0)
        throw SceneError("affinity matrix: off-diagonal entry outside [0,1]");
    }
}

const PersonState* Frame::find(PersonId id) const {
  for (const auto& p : persons)
    if (p.id == id) return &p;
  return nullptr;
}

std::vector<PersonId> Frame::present_ids() const {
  std::vector<PersonId> ids;
  ids.reserve(persons.size());
  for (const auto& p : persons) ids.push_back(p.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

void SceneSequence::validate() const {
  if (n <= 0) throw SceneError("n: must be a positive integer");
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const Frame& f = frames[k];
    const std::string where = "frame " + std::to_string(k) + ": ";
    if (!std::isfinite(f.t)) throw SceneError(where + "t: not finite");
    if (k > 0 && !(f.t > frames[k - 1].t)) throw SceneError(where + "t: timesteps must be strictly increasing");
    std::set<PersonId> ids;
    for (const auto& p : f.persons) {
      if (p.id < 0 || p.id >= n)
        throw SceneError(where + "id: person " + std::to_string(p.id) + " outside [0, n)");
      if (!ids.insert(p.id).second)
        throw SceneError(where + "id: duplicate person " + std::to_string(p.id));
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw SceneError(where + "x/y: position not finite");
      if (!angle_in_range(p.head)) throw SceneError(where + "head: angle outside (-pi, pi]");
      if (p.body && !angle_in_range(*p.body)) throw SceneError(where + "body: angle outside (-pi, pi]");
    }
    if (f.groups) {
      f.groups->validate();
      for (const auto& g : f.groups->groups)
        for (PersonId id : g)
          if (!ids.count(id))
            throw SceneError(where + "groups: person " + std::to_string(id) + " is not present in the frame");
    }
  }
}

std::vector<SceneSequence> parse_scene_sequences(const std::string& text) {
  std::vector<SceneSequence> out;
  std::vector<std::size_t> first_line;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool any_content = false;

  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    any_content = true;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw SceneError(std::string("parse error: ") + e.what(), lineno);
    }
    if (!j.is_object()) throw SceneError("parse error: expected a JSON object", lineno);

    if (j.contains("scene_id")) {
      SceneSequence seq;
      const json& sid = j["scene_id"];
      if (!sid.is_string()) throw SceneError("field 'scene_id' must be a string", lineno);
      seq.scene_id = sid.get<std::string>();
      if (j.contains("units")) {
        if (!j["units"].is_string()) throw SceneError("field 'units' must be a string", lineno);
        seq.units = j["units"].get<std::string>();
      }
      const json& n = require(j, "n", lineno);
      if (!n.is_number_integer()) throw SceneError("field 'n' must be an integer", lineno);
      seq.n = n.get<int>();
      if (seq.n <= 0) throw SceneError("n: must be a positive integer", lineno);
      out.push_back(std::move(seq));
      first_line.push_back(lineno);
      continue;
    }

    if (out.empty()) throw SceneError("record line before any scene header", lineno);
    Frame frame;
    frame.t = require_number(j, "t", lineno);
    const json& persons = require(j, "persons", lineno);
    if (!persons.is_array()) throw SceneError("field 'persons' must be an array", lineno);
    for (const json& pj : persons) {
      if (!pj.is_object()) throw SceneError("persons: entries must be objects", lineno);
      PersonState p;
      p.id = require_id(require(pj, "id", lineno), "persons.id", lineno);
      p.x = require_number(pj, "x", lineno);
      p.y = require_number(pj, "y", lineno);
      p.head = require_number(pj, "head", lineno);
      if (pj.contains("body") && !pj["body"].is_null()) p.body = require_number(pj, "body", lineno);
      frame.persons.push_back(p);
    }
    if (j.contains("groups") && !j["groups"].is_null()) {
      const json& gj = j["groups"];
      if (!gj.is_array()) throw SceneError("field 'groups' must be an array of arrays", lineno);
      std::vector<std::vector<PersonId>> groups;
      for (const json& g : gj) {
        if (!g.is_array()) throw SceneError("field 'groups' must be an array of arrays", lineno);
        std::vector<PersonId> members;
        for (const json& id : g) members.push_back(require_id(id, "groups member", lineno));
        groups.push_back(std::move(members));
      }
      frame.groups = GroupPartition(std::move(groups));
    }
    out.back().frames.push_back(std::move(frame));
  }

  if (!any_content) throw SceneError("empty scene file");

  for (std::size_t k = 0; k < out.size(); ++k) {
    try {
      out[k].validate();
    } catch (const SceneError& e) {
      throw SceneError("scene '" + out[k].scene_id + "' (header at line " + std::to_string(first_line[k]) +
                       "): " + e.what());
    }
  }
  return out;
}

std::vector<SceneSequence> load_scene_sequences(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SceneError("cannot open scene file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scene_sequences(ss.str());
}

std::string format_scene_sequences(const std::vector<SceneSequence>& seqs) {
  std::string out;
  for (const auto& seq : seqs) {
    seq.validate();
    out += "{\"scene_id\":" + json(seq.scene_id).dump() + ",\"units\":" + json(seq.units).dump() +
           ",\"n\":" + std::to_string(seq.n) + "}\n";
    for (const auto& f : seq.frames) {
      out += "{\"t\":" + fmt17(f.t) + ",\"persons\":[";
      for (std::size_t k = 0; k < f.persons.size(); ++k) {
        const auto& p = f.persons[k];
        if (k) out += ',';
        out += "{\"id\":" + std::to_string(p.id) + ",\"x\":" + fmt17(p.x) + ",\"y\":" + fmt17(p.y) +
               ",\"head\":" + fmt17(p.head);
        if (p.body) out += ",\"body\":" + fmt17(*p.body);
        out += '}';
      }
      out += ']';
      if (f.groups) {
        out += ",\"groups\":[";
        for (std::size_t g = 0; g < f.groups->groups.size(); ++g) {
          if (g) out += ',';
          out += '[';
          const auto& members = f.groups->groups[g];
          for (std::size_t m = 0; m < members.size(); ++m) {
            if (m) out += ',';
            out += std::to_string(members[m]);
          }
          out += ']';
        }
        out += ']';
      }
      out += "}\n";
    }
  }
  return out;
}

void save_scene_sequences(const std::vector<SceneSequence>& seqs, const std::filesystem::path& path) {
  const std::string text = format_scene_sequences(seqs);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SceneError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw SceneError("write failed for '" + path.string() + "'");
}

}  // namespace fform
