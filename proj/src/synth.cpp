#include "fform/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "fform/features.hpp"
#include "fform/forecasting.hpp"

namespace fform {

namespace {

constexpr int kNone = -1;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kArrivalTolerance = 0.1;
constexpr double kWalkingThreshold = 0.3;

struct Vec2 {
  double x = 0.0, y = 0.0;
};

double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Person {
  bool present = false;
  int group = kNone;  // assigned group, possibly still walking there
  bool arrived = true;
  int cell = kNone;  // own cell when alone
  Vec2 pos;
  Vec2 offset;  // standing spot inside an own cell
  double heading = 0.0;
  double idle_heading = 0.0;
};

struct Group {
  int cell = kNone;
  Vec2 center;
  std::vector<int> members;
};

class SceneSimulator {
 public:
  SceneSimulator(const SynthConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), rng_(seed), side_(cfg.cells_per_side()), cell_size_(cfg.arena_size / side_),
        people_(cfg.n_people), cell_taken_(side_ * side_, false) {}

  SceneSequence run(const std::string& scene_id) {
    SceneSequence seq;
    seq.scene_id = scene_id;
    seq.units = "m";
    seq.n = cfg_.n_people;
    initial_layout();
    std::bernoulli_distribution event(std::clamp(cfg_.event_rate / 100.0, 0.0, 1.0));
    for (int step = 0; step < cfg_.steps_per_scene; ++step) {
      if (step > 0) {
        if (cfg_.event_rate > 0.0 && event(rng_)) trigger_event();
        advance();
      }
      seq.frames.push_back(record(static_cast<double>(step)));
    }
    return seq;
  }

 private:
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  double gauss(double sd) { return sd > 0.0 ? std::normal_distribution<double>(0.0, sd)(rng_) : 0.0; }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng_)];
  }

  Vec2 cell_center(int cell) const {
    return {(cell % side_ + 0.5) * cell_size_, (cell / side_ + 0.5) * cell_size_};
  }

  int take_free_cell() {
    std::vector<int> free;
    for (int c = 0; c < static_cast<int>(cell_taken_.size()); ++c)
      if (!cell_taken_[c]) free.push_back(c);
    const int c = pick(free);
    cell_taken_[c] = true;
    return c;
  }

  Vec2 standing_offset() {
    const double r = 0.25 * cfg_.o_space_radius;
    return {uniform(-r, r), uniform(-r, r)};
  }

  int new_group(int cell) {
    const int id = next_group_++;
    Group g;
    g.cell = cell;
    g.center = cell_center(cell);
    groups_[id] = g;
    return id;
  }

  void make_alone_at(int p, int cell) {
    Person& q = people_[p];
    q.group = kNone;
    q.cell = cell;
    q.offset = standing_offset();
    q.idle_heading = q.heading;
  }

  // Takes p out of its group or cell. A group left with one member turns that
  // member into a lone person who inherits the group's cell.
  void detach(int p) {
    Person& q = people_[p];
    if (q.group != kNone) {
      auto it = groups_.find(q.group);
      auto& members = it->second.members;
      members.erase(std::find(members.begin(), members.end(), p));
      if (members.size() == 1) {
        const int last = members.front();
        const int cell = it->second.cell;
        groups_.erase(it);
        make_alone_at(last, cell);
      } else if (members.empty()) {
        cell_taken_[it->second.cell] = false;
        groups_.erase(it);
      }
      q.group = kNone;
    } else if (q.cell != kNone) {
      cell_taken_[q.cell] = false;
    }
    q.cell = kNone;
  }

  void join(int p, int g) {
    detach(p);
    Person& q = people_[p];
    q.group = g;
    q.arrived = false;
    groups_.at(g).members.push_back(p);
  }

  void go_alone(int p) {
    detach(p);
    make_alone_at(p, take_free_cell());
    people_[p].arrived = false;
  }

  void initial_layout() {
    std::vector<int> ids(cfg_.n_people);
    for (int k = 0; k < cfg_.n_people; ++k) ids[k] = k;
    std::shuffle(ids.begin(), ids.end(), rng_);
    const int present = std::uniform_int_distribution<int>(cfg_.min_people, cfg_.n_people)(rng_);
    ids.resize(present);
    std::sort(ids.begin(), ids.end());
    std::shuffle(ids.begin(), ids.end(), rng_);

    std::discrete_distribution<int> size_dist(cfg_.group_size_distribution.begin(),
                                              cfg_.group_size_distribution.end());
    std::size_t next = 0;
    while (next < ids.size()) {
      const int size = std::min<int>(size_dist(rng_) + 1, static_cast<int>(ids.size() - next));
      const int cell = take_free_cell();
      if (size == 1) {
        const int p = ids[next++];
        people_[p].present = true;
        make_alone_at(p, cell);
        people_[p].heading = people_[p].idle_heading = uniform(-std::numbers::pi, std::numbers::pi);
        people_[p].pos = target_of(p);
        continue;
      }
      const int g = new_group(cell);
      const double phase = uniform(0.0, kTwoPi);
      for (int k = 0; k < size; ++k) {
        const int p = ids[next++];
        Person& q = people_[p];
        q.present = true;
        q.group = g;
        q.arrived = true;
        groups_[g].members.push_back(p);
        const double a = phase + kTwoPi * k / size;
        q.pos = {groups_[g].center.x + cfg_.o_space_radius * std::cos(a),
                 groups_[g].center.y + cfg_.o_space_radius * std::sin(a)};
      }
    }
    for (int p = 0; p < cfg_.n_people; ++p)
      if (people_[p].present) people_[p].heading = facing(p);
    remember_groups();
  }

  // Slot targets keep members in their current angular order around the
  // centre, spaced evenly.
  std::map<int, Vec2> group_targets(const Group& g) const {
    const int m = static_cast<int>(g.members.size());
    std::vector<std::pair<double, int>> order;
    for (int p : g.members) {
      const Vec2 pos = people_[p].pos;
      order.emplace_back(std::atan2(pos.y - g.center.y, pos.x - g.center.x), p);
    }
    std::sort(order.begin(), order.end());
    double s = 0.0, c = 0.0;
    for (int k = 0; k < m; ++k) {
      const double a = order[k].first - kTwoPi * k / m;
      s += std::sin(a);
      c += std::cos(a);
    }
    const double phase = std::hypot(s, c) > 1e-12 ? std::atan2(s, c) : order.front().first;
    std::map<int, Vec2> out;
    for (int k = 0; k < m; ++k) {
      const double a = phase + kTwoPi * k / m;
      out[order[k].second] = {g.center.x + cfg_.o_space_radius * std::cos(a),
                              g.center.y + cfg_.o_space_radius * std::sin(a)};
    }
    return out;
  }

  Vec2 target_of(int p) const {
    const Person& q = people_[p];
    if (q.group != kNone) return group_targets(groups_.at(q.group)).at(p);
    const Vec2 c = cell_center(q.cell);
    return {c.x + q.offset.x, c.y + q.offset.y};
  }

  double facing(int p) const {
    const Person& q = people_[p];
    if (q.group == kNone) return q.idle_heading;
    const Vec2 c = groups_.at(q.group).center;
    return std::atan2(c.y - q.pos.y, c.x - q.pos.x);
  }

  void advance() {
    // Slow drift of group centres inside their cells.
    const double wander = 0.25 * cfg_.cell_margin;
    for (auto& [id, g] : groups_) {
      const Vec2 home = cell_center(g.cell);
      Vec2 next{g.center.x + gauss(0.02), g.center.y + gauss(0.02)};
      if (distance(next, home) <= wander) g.center = next;
    }

    std::vector<Vec2> targets(cfg_.n_people);
    for (int p = 0; p < cfg_.n_people; ++p)
      if (people_[p].present) targets[p] = target_of(p);
    for (int p = 0; p < cfg_.n_people; ++p) {
      Person& q = people_[p];
      if (!q.present) continue;
      const Vec2 t = targets[p];
      const double d = distance(q.pos, t);
      if (d <= cfg_.walking_speed) {
        q.pos = t;
      } else {
        q.pos.x += (t.x - q.pos.x) / d * cfg_.walking_speed;
        q.pos.y += (t.y - q.pos.y) / d * cfg_.walking_speed;
      }
      const double left = distance(q.pos, t);
      if (left < kArrivalTolerance) q.arrived = true;
      if (q.group == kNone) q.idle_heading = wrap_angle(q.idle_heading + gauss(0.05));
      if (d > kWalkingThreshold && left > kWalkingThreshold) {
        q.heading = std::atan2(t.y - q.pos.y, t.x - q.pos.x);
      } else {
        q.heading = facing(p);
      }
    }
    remember_groups();
  }

  std::vector<std::vector<PersonId>> labelled_groups() const {
    std::vector<std::vector<PersonId>> out;
    for (const auto& [id, g] : groups_) {
      std::vector<PersonId> members;
      for (int p : g.members)
        if (people_[p].arrived) members.push_back(p);
      if (members.size() >= 2) {
        std::sort(members.begin(), members.end());
        out.push_back(std::move(members));
      }
    }
    return out;
  }

  void remember_groups() {
    for (auto& g : labelled_groups()) history_.insert(std::move(g));
  }

  Frame record(double t) {
    Frame f;
    f.t = t;
    std::vector<std::vector<PersonId>> groups = labelled_groups();
    std::set<PersonId> grouped;
    for (const auto& g : groups) grouped.insert(g.begin(), g.end());
    for (int p = 0; p < cfg_.n_people; ++p) {
      const Person& q = people_[p];
      if (!q.present) continue;
      PersonState s;
      s.id = p;
      s.x = q.pos.x + gauss(cfg_.position_noise_std);
      s.y = q.pos.y + gauss(cfg_.position_noise_std);
      s.body = wrap_angle(q.heading + gauss(cfg_.orientation_noise_std));
      s.head = wrap_angle(q.heading + gauss(2.0 * cfg_.orientation_noise_std));
      f.persons.push_back(s);
      if (!grouped.count(p)) groups.push_back({p});
    }
    f.groups = GroupPartition(std::move(groups));
    return f;
  }

  bool settled(int p) const { return people_[p].present && people_[p].arrived; }

  std::vector<int> settled_members() const {
    std::vector<int> out;
    for (const auto& [id, g] : groups_)
      for (int p : g.members)
        if (settled(p)) out.push_back(p);
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<int> settled_alone() const {
    std::vector<int> out;
    for (int p = 0; p < cfg_.n_people; ++p)
      if (settled(p) && people_[p].group == kNone) out.push_back(p);
    return out;
  }

  std::vector<std::vector<PersonId>> reformable() const {
    std::set<std::vector<PersonId>> current;
    for (const auto& [id, g] : groups_) {
      std::vector<PersonId> m(g.members.begin(), g.members.end());
      std::sort(m.begin(), m.end());
      current.insert(m);
    }
    std::vector<std::vector<PersonId>> out;
    for (const auto& h : history_) {
      if (current.count(h)) continue;
      if (std::all_of(h.begin(), h.end(), [&](int p) { return settled(p); })) out.push_back(h);
    }
    return out;
  }

  void trigger_event() {
    enum Kind { kSwitch, kDissolve, kForm, kReform, kExit, kEnter };
    const auto members = settled_members();
    const auto alone = settled_alone();
    const auto reform = reformable();
    std::vector<int> dissolvable;
    for (const auto& [id, g] : groups_)
      if (std::all_of(g.members.begin(), g.members.end(), [&](int p) { return settled(p); })) dissolvable.push_back(id);
    std::vector<int> absent;
    int present = 0;
    for (int p = 0; p < cfg_.n_people; ++p) {
      if (people_[p].present) {
        ++present;
      } else {
        absent.push_back(p);
      }
    }

    std::vector<double> weights = {
        members.empty() ? 0.0 : 0.35,
        dissolvable.empty() ? 0.0 : 0.15,
        alone.size() < 2 ? 0.0 : 0.2,
        reform.empty() ? 0.0 : 0.2,
        (alone.empty() || present <= 3) ? 0.0 : cfg_.exit_probability,
        absent.empty() ? 0.0 : cfg_.exit_probability,
    };
    if (std::all_of(weights.begin(), weights.end(), [](double w) { return w == 0.0; })) return;
    const int kind = std::discrete_distribution<int>(weights.begin(), weights.end())(rng_);

    switch (kind) {
      case kSwitch: {
        const int p = pick(members);
        const int from = people_[p].group;
        std::vector<int> other_groups;
        for (const auto& [id, g] : groups_)
          if (id != from && g.members.size() < 5) other_groups.push_back(id);
        std::vector<int> partners;
        for (int q : alone) partners.push_back(q);
        const double r = uniform(0.0, 1.0);
        if (!other_groups.empty() && r < 0.5) {
          join(p, pick(other_groups));
        } else if (!partners.empty() && r < 0.8) {
          const int q = pick(partners);
          const int cell = people_[q].cell;
          people_[q].cell = kNone;  // the cell passes to the new group
          const int g = new_group(cell);
          people_[q].group = g;
          people_[q].arrived = false;
          groups_[g].members.push_back(q);
          join(p, g);
        } else {
          go_alone(p);
        }
        break;
      }
      case kDissolve: {
        const int g = pick(dissolvable);
        const std::vector<int> leaving = groups_.at(g).members;
        for (std::size_t k = 0; k + 1 < leaving.size(); ++k) go_alone(leaving[k]);
        break;
      }
      case kForm: {
        std::vector<int> pool = alone;
        std::shuffle(pool.begin(), pool.end(), rng_);
        const int host = pool[0], guest = pool[1];
        const int cell = people_[host].cell;
        people_[host].cell = kNone;
        const int g = new_group(cell);
        people_[host].group = g;
        people_[host].arrived = false;
        groups_[g].members.push_back(host);
        join(guest, g);
        break;
      }
      case kReform: {
        const auto& set = pick(reform);
        for (int p : set) detach(p);
        const int g = new_group(take_free_cell());
        for (int p : set) {
          people_[p].group = g;
          people_[p].arrived = false;
          groups_[g].members.push_back(p);
        }
        break;
      }
      case kExit: {
        const int p = pick(alone);
        detach(p);
        people_[p].present = false;
        break;
      }
      case kEnter: {
        const int p = pick(absent);
        Person& q = people_[p];
        q.present = true;
        make_alone_at(p, take_free_cell());
        q.heading = q.idle_heading = uniform(-std::numbers::pi, std::numbers::pi);
        q.pos = target_of(p);
        q.arrived = true;
        break;
      }
      default:
        break;
    }
  }

  const SynthConfig& cfg_;
  std::mt19937_64 rng_;
  int side_;
  double cell_size_;
  std::vector<Person> people_;
  std::vector<bool> cell_taken_;
  std::map<int, Group> groups_;
  int next_group_ = 0;
  std::set<std::vector<PersonId>> history_;
};

}  // namespace

int SynthConfig::cells_per_side() const {
  const double cell = 2.0 * (o_space_radius + cell_margin);
  return cell > 0.0 ? static_cast<int>(std::floor(arena_size / cell)) : 0;
}

void SynthConfig::validate() const {
  if (n_people <= 0 || n_scenes <= 0 || steps_per_scene <= 0)
    throw std::invalid_argument("synth: n_people, n_scenes and steps_per_scene must be positive");
  if (min_people <= 0 || min_people > n_people)
    throw std::invalid_argument("synth: min_people must lie in [1, n_people]");
  if (!(o_space_radius > 0.0) || !(cell_margin > 0.0) || !(arena_size > 0.0) || !(walking_speed > 0.0))
    throw std::invalid_argument("synth: radius, margin, arena size and walking speed must be positive");
  if (!(position_noise_std >= 0.0) || !(orientation_noise_std >= 0.0) || !(event_rate >= 0.0) ||
      !(exit_probability >= 0.0))
    throw std::invalid_argument("synth: noise levels, event_rate and exit_probability must be non-negative");
  if (group_size_distribution.empty() ||
      std::any_of(group_size_distribution.begin(), group_size_distribution.end(), [](double w) { return w < 0.0; }) ||
      std::all_of(group_size_distribution.begin(), group_size_distribution.end(), [](double w) { return w == 0.0; }))
    throw std::invalid_argument("synth: group_size_distribution needs non-negative weights with a positive sum");
  const int cells = cells_per_side() * cells_per_side();
  if (cells < n_people)
    throw std::invalid_argument("synth: infeasible layout, the arena holds " + std::to_string(cells) +
                                " cells but " + std::to_string(n_people) + " people may each need one");
}

std::vector<SceneSequence> generate(const SynthConfig& config) {
  config.validate();
  std::vector<SceneSequence> out;
  out.reserve(config.n_scenes);
  for (int s = 0; s < config.n_scenes; ++s) {
    SceneSimulator sim(config, mix_seed(config.seed, static_cast<std::uint64_t>(s)));
    char id[32];
    std::snprintf(id, sizeof(id), "synth-%04d", s);
    out.push_back(sim.run(id));
  }
  return out;
}

SceneSequence subsample(const SceneSequence& seq, int factor) {
  if (factor < 1) throw std::invalid_argument("subsample: factor must be at least 1");
  SceneSequence out = seq;
  out.frames.clear();
  for (std::size_t k = 0; k < seq.frames.size(); k += factor) out.frames.push_back(seq.frames[k]);
  return out;
}

}  // namespace fform
