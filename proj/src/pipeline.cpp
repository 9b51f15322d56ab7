#include "fform/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fform {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
    case Split::all:
      return "all";
  }
  return "unknown";
}

std::optional<Split> parse_split(std::string_view name) {
  for (Split s : {Split::train, Split::val, Split::test, Split::all})
    if (to_string(s) == name) return s;
  return std::nullopt;
}

void SplitFractions::validate() const {
  if (!(train > 0.0) || !(val >= 0.0) || !(train + val < 1.0))
    throw std::invalid_argument("split fractions need train > 0, val >= 0 and train + val < 1");
}

namespace {

int boundary(int steps, double fraction) { return static_cast<int>(std::floor(fraction * steps + 1e-9)); }

}  // namespace

std::pair<int, int> end_step_range(int steps, int seq_len, Split split, const SplitFractions& fractions) {
  fractions.validate();
  if (seq_len <= 0) throw std::invalid_argument("end_step_range: seq_len must be positive");
  const int tr = boundary(steps, fractions.train);
  const int va = boundary(steps, fractions.train + fractions.val);
  int first = 0, last = steps;
  switch (split) {
    case Split::train:
      last = tr;
      break;
    case Split::val:
      first = tr;
      last = va;
      break;
    case Split::test:
      first = va;
      break;
    case Split::all:
      break;
  }
  first = std::max(first, seq_len - 1);
  return {first, std::max(first, last)};
}

int training_frame_limit(int steps, const SplitFractions& fractions) {
  fractions.validate();
  return boundary(steps, fractions.train);
}

FeatureScaler fit_training_scaler(std::span<const SceneSequence> corpus, const SplitFractions& fractions) {
  std::vector<std::pair<int, int>> ranges;
  for (const auto& seq : corpus)
    ranges.emplace_back(0, training_frame_limit(static_cast<int>(seq.steps()), fractions));
  return FeatureScaler::fit(corpus, ranges);
}

std::vector<TrainingWindow> make_windows(const SceneSequence& seq, int seq_len, const FeatureScaler& scaler,
                                         int first_end, int last_end, int stride) {
  if (stride <= 0) throw std::invalid_argument("make_windows: stride must be positive");
  std::vector<TrainingWindow> out;
  first_end = std::max(first_end, seq_len - 1);
  last_end = std::min(last_end, static_cast<int>(seq.steps()));
  for (int e = first_end; e < last_end; e += stride) {
    const Frame& frame = seq.frames[e];
    if (!frame.groups) throw std::invalid_argument("make_windows: frame without ground-truth groups");
    for (const PersonState& p : frame.persons) {
      auto [feats, mask] = build_features(seq, p.id, e - seq_len + 1, seq_len, scaler);
      Eigen::VectorXd targets = Eigen::VectorXd::Zero(feats.slots());
      for (int k = 0; k < feats.slots(); ++k)
        if (mask.present(seq_len - 1, k) && frame.groups->same_group(p.id, feats.slot_ids[k])) targets(k) = 1.0;
      out.push_back(TrainingWindow{std::move(feats), std::move(mask), std::move(targets)});
    }
  }
  return out;
}

std::vector<TrainingWindow> make_split_windows(std::span<const SceneSequence> corpus, int seq_len,
                                               const FeatureScaler& scaler, Split split,
                                               const SplitFractions& fractions, int stride) {
  std::vector<TrainingWindow> out;
  for (const auto& seq : corpus) {
    const auto [first, last] = end_step_range(static_cast<int>(seq.steps()), seq_len, split, fractions);
    auto w = make_windows(seq, seq_len, scaler, first, last, stride);
    std::move(w.begin(), w.end(), std::back_inserter(out));
  }
  return out;
}

AffinityMatrix predict_affinity(const ModelParams& params, const SceneSequence& seq, int end_step, int seq_len,
                                const FeatureScaler& scaler) {
  if (end_step < seq_len - 1 || end_step >= static_cast<int>(seq.steps()))
    throw std::out_of_range("predict_affinity: no full window ends at step " + std::to_string(end_step));
  AffinityMatrix a;
  a.person_ids = seq.frames[end_step].present_ids();
  const auto p = static_cast<Eigen::Index>(a.size());
  a.values = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index r = 0; r < p; ++r) {
    const PersonId focal = a.person_ids[r];
    auto [feats, mask] = build_features(seq, focal, end_step - seq_len + 1, seq_len, scaler);
    const AffinityVector out = forward(params, feats, mask);
    for (Eigen::Index c = 0; c < p; ++c) {
      if (c == r) continue;
      const PersonId other = a.person_ids[c];
      // slot index of `other` among the ascending non-focal ids
      const int slot = other < focal ? other : other - 1;
      a.values(r, c) = out.values(slot);
    }
  }
  return a;
}

SceneDetection detect_scene(const ModelParams& params, const SceneSequence& seq, int seq_len,
                            const FeatureScaler& scaler, const DSConfig& ds, int first_end, int last_end) {
  SceneDetection out;
  out.scene_id = seq.scene_id;
  first_end = std::max(first_end, seq_len - 1);
  last_end = std::min(last_end, static_cast<int>(seq.steps()));
  for (int e = first_end; e < last_end; ++e) {
    FrameDetection f;
    f.step = e;
    f.t = seq.frames[e].t;
    f.affinity = predict_affinity(params, seq, e, seq_len, scaler);
    f.partition = cluster(f.affinity, ds);
    out.frames.push_back(std::move(f));
  }
  return out;
}

SceneDetection recluster(const SceneDetection& detection, const DSConfig& ds) {
  SceneDetection out = detection;
  for (auto& f : out.frames) f.partition = cluster(f.affinity, ds);
  return out;
}

GroupPartition restrict_partition(const GroupPartition& p, std::span<const PersonId> keep) {
  std::vector<std::vector<PersonId>> groups;
  for (const auto& g : p.groups) {
    std::vector<PersonId> kept;
    for (PersonId id : g)
      if (std::find(keep.begin(), keep.end(), id) != keep.end()) kept.push_back(id);
    if (!kept.empty()) groups.push_back(std::move(kept));
  }
  return GroupPartition(std::move(groups));
}

ForecastInput build_forecast_input(const ModelParams& params, const SceneSequence& seq, int anchor_step,
                                   int seq_len, const FeatureScaler& scaler) {
  const int first = anchor_step - seq_len + 1;
  if (first < seq_len - 1 || anchor_step >= static_cast<int>(seq.steps()))
    throw std::out_of_range("build_forecast_input: anchor step " + std::to_string(anchor_step) +
                            " leaves no room for " + std::to_string(seq_len) + " observed affinity matrices");
  ForecastInput in;
  in.anchor_step = anchor_step;
  for (PersonId id : seq.frames[anchor_step].present_ids()) {
    bool always = true;
    for (int s = first; s <= anchor_step && always; ++s) always = seq.frames[s].present(id);
    if (always) in.persons.push_back(id);
  }
  const std::size_t p = in.persons.size();
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j) in.edges.push_back(EdgeSeries{in.persons[i], in.persons[j], {}, {}});

  for (int s = first; s <= anchor_step; ++s) {
    const AffinityMatrix a = predict_affinity(params, seq, s, seq_len, scaler);
    auto index = [&](PersonId id) {
      return static_cast<Eigen::Index>(std::find(a.person_ids.begin(), a.person_ids.end(), id) - a.person_ids.begin());
    };
    for (auto& e : in.edges) {
      const Eigen::Index ia = index(e.a), ib = index(e.b);
      e.times.push_back(static_cast<double>(s));
      e.values.push_back(0.5 * (a.values(ia, ib) + a.values(ib, ia)));
    }
  }
  return in;
}

std::vector<GroupPartition> forecast_ground_truth(const SceneSequence& seq, int anchor_step, int horizon,
                                                  std::span<const PersonId> persons) {
  if (anchor_step + horizon >= static_cast<int>(seq.steps()))
    throw std::out_of_range("forecast_ground_truth: horizon runs past the end of the scene");
  std::vector<GroupPartition> out;
  for (int h = 0; h <= horizon; ++h) {
    const Frame& f = seq.frames[anchor_step + h];
    if (!f.groups) throw std::invalid_argument("forecast_ground_truth: frame without ground-truth groups");
    out.push_back(restrict_partition(*f.groups, persons));
  }
  return out;
}

}  // namespace fform
