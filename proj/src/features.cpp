#include "fform/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace fform {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double scale_angle(double a) { return (a + kPi) / kTwoPi; }
}  // namespace

double wrap_angle(double a) {
  double r = std::remainder(a, kTwoPi);
  if (r <= -kPi) r += kTwoPi;
  return r;
}

double circular_mean(std::span<const double> angles) {
  if (angles.empty()) throw std::domain_error("circular_mean: empty input");
  double s = 0.0, c = 0.0;
  for (double a : angles) {
    s += std::sin(a);
    c += std::cos(a);
  }
  s /= static_cast<double>(angles.size());
  c /= static_cast<double>(angles.size());
  if (std::hypot(s, c) <= 1e-12) throw std::domain_error("circular_mean: resultant length is degenerate");
  return wrap_angle(std::atan2(s, c));
}

const std::array<std::string_view, kChannelCount>& channel_names() {
  static const std::array<std::string_view, kChannelCount> names = {
      "focal_head", "focal_body", "distance", "bearing", "other_head", "other_body"};
  return names;
}

RawPairFeatures raw_pair_features(const PersonState& focal, const PersonState& other) {
  const double dx = other.x - focal.x;
  const double dy = other.y - focal.y;
  RawPairFeatures r{};
  r.focal_head = focal.head;
  r.focal_body = focal.body_or_head();
  r.distance = std::hypot(dx, dy);
  r.bearing = wrap_angle(std::atan2(dy, dx));
  r.other_head = other.head;
  r.other_body = other.body_or_head();
  return r;
}

double zero_reference(const Frame& frame) {
  if (frame.persons.empty()) return 0.0;
  std::vector<double> bodies;
  bodies.reserve(frame.persons.size());
  for (const auto& p : frame.persons) bodies.push_back(p.body_or_head());
  try {
    return circular_mean(bodies);
  } catch (const std::domain_error&) {
    return 0.0;
  }
}

FeatureScaler FeatureScaler::fit(std::span<const SceneSequence> corpus) {
  std::vector<std::pair<int, int>> ranges;
  for (const auto& seq : corpus) ranges.emplace_back(0, static_cast<int>(seq.steps()));
  return fit(corpus, ranges);
}

FeatureScaler FeatureScaler::fit(std::span<const SceneSequence> corpus,
                                 const std::vector<std::pair<int, int>>& frame_ranges) {
  if (frame_ranges.size() != corpus.size()) throw std::invalid_argument("FeatureScaler::fit: range count mismatch");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const auto& seq = corpus[s];
    const auto [first, last] = frame_ranges[s];
    for (int t = std::max(first, 0); t < std::min<int>(last, static_cast<int>(seq.steps())); ++t) {
      const auto& persons = seq.frames[t].persons;
      for (std::size_t a = 0; a < persons.size(); ++a)
        for (std::size_t b = a + 1; b < persons.size(); ++b) {
          const double d = std::hypot(persons[a].x - persons[b].x, persons[a].y - persons[b].y);
          lo = std::min(lo, d);
          hi = std::max(hi, d);
        }
    }
  }
  FeatureScaler s;
  if (std::isfinite(lo) && std::isfinite(hi)) {
    s.distance_min = lo;
    s.distance_max = hi;
  }
  return s;
}

double FeatureScaler::scale(Channel c, double raw) const {
  double v;
  if (c == kDistance) {
    const double span = distance_max - distance_min;
    v = span > 1e-12 ? (raw - distance_min) / span : 0.0;
  } else {
    v = scale_angle(raw);
  }
  return std::clamp(v, 0.0, 1.0);
}

std::pair<FeatureTensor, PresenceMask> build_features(const SceneSequence& seq, PersonId focal, int t_start,
                                                      int length, const FeatureScaler& scaler) {
  if (length <= 0) throw std::invalid_argument("build_features: empty window");
  if (t_start < 0 || t_start + length > static_cast<int>(seq.steps()))
    throw std::out_of_range("build_features: window outside the sequence");
  if (focal < 0 || focal >= seq.n) throw std::out_of_range("build_features: focal id outside [0, n)");
  if (!seq.frames[t_start + length - 1].present(focal))
    throw std::invalid_argument("build_features: focal person absent at the final window step");

  FeatureTensor feats;
  feats.focal_id = focal;
  for (PersonId id = 0; id < seq.n; ++id)
    if (id != focal) feats.slot_ids.push_back(id);
  const int slots = feats.slots();

  PresenceMask mask;
  mask.values = Eigen::MatrixXd::Zero(length, slots);
  feats.frames.assign(length, Eigen::MatrixXd::Constant(slots, kFeatureSize, kAbsentValue));

  for (int t = 0; t < length; ++t) {
    const Frame& frame = seq.frames[t_start + t];
    const PersonState* me = frame.find(focal);
    if (!me) continue;
    const double ref = zero_reference(frame);
    for (int k = 0; k < slots; ++k) {
      const PersonState* other = frame.find(feats.slot_ids[k]);
      if (!other) continue;
      const RawPairFeatures raw = raw_pair_features(*me, *other);
      auto row = feats.frames[t].row(k);
      row(kFocalHead) = scaler.scale(kFocalHead, wrap_angle(raw.focal_head - ref));
      row(kFocalBody) = scaler.scale(kFocalBody, wrap_angle(raw.focal_body - ref));
      row(kDistance) = scaler.scale(kDistance, raw.distance);
      row(kBearing) = scaler.scale(kBearing, wrap_angle(raw.bearing - ref));
      row(kOtherHead) = scaler.scale(kOtherHead, wrap_angle(raw.other_head - ref));
      row(kOtherBody) = scaler.scale(kOtherBody, wrap_angle(raw.other_body - ref));
      mask.values(t, k) = 1.0;
    }
  }
  return {std::move(feats), std::move(mask)};
}

}  // namespace fform
