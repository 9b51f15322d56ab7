#ifndef FFORM_FEATURES_HPP
#define FFORM_FEATURES_HPP

#include <array>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fform/scene.hpp"

namespace fform {

/// Maps an angle into (-pi, pi].
double wrap_angle(double a);

/// Direction of the mean resultant vector. Throws std::domain_error when the
/// resultant length is <= 1e-12 (e.g. two exactly opposed angles).
double circular_mean(std::span<const double> angles);

// Channel layout of one pair slot. Keep FEATURES.md in sync.
enum Channel : int {
  kFocalHead = 0,  // focal head orientation, zero-referenced
  kFocalBody,      // focal body orientation (falls back to head), zero-referenced
  kDistance,       // |p_other - p_focal|
  kBearing,        // direction of other as seen from focal, zero-referenced
  kOtherHead,      // other's head orientation, zero-referenced
  kOtherBody,      // other's body orientation, zero-referenced
  kChannelCount
};

inline constexpr int kFeatureSize = kChannelCount;
inline constexpr double kAbsentValue = -1.0;

const std::array<std::string_view, kChannelCount>& channel_names();

/// Unscaled pair geometry before zero-referencing; angles are in (-pi, pi].
struct RawPairFeatures {
  double focal_head;
  double focal_body;
  double distance;
  double bearing;
  double other_head;
  double other_body;
};

RawPairFeatures raw_pair_features(const PersonState& focal, const PersonState& other);

/// Circular mean of body (fallback head) orientations of everyone in the
/// frame; 0 when the frame is empty or the mean is degenerate.
double zero_reference(const Frame& frame);

/// Min-max bounds for every channel. Orientation channels use the fixed
/// range [-pi, pi]; the distance range is fitted on training data and frozen.
struct FeatureScaler {
  double distance_min = 0.0;
  double distance_max = 1.0;

  static FeatureScaler fit(std::span<const SceneSequence> corpus);
  /// Same as fit() but restricted to frames [first, last) of every sequence.
  static FeatureScaler fit(std::span<const SceneSequence> corpus,
                           const std::vector<std::pair<int, int>>& frame_ranges);

  /// Min-max scale one raw value, clamped into [0,1].
  double scale(Channel c, double raw) const;
};

/// Inputs for one focal person over a window: frames[t] is (n-1) x N, one row
/// per non-focal person id in ascending order.
struct FeatureTensor {
  PersonId focal_id = 0;
  std::vector<PersonId> slot_ids;
  std::vector<Eigen::MatrixXd> frames;

  int steps() const { return static_cast<int>(frames.size()); }
  int slots() const { return static_cast<int>(slot_ids.size()); }
  int channels() const { return frames.empty() ? kFeatureSize : static_cast<int>(frames.front().cols()); }
};

/// (T x (n-1)) presence indicators, 1.0 where the pair is observed.
struct PresenceMask {
  Eigen::MatrixXd values;

  int steps() const { return static_cast<int>(values.rows()); }
  int slots() const { return static_cast<int>(values.cols()); }
  bool present(int t, int slot) const { return values(t, slot) > 0.5; }
};

/// Builds features for `focal` over frames [t_start, t_start + length).
/// A slot is marked absent at t when either the other person or the focal
/// person is missing from frame t; absent slots hold -1 in every channel.
std::pair<FeatureTensor, PresenceMask> build_features(const SceneSequence& seq, PersonId focal,
                                                      int t_start, int length,
                                                      const FeatureScaler& scaler);

}  // namespace fform

#endif  // FFORM_FEATURES_HPP
