#ifndef FFORM_PIPELINE_HPP
#define FFORM_PIPELINE_HPP

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fform/affinity_net.hpp"
#include "fform/dominant_set.hpp"
#include "fform/features.hpp"
#include "fform/forecasting.hpp"
#include "fform/scene.hpp"

namespace fform {

enum class Split { train, val, test, all };

std::string_view to_string(Split s);
std::optional<Split> parse_split(std::string_view name);

/// Chronological split of every scene: a window belongs to the part that
/// contains its final step.
struct SplitFractions {
  double train = 0.6;
  double val = 0.2;  // the test part takes the rest

  void validate() const;
};

/// Half-open range [first, last) of window end steps for `split` in a scene
/// with `steps` frames. Ends earlier than seq_len - 1 are never used.
std::pair<int, int> end_step_range(int steps, int seq_len, Split split, const SplitFractions& fractions = {});

/// Frame range [0, last) seen by windows ending in the training part; the
/// feature scaler is fitted on it.
int training_frame_limit(int steps, const SplitFractions& fractions = {});

FeatureScaler fit_training_scaler(std::span<const SceneSequence> corpus, const SplitFractions& fractions = {});

/// One window per present focal person for every end step in [first, last),
/// visited every `stride` steps. Targets are 1 where the slot shares the
/// focal person's ground-truth group at the final step.
std::vector<TrainingWindow> make_windows(const SceneSequence& seq, int seq_len, const FeatureScaler& scaler,
                                         int first_end, int last_end, int stride = 1);

std::vector<TrainingWindow> make_split_windows(std::span<const SceneSequence> corpus, int seq_len,
                                               const FeatureScaler& scaler, Split split,
                                               const SplitFractions& fractions = {}, int stride = 1);

/// Directed affinities among the persons present at `end_step`:
/// values(r, c) is the network output for focal person_ids[r] towards
/// person_ids[c]. The diagonal is 0.
AffinityMatrix predict_affinity(const ModelParams& params, const SceneSequence& seq, int end_step, int seq_len,
                                const FeatureScaler& scaler);

struct FrameDetection {
  int step = 0;
  double t = 0.0;
  AffinityMatrix affinity;  // directed, before symmetrization
  GroupPartition partition;
};

struct SceneDetection {
  std::string scene_id;
  std::vector<FrameDetection> frames;
};

SceneDetection detect_scene(const ModelParams& params, const SceneSequence& seq, int seq_len,
                            const FeatureScaler& scaler, const DSConfig& ds, int first_end, int last_end);

/// Re-runs clustering on stored affinities, e.g. with another symmetrization.
SceneDetection recluster(const SceneDetection& detection, const DSConfig& ds);

/// Drops persons outside `keep` from every group; emptied groups vanish.
GroupPartition restrict_partition(const GroupPartition& p, std::span<const PersonId> keep);

struct ForecastInput {
  std::vector<PersonId> persons;  // present at every observed step
  std::vector<EdgeSeries> edges;
  int anchor_step = 0;
};

/// Average-symmetrized affinity series over the seq_len steps ending at
/// `anchor_step`, for persons present throughout. Each observed step needs
/// its own full input window, so anchor_step >= 2 * seq_len - 2.
ForecastInput build_forecast_input(const ModelParams& params, const SceneSequence& seq, int anchor_step,
                                   int seq_len, const FeatureScaler& scaler);

/// Ground truth at anchor + h for h = 0..horizon, restricted to `persons`.
/// Throws if a frame is missing or unlabelled.
std::vector<GroupPartition> forecast_ground_truth(const SceneSequence& seq, int anchor_step, int horizon,
                                                  std::span<const PersonId> persons);

}  // namespace fform

#endif  // FFORM_PIPELINE_HPP
