#ifndef FFORM_REPORT_HPP
#define FFORM_REPORT_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fform/evaluation.hpp"
#include "fform/forecasting.hpp"
#include "fform/pipeline.hpp"
#include "fform/scene.hpp"

namespace fform {

// Detection files: {"format": "fform-partitions", "scenes": [{"scene_id",
// "frames": [{"step", "t", "person_ids", "affinity", "groups"}]}]}.
std::string detections_to_string(std::span<const SceneDetection> scenes);
std::vector<SceneDetection> detections_from_string(const std::string& text);

struct ThresholdScore {
  double thr = 0.0;
  GroupF1 score;
};

struct SceneEvaluation {
  std::string scene_id;
  int frames = 0;
  std::vector<ThresholdScore> scores;  // counts summed over the scene's frames
  int dynamics = 0;                    // sum of D over evaluated frames
};

struct DynamicsBin {
  int d = 0;
  int frames = 0;
  std::vector<ThresholdScore> scores;
};

struct EvaluationReport {
  std::vector<double> thresholds;
  std::vector<SceneEvaluation> scenes;
  std::vector<ThresholdScore> corpus;  // counts summed over every frame
  std::optional<double> auc;           // directed pairs, same-group label
  int auc_pairs = 0;
  std::vector<DynamicsBin> by_dynamics;  // F1 and frame count per D value

  const GroupF1& corpus_score(double thr) const;
};

/// Scores detections against ground truth in `gt`, matched by scene id and
/// step. D is computed on the full ground-truth sequence of each scene.
EvaluationReport evaluate(std::span<const SceneDetection> detections, std::span<const SceneSequence> gt,
                          std::span<const double> thresholds);

std::string evaluation_to_json(const EvaluationReport& r);
/// One row per scene plus a final "corpus" row.
std::string evaluation_to_csv(const EvaluationReport& r);
std::string evaluation_to_text(const EvaluationReport& r);

struct ForecastRow {
  int horizon = 0;
  int n_samples = 0;
  int n_scenes = 0;
  double mean_f1_thr23 = 0.0;
  double mean_f1_thr1 = 0.0;
  // Pooled over every (scene, sample) pair.
  double std_thr23 = 0.0;
  double std_thr1 = 0.0;
  // Mean over scenes of the spread across samples.
  double std_samples_thr23 = 0.0;
  double std_samples_thr1 = 0.0;
  // Spread of the per-scene means.
  double std_scenes_thr23 = 0.0;
  double std_scenes_thr1 = 0.0;
};

struct ScenePartitions {
  std::string scene_id;
  int anchor_step = 0;
  SceneForecast forecast;
  std::vector<GroupPartition> gt;  // anchor + h, h = 0..horizon
};

struct ForecastReport {
  std::vector<ForecastRow> rows;
};

ForecastReport summarize_forecasts(std::span<const ScenePartitions> scenes);
std::string forecast_to_json(const ForecastReport& r, std::span<const ScenePartitions> dump = {});
std::string forecast_to_text(const ForecastReport& r);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace fform

#endif  // FFORM_REPORT_HPP
