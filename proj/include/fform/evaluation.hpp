#ifndef FFORM_EVALUATION_HPP
#define FFORM_EVALUATION_HPP

#include <span>
#include <vector>

#include "fform/scene.hpp"

namespace fform {

/// Fraction of a ground-truth group that a detection has to recover.
struct GroupMatchConfig {
  double thr = 2.0 / 3.0;
  void validate() const;
};

inline constexpr double kThrMajority = 2.0 / 3.0;
inline constexpr double kThrExact = 1.0;

struct GroupF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int tp = 0;
  int fp = 0;
  int fn = 0;
};

/// Group-level precision/recall/F1. Singletons are dropped from both sides.
/// A detection matches a ground-truth group g when it shares at least
/// ceil(thr * |g|) members; at thr == 1 the sets must be identical.
/// Matching is greedy one-to-one by intersection size, ties broken by the
/// smaller ground-truth then detected member id. F1 is 1 when both sides are
/// empty. Throws SceneError for overlapping groups.
GroupF1 group_f1(const GroupPartition& detected, const GroupPartition& gt, const GroupMatchConfig& cfg);

/// F1 from pooled counts.
GroupF1 f1_from_counts(int tp, int fp, int fn);

/// ROC AUC as the Mann-Whitney statistic with ties counted half.
/// Throws std::invalid_argument unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);

struct DynamicsScore {
  int formations = 0;
  int breaks = 0;
  int reformations = 0;
  int total() const { return formations + breaks + reformations; }
  bool operator==(const DynamicsScore&) const = default;
};

/// Per-step formation/break/reformation counts over groups of two or more
/// members, identified by exact member set. The first step only establishes
/// history and scores zero.
std::vector<DynamicsScore> scene_dynamics(std::span<const GroupPartition> partitions);

}  // namespace fform

#endif  // FFORM_EVALUATION_HPP
