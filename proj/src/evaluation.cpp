#include "fform/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <tuple>

namespace fform {

namespace {

std::size_t intersection_size(const std::vector<PersonId>& a, const std::vector<PersonId>& b) {
  std::size_t n = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++n;
      ++ia;
      ++ib;
    }
  }
  return n;
}

}  // namespace

void GroupMatchConfig::validate() const {
  if (!(thr > 0.0 && thr <= 1.0)) throw std::invalid_argument("group match threshold must lie in (0, 1]");
}

GroupF1 f1_from_counts(int tp, int fp, int fn) {
  GroupF1 r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  if (tp + fp + fn == 0) {
    r.precision = r.recall = r.f1 = 1.0;
    return r;
  }
  r.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  r.f1 = 2.0 * tp / (2.0 * tp + fp + fn);
  return r;
}

GroupF1 group_f1(const GroupPartition& detected, const GroupPartition& gt, const GroupMatchConfig& cfg) {
  cfg.validate();
  detected.validate();
  gt.validate();
  const auto det = detected.multi_member_groups();
  const auto ref = gt.multi_member_groups();
  const bool exact = cfg.thr >= 1.0;

  // (intersection, gt min id, det min id, gt index, det index)
  std::vector<std::tuple<std::size_t, PersonId, PersonId, std::size_t, std::size_t>> candidates;
  for (std::size_t g = 0; g < ref.size(); ++g) {
    const auto need = static_cast<std::size_t>(std::ceil(cfg.thr * static_cast<double>(ref[g].size()) - 1e-9));
    for (std::size_t d = 0; d < det.size(); ++d) {
      const std::size_t common = intersection_size(det[d], ref[g]);
      if (common < need) continue;
      if (exact && det[d] != ref[g]) continue;
      candidates.emplace_back(common, ref[g].front(), det[d].front(), g, d);
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });

  std::vector<bool> gt_used(ref.size(), false), det_used(det.size(), false);
  int tp = 0;
  for (const auto& [common, gmin, dmin, g, d] : candidates) {
    if (gt_used[g] || det_used[d]) continue;
    gt_used[g] = det_used[d] = true;
    ++tp;
  }
  return f1_from_counts(tp, static_cast<int>(det.size()) - tp, static_cast<int>(ref.size()) - tp);
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Mann-Whitney U from mid-ranks of tied blocks.
  double pos_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t stop = start;
    while (stop < order.size() && scores[order[stop]] == scores[order[start]]) ++stop;
    const double mid_rank = 0.5 * static_cast<double>(start + 1 + stop);
    for (std::size_t k = start; k < stop; ++k) {
      const int y = labels[order[k]];
      if (y != 0 && y != 1) throw std::invalid_argument("auc: labels must be 0 or 1");
      if (y == 1) {
        pos_rank_sum += mid_rank;
        ++positives;
      }
    }
    start = stop;
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) throw std::invalid_argument("auc: undefined without both classes");
  const double np = static_cast<double>(positives);
  const double u = pos_rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(negatives));
}

std::vector<DynamicsScore> scene_dynamics(std::span<const GroupPartition> partitions) {
  using GroupSet = std::set<std::vector<PersonId>>;
  std::vector<DynamicsScore> out(partitions.size());
  GroupSet seen;  // every group observed at some earlier step
  GroupSet previous;
  for (std::size_t t = 0; t < partitions.size(); ++t) {
    GroupSet current;
    for (const auto& g : partitions[t].multi_member_groups()) current.insert(g);
    if (t > 0) {
      DynamicsScore& d = out[t];
      for (const auto& g : current) {
        if (previous.count(g)) continue;
        if (seen.count(g)) {
          ++d.reformations;
        } else {
          ++d.formations;
        }
      }
      for (const auto& g : previous)
        if (!current.count(g)) ++d.breaks;
    }
    seen.insert(current.begin(), current.end());
    previous = std::move(current);
  }
  return out;
}

}  // namespace fform
