#ifndef FFORM_DOMINANT_SET_HPP
#define FFORM_DOMINANT_SET_HPP

#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fform/scene.hpp"

namespace fform {

enum class Symmetrization { raw, average, minimum, maximum };

std::string_view to_string(Symmetrization s);
std::optional<Symmetrization> parse_symmetrization(std::string_view name);
inline constexpr Symmetrization kAllSymmetrizations[] = {Symmetrization::raw, Symmetrization::average,
                                                         Symmetrization::minimum, Symmetrization::maximum};

struct DSConfig {
  double affinity_threshold = 0.5;
  int max_iterations = 10000;
  double convergence_tol = 1e-6;
  double support_cutoff = 1e-4;
  Symmetrization strategy = Symmetrization::average;

  void validate() const;
};

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a, Symmetrization s);
AffinityMatrix symmetrize(const AffinityMatrix& a, Symmetrization s);

struct DominantSet {
  std::vector<int> members;  // indices into the matrix, ascending
  Eigen::VectorXd weights;   // final point on the simplex
  bool degenerate = false;   // x'Ax == 0: the dynamics could not move
  int iterations = 0;
};

/// Replicator dynamics from the simplex barycentre. When the dynamics settle
/// on a point that is not a local maximiser of x'Ax (an outside node still
/// earns more than the mean payoff, or the support face has an ascent
/// direction), the point is nudged off the saddle and iteration resumes.
/// Ascent directions are oriented towards lower indices so ties resolve to
/// the lower person id.
DominantSet extract_dominant_set(const Eigen::MatrixXd& a, const DSConfig& config);

/// Weighted mean of the off-diagonal affinities inside the support of x:
/// sum_{k!=l} x_k x_l a_kl / sum_{k!=l} x_k x_l. Zero for a single node.
double mutual_affinity(const Eigen::MatrixXd& a, const Eigen::VectorXd& x);

/// Peels dominant sets off the symmetrized matrix until no one is left.
/// Candidates whose mutual affinity falls below the threshold are emitted as
/// singletons. Every person appears in exactly one group.
GroupPartition cluster(const AffinityMatrix& a, const DSConfig& config);

}  // namespace fform

#endif  // FFORM_DOMINANT_SET_HPP
