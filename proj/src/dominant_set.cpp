#include "fform/dominant_set.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fform {

namespace {

constexpr int kMaxEscapes = 100;

void check_matrix(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("dominant set: matrix must be square");
  if (a.rows() == 0) throw std::invalid_argument("dominant set: matrix must have at least one node");
  if (!a.allFinite()) throw std::invalid_argument("dominant set: matrix has non-finite entries");
  if ((a.array() < 0.0).any()) throw std::invalid_argument("dominant set: matrix has negative entries");
}

Eigen::MatrixXd principal(const Eigen::MatrixXd& a, const std::vector<int>& idx) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd sub(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) sub(r, c) = a(idx[r], idx[c]);
  return sub;
}

std::vector<int> support_of(const Eigen::VectorXd& x, double cutoff) {
  std::vector<int> s;
  for (Eigen::Index k = 0; k < x.size(); ++k)
    if (x(k) > cutoff) s.push_back(static_cast<int>(k));
  return s;
}

// Moves x off a non-maximal stationary point. Returns false when x already
// satisfies the first- and second-order conditions of a local maximum.
bool escape_saddle(const Eigen::MatrixXd& w, Eigen::VectorXd& x, double cutoff) {
  const Eigen::VectorXd ax = w * x;
  const double f = x.dot(ax);
  const double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
  const double tol = 1e-9 * scale;

  // An outside node that pays more than the mean would invade the support.
  const std::vector<int> support = support_of(x, cutoff);
  int invader = -1;
  double gain = tol;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (x(k) > cutoff) continue;
    if (ax(k) - f > gain) {
      gain = ax(k) - f;
      invader = static_cast<int>(k);
    }
  }
  if (invader >= 0) {
    x(invader) = std::max(x(invader), 1e-2);
    x /= x.sum();
    return true;
  }

  if (support.size() < 2) return false;
  const auto s = static_cast<Eigen::Index>(support.size());
  const Eigen::MatrixXd sym = 0.5 * (w + w.transpose());
  const Eigen::MatrixXd b = principal(sym, support);
  const Eigen::MatrixXd proj =
      Eigen::MatrixXd::Identity(s, s) - Eigen::MatrixXd::Constant(s, s, 1.0 / static_cast<double>(s));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(proj * b * proj);
  const Eigen::Index top = s - 1;  // eigenvalues ascend
  if (eig.eigenvalues()(top) <= tol) return false;

  Eigen::VectorXd dir = eig.eigenvectors().col(top);
  for (Eigen::Index k = 0; k < s; ++k) {
    if (std::abs(dir(k)) > 1e-12) {
      if (dir(k) < 0.0) dir = -dir;
      break;
    }
  }
  double alpha = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < s; ++k)
    if (dir(k) < 0.0) alpha = std::min(alpha, x(support[k]) / -dir(k));
  if (!std::isfinite(alpha)) return false;
  for (Eigen::Index k = 0; k < s; ++k) x(support[k]) += 0.5 * alpha * dir(k);
  x = x.cwiseMax(0.0);
  x /= x.sum();
  return true;
}

}  // namespace

std::string_view to_string(Symmetrization s) {
  switch (s) {
    case Symmetrization::raw: return "raw";
    case Symmetrization::average: return "average";
    case Symmetrization::minimum: return "minimum";
    case Symmetrization::maximum: return "maximum";
  }
  return "unknown";
}

std::optional<Symmetrization> parse_symmetrization(std::string_view name) {
  for (Symmetrization s : kAllSymmetrizations)
    if (to_string(s) == name) return s;
  return std::nullopt;
}

void DSConfig::validate() const {
  if (!(convergence_tol > 0.0)) throw std::invalid_argument("DSConfig: convergence_tol must be positive");
  if (max_iterations <= 0) throw std::invalid_argument("DSConfig: max_iterations must be positive");
  if (!(affinity_threshold >= 0.0 && affinity_threshold <= 1.0))
    throw std::invalid_argument("DSConfig: affinity_threshold must lie in [0,1]");
  if (!(support_cutoff >= 0.0)) throw std::invalid_argument("DSConfig: support_cutoff must be non-negative");
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a, Symmetrization s) {
  if (a.rows() != a.cols()) throw std::invalid_argument("symmetrize: matrix must be square");
  switch (s) {
    case Symmetrization::raw: return a;
    case Symmetrization::average: return 0.5 * (a + a.transpose());
    case Symmetrization::minimum: return a.cwiseMin(a.transpose());
    case Symmetrization::maximum: return a.cwiseMax(a.transpose());
  }
  return a;
}

AffinityMatrix symmetrize(const AffinityMatrix& a, Symmetrization s) {
  return AffinityMatrix{a.person_ids, symmetrize(a.values, s)};
}

DominantSet extract_dominant_set(const Eigen::MatrixXd& a, const DSConfig& config) {
  config.validate();
  check_matrix(a);
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd w = a;
  w.diagonal().setZero();

  DominantSet out;
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  if (n == 1) {
    out.members = {0};
    out.weights = x;
    return out;
  }
  if (x.dot(w * x) <= 0.0) {
    for (Eigen::Index k = 0; k < n; ++k) out.members.push_back(static_cast<int>(k));
    out.weights = x;
    out.degenerate = true;
    return out;
  }

  int it = 0;
  for (int escapes = 0;; ++escapes) {
    while (it < config.max_iterations) {
      const Eigen::VectorXd ax = w * x;
      const double f = x.dot(ax);
      if (f <= 0.0) break;
      Eigen::VectorXd next = x.cwiseProduct(ax) / f;
      const double delta = (next - x).lpNorm<1>();
      x = std::move(next);
      ++it;
      if (delta < config.convergence_tol) break;
    }
    if (it >= config.max_iterations || escapes >= kMaxEscapes) break;
    if (!escape_saddle(w, x, config.support_cutoff)) break;
  }

  out.members = support_of(x, config.support_cutoff);
  out.weights = x;
  out.iterations = it;
  return out;
}

double mutual_affinity(const Eigen::MatrixXd& a, const Eigen::VectorXd& x) {
  Eigen::MatrixXd w = a;
  w.diagonal().setZero();
  const double total = x.sum();
  const double pairs = total * total - x.squaredNorm();
  if (pairs <= 1e-300) return 0.0;
  return x.dot(w * x) / pairs;
}

GroupPartition cluster(const AffinityMatrix& a, const DSConfig& config) {
  config.validate();
  a.validate();
  Eigen::MatrixXd w = symmetrize(a.values, config.strategy);
  w.diagonal().setZero();

  std::vector<std::vector<PersonId>> groups;
  std::vector<int> remaining(a.size());
  for (std::size_t k = 0; k < remaining.size(); ++k) remaining[k] = static_cast<int>(k);

  while (remaining.size() > 1) {
    const Eigen::MatrixXd sub = principal(w, remaining);
    const DominantSet ds = extract_dominant_set(sub, config);
    if (ds.degenerate) break;

    Eigen::VectorXd x = Eigen::VectorXd::Zero(sub.rows());
    for (int m : ds.members) x(m) = ds.weights(m);
    std::vector<PersonId> members;
    for (int m : ds.members) members.push_back(a.person_ids[remaining[m]]);

    if (members.size() >= 2 && mutual_affinity(sub, x) >= config.affinity_threshold) {
      groups.push_back(std::move(members));
    } else {
      for (PersonId id : members) groups.push_back({id});
    }

    std::vector<int> rest;
    for (int k = 0; k < static_cast<int>(remaining.size()); ++k)
      if (!std::binary_search(ds.members.begin(), ds.members.end(), k)) rest.push_back(remaining[k]);
    remaining = std::move(rest);
  }
  for (int k : remaining) groups.push_back({a.person_ids[k]});
  return GroupPartition(std::move(groups));
}

}  // namespace fform
