#ifndef FFORM_FORECASTING_HPP
#define FFORM_FORECASTING_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "fform/dominant_set.hpp"
#include "fform/scene.hpp"

namespace fform {

/// Symmetrized affinity of one unordered pair over observed times.
struct EdgeSeries {
  PersonId a = 0;
  PersonId b = 0;
  std::vector<double> times;
  std::vector<double> values;

  void validate() const;
};

struct GprOptions {
  double signal_variance = 1.0;
  double noise_variance = 1e-4;
  double min_length_scale = 0.1;
  double max_length_scale = 100.0;
  int search_grid = 200;  // log-spaced starting points for the length-scale search
};

class GprError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Zero-mean GP with an RBF kernel k(t,t') = sf2 * exp(-(t-t')^2 / (2 l^2))
/// and i.i.d. Gaussian observation noise.
class GprModel {
 public:
  /// Picks the length-scale maximising the log marginal likelihood inside
  /// [min_length_scale, max_length_scale]: a log-spaced grid seeds a
  /// bracketed gradient search around every grid-local maximum. A flat
  /// likelihood resolves to the smallest length-scale.
  static GprModel fit(std::vector<double> times, std::vector<double> values, const GprOptions& options = {});
  static GprModel with_length_scale(std::vector<double> times, std::vector<double> values, double length_scale,
                                    const GprOptions& options = {});

  double length_scale() const { return length_scale_; }
  const GprOptions& options() const { return options_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }
  double log_marginal_likelihood() const { return lml_; }

  Eigen::VectorXd posterior_mean(std::span<const double> query) const;
  /// Covariance of the latent function (observation noise excluded).
  Eigen::MatrixXd posterior_covariance(std::span<const double> query) const;

 private:
  GprModel() = default;
  void factorize();

  std::vector<double> times_;
  std::vector<double> values_;
  double length_scale_ = 1.0;
  GprOptions options_;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd alpha_;
  double lml_ = 0.0;
};

/// Log marginal likelihood and its derivative with respect to log(l).
struct LikelihoodValue {
  double value;
  double d_log_length;
};
LikelihoodValue rbf_log_marginal_likelihood(std::span<const double> times, std::span<const double> values,
                                            double length_scale, const GprOptions& options);

GprModel fit_edge_gpr(const EdgeSeries& series, const GprOptions& options = {});

/// n_samples x |query| joint draws from the latent posterior. Draws are
/// clamped to [0,1] unless `clamp` is false. The posterior covariance is
/// factorised with escalating jitter (1e-10 .. 1e-6) before giving up.
Eigen::MatrixXd sample_posterior(const GprModel& model, std::span<const double> query, int n_samples,
                                 std::uint64_t seed, bool clamp = true);

struct HorizonSummary {
  double mean_f1_majority = 0.0;  // thr = 2/3
  double std_f1_majority = 0.0;
  double mean_f1_exact = 0.0;  // thr = 1
  double std_f1_exact = 0.0;
  int n_samples = 0;
};

struct HorizonForecast {
  int horizon = 0;
  std::vector<GroupPartition> samples;
  std::optional<HorizonSummary> summary;
};

struct SceneForecast {
  std::vector<PersonId> persons;
  std::vector<HorizonForecast> horizons;  // horizon 0 only when Z == 0, else 1..Z
};

/// Fits one GPR per edge, draws n_samples joint trajectories over the next
/// `horizon` steps and clusters the affinity matrix of every (step, draw).
/// `gt`, when non-empty, holds the reference partition at anchor + h for
/// h = 0..horizon and enables the F1 summary. Each edge draws from its own
/// sub-seed of `seed`, so results do not depend on edge order.
SceneForecast forecast_groups(std::span<const EdgeSeries> edges, int horizon, int n_samples,
                              const DSConfig& ds_config, std::uint64_t seed,
                              std::span<const GroupPartition> gt = {}, const GprOptions& options = {});

/// Deterministic 64-bit mixing used to derive sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace fform

#endif  // FFORM_FORECASTING_HPP
