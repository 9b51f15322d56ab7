#include "fform/forecasting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <string>

#include "fform/evaluation.hpp"

namespace fform {

namespace {

Eigen::MatrixXd rbf(std::span<const double> a, std::span<const double> b, double length_scale, double sf2) {
  Eigen::MatrixXd k(a.size(), b.size());
  const double inv = 1.0 / (2.0 * length_scale * length_scale);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double d = a[i] - b[j];
      k(i, j) = sf2 * std::exp(-d * d * inv);
    }
  return k;
}

void check_series(std::span<const double> times, std::span<const double> values) {
  if (times.size() != values.size()) throw GprError("gpr: times and values differ in length");
  if (times.size() < 2) throw GprError("gpr: at least two observations are required");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!std::isfinite(times[k]) || !std::isfinite(values[k])) throw GprError("gpr: non-finite observation");
    if (k > 0 && !(times[k] > times[k - 1])) throw GprError("gpr: times must be strictly increasing");
  }
}

GroupPartition restrict_to(const GroupPartition& p, const std::vector<PersonId>& persons) {
  std::vector<std::vector<PersonId>> groups;
  for (const auto& g : p.groups) {
    std::vector<PersonId> kept;
    for (PersonId id : g)
      if (std::binary_search(persons.begin(), persons.end(), id)) kept.push_back(id);
    if (!kept.empty()) groups.push_back(std::move(kept));
  }
  return GroupPartition(std::move(groups));
}

HorizonSummary summarize(const std::vector<GroupPartition>& samples, const GroupPartition& gt) {
  HorizonSummary s;
  s.n_samples = static_cast<int>(samples.size());
  std::vector<double> maj, ex;
  for (const auto& p : samples) {
    maj.push_back(group_f1(p, gt, {kThrMajority}).f1);
    ex.push_back(group_f1(p, gt, {kThrExact}).f1);
  }
  auto moments = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    sd = std::sqrt(var / static_cast<double>(v.size()));
  };
  moments(maj, s.mean_f1_majority, s.std_f1_majority);
  moments(ex, s.mean_f1_exact, s.std_f1_exact);
  return s;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void EdgeSeries::validate() const {
  if (a == b) throw GprError("edge series: endpoints must differ");
  check_series(times, values);
}

LikelihoodValue rbf_log_marginal_likelihood(std::span<const double> times, std::span<const double> values,
                                            double length_scale, const GprOptions& options) {
  const auto n = static_cast<Eigen::Index>(times.size());
  const Eigen::MatrixXd kf = rbf(times, times, length_scale, options.signal_variance);
  Eigen::MatrixXd k = kf;
  k.diagonal().array() += options.noise_variance;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success)
    return {-std::numeric_limits<double>::infinity(), 0.0};
  const Eigen::Map<const Eigen::VectorXd> y(values.data(), n);
  const Eigen::VectorXd alpha = llt.solve(y);
  const Eigen::MatrixXd l = llt.matrixL();
  const double logdet_half = l.diagonal().array().log().sum();
  const double value =
      -0.5 * y.dot(alpha) - logdet_half - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

  Eigen::MatrixXd dk(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double r = (times[i] - times[j]) / length_scale;
      dk(i, j) = kf(i, j) * r * r;
    }
  const Eigen::MatrixXd kinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  const double deriv = 0.5 * ((alpha * alpha.transpose() - kinv).cwiseProduct(dk)).sum();
  return {value, deriv};
}

GprModel GprModel::with_length_scale(std::vector<double> times, std::vector<double> values, double length_scale,
                                     const GprOptions& options) {
  check_series(times, values);
  if (!(length_scale > 0.0)) throw GprError("gpr: length-scale must be positive");
  if (!(options.signal_variance > 0.0) || !(options.noise_variance >= 1e-8 * (1.0 - 1e-12)))
    throw GprError("gpr: signal variance must be positive and noise variance at least 1e-8");
  GprModel m;
  m.times_ = std::move(times);
  m.values_ = std::move(values);
  m.length_scale_ = length_scale;
  m.options_ = options;
  m.factorize();
  return m;
}

GprModel GprModel::fit(std::vector<double> times, std::vector<double> values, const GprOptions& options) {
  check_series(times, values);
  if (!(options.min_length_scale > 0.0) || !(options.max_length_scale > options.min_length_scale) ||
      options.search_grid < 2)
    throw GprError("gpr: invalid length-scale search bounds");

  const double lo = std::log(options.min_length_scale);
  const double hi = std::log(options.max_length_scale);
  const int g = options.search_grid;
  std::vector<double> grid(g), score(g);
  for (int k = 0; k < g; ++k) {
    grid[k] = lo + (hi - lo) * k / (g - 1);
    score[k] = rbf_log_marginal_likelihood(times, values, std::exp(grid[k]), options).value;
  }

  const auto [min_it, max_it] = std::minmax_element(score.begin(), score.end());
  if (!std::isfinite(*max_it)) throw GprError("gpr: kernel matrix is not positive definite for any length-scale");
  if (*max_it - *min_it < 1e-12) return with_length_scale(std::move(times), std::move(values), options.min_length_scale, options);

  // Grid-local maxima, best first.
  std::vector<int> peaks;
  for (int k = 0; k < g; ++k) {
    const bool left = k == 0 || score[k] >= score[k - 1];
    const bool right = k == g - 1 || score[k] >= score[k + 1];
    if (left && right) peaks.push_back(k);
  }
  std::stable_sort(peaks.begin(), peaks.end(), [&](int a, int b) { return score[a] > score[b]; });
  if (peaks.size() > 3) peaks.resize(3);

  double best_theta = grid[peaks.front()];
  double best_value = score[peaks.front()];
  for (int k : peaks) {
    // Bisection on the sign of the gradient inside the neighbouring cells.
    double a = grid[std::max(k - 1, 0)];
    double b = grid[std::min(k + 1, g - 1)];
    const double da = rbf_log_marginal_likelihood(times, values, std::exp(a), options).d_log_length;
    const double db = rbf_log_marginal_likelihood(times, values, std::exp(b), options).d_log_length;
    double theta = grid[k];
    if (da > 0.0 && db < 0.0) {
      for (int it = 0; it < 80 && b - a > 1e-12; ++it) {
        const double mid = 0.5 * (a + b);
        if (rbf_log_marginal_likelihood(times, values, std::exp(mid), options).d_log_length > 0.0) {
          a = mid;
        } else {
          b = mid;
        }
      }
      theta = 0.5 * (a + b);
    } else if (k == g - 1 && db >= 0.0) {
      theta = hi;
    } else if (k == 0 && da <= 0.0) {
      theta = lo;
    }
    const double v = rbf_log_marginal_likelihood(times, values, std::exp(theta), options).value;
    if (v > best_value) {
      best_value = v;
      best_theta = theta;
    }
  }
  const double ell = std::clamp(std::exp(best_theta), options.min_length_scale, options.max_length_scale);
  return with_length_scale(std::move(times), std::move(values), ell, options);
}

void GprModel::factorize() {
  Eigen::MatrixXd k = rbf(times_, times_, length_scale_, options_.signal_variance);
  k.diagonal().array() += options_.noise_variance;
  chol_.compute(k);
  if (chol_.info() != Eigen::Success) throw GprError("gpr: kernel matrix is not positive definite");
  const Eigen::Map<const Eigen::VectorXd> y(values_.data(), static_cast<Eigen::Index>(values_.size()));
  alpha_ = chol_.solve(y);
  lml_ = rbf_log_marginal_likelihood(times_, values_, length_scale_, options_).value;
}

Eigen::VectorXd GprModel::posterior_mean(std::span<const double> query) const {
  return rbf(times_, query, length_scale_, options_.signal_variance).transpose() * alpha_;
}

Eigen::MatrixXd GprModel::posterior_covariance(std::span<const double> query) const {
  const Eigen::MatrixXd kq = rbf(times_, query, length_scale_, options_.signal_variance);
  const Eigen::MatrixXd v = chol_.matrixL().solve(kq);
  return rbf(query, query, length_scale_, options_.signal_variance) - v.transpose() * v;
}

GprModel fit_edge_gpr(const EdgeSeries& series, const GprOptions& options) {
  series.validate();
  return GprModel::fit(series.times, series.values, options);
}

Eigen::MatrixXd sample_posterior(const GprModel& model, std::span<const double> query, int n_samples,
                                 std::uint64_t seed, bool clamp) {
  if (n_samples < 1) throw GprError("sample_posterior: n_samples must be at least 1");
  const auto m = static_cast<Eigen::Index>(query.size());
  const Eigen::VectorXd mean = model.posterior_mean(query);
  const Eigen::MatrixXd cov = model.posterior_covariance(query);

  Eigen::MatrixXd l;
  bool ok = false;
  for (double jitter = 1e-10; jitter <= 1e-6 * 1.0001; jitter *= 10.0) {
    Eigen::MatrixXd c = cov;
    c.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() == Eigen::Success) {
      l = llt.matrixL();
      ok = true;
      break;
    }
  }
  if (!ok) throw GprError("sample_posterior: posterior covariance is not positive definite even with jitter 1e-6");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(n_samples, m);
  Eigen::VectorXd z(m);
  for (int s = 0; s < n_samples; ++s) {
    for (Eigen::Index k = 0; k < m; ++k) z(k) = normal(rng);
    out.row(s) = (mean + l * z).transpose();
  }
  if (clamp) out = out.cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

SceneForecast forecast_groups(std::span<const EdgeSeries> edges, int horizon, int n_samples,
                              const DSConfig& ds_config, std::uint64_t seed, std::span<const GroupPartition> gt,
                              const GprOptions& options) {
  if (horizon < 0) throw std::invalid_argument("forecast: horizon must be non-negative");
  if (n_samples < 1) throw std::invalid_argument("forecast: n_samples must be at least 1");
  if (!gt.empty() && gt.size() < static_cast<std::size_t>(horizon) + 1)
    throw std::invalid_argument("forecast: reference partitions must cover horizons 0..Z");
  ds_config.validate();

  SceneForecast out;
  std::map<std::pair<PersonId, PersonId>, const EdgeSeries*> by_pair;
  double anchor = -std::numeric_limits<double>::infinity();
  for (const auto& e : edges) {
    e.validate();
    const auto key = std::minmax(e.a, e.b);
    if (!by_pair.emplace(key, &e).second)
      throw std::invalid_argument("forecast: duplicate edge series for pair (" + std::to_string(key.first) + ", " +
                                  std::to_string(key.second) + ")");
    out.persons.push_back(e.a);
    out.persons.push_back(e.b);
    anchor = std::max(anchor, e.times.back());
  }
  std::sort(out.persons.begin(), out.persons.end());
  out.persons.erase(std::unique(out.persons.begin(), out.persons.end()), out.persons.end());
  const auto p = static_cast<Eigen::Index>(out.persons.size());
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = i + 1; j < p; ++j)
      if (!by_pair.count({out.persons[i], out.persons[j]}))
        throw std::invalid_argument("forecast: missing edge series for pair (" + std::to_string(out.persons[i]) +
                                    ", " + std::to_string(out.persons[j]) + ")");

  auto reference = [&](int h) { return restrict_to(gt[h], out.persons); };

  if (horizon == 0) {
    AffinityMatrix a{out.persons, Eigen::MatrixXd::Zero(p, p)};
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = i + 1; j < p; ++j)
        a.values(i, j) = a.values(j, i) = std::clamp(by_pair.at({out.persons[i], out.persons[j]})->values.back(), 0.0, 1.0);
    HorizonForecast hf;
    hf.samples.push_back(cluster(a, ds_config));
    if (!gt.empty()) hf.summary = summarize(hf.samples, reference(0));
    out.horizons.push_back(std::move(hf));
    return out;
  }

  std::vector<double> query(horizon);
  for (int h = 0; h < horizon; ++h) query[h] = anchor + (h + 1);

  std::map<std::pair<PersonId, PersonId>, Eigen::MatrixXd> draws;
  for (const auto& [key, e] : by_pair) {
    const GprModel model = fit_edge_gpr(*e, options);
    const std::uint64_t salt = (static_cast<std::uint64_t>(key.first) << 32) ^ static_cast<std::uint32_t>(key.second);
    draws.emplace(key, sample_posterior(model, query, n_samples, mix_seed(seed, salt)));
  }

  for (int h = 1; h <= horizon; ++h) {
    HorizonForecast hf;
    hf.horizon = h;
    for (int s = 0; s < n_samples; ++s) {
      AffinityMatrix a{out.persons, Eigen::MatrixXd::Zero(p, p)};
      for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = i + 1; j < p; ++j)
          a.values(i, j) = a.values(j, i) = draws.at({out.persons[i], out.persons[j]})(s, h - 1);
      hf.samples.push_back(cluster(a, ds_config));
    }
    if (!gt.empty()) hf.summary = summarize(hf.samples, reference(h));
    out.horizons.push_back(std::move(hf));
  }
  return out;
}

}  // namespace fform
