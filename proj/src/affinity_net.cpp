#include "fform/affinity_net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace fform {

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Eigen::MatrixXd logistic(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

void check_shapes(const ModelParams& params, const FeatureTensor& features, const PresenceMask& mask) {
  if (features.steps() == 0) throw std::invalid_argument("forward: empty window");
  if (mask.steps() != features.steps() || mask.slots() != features.slots())
    throw std::invalid_argument("forward: mask shape does not match the feature tensor");
  for (const auto& f : features.frames)
    if (f.rows() != features.slots() || f.cols() != params.input_size)
      throw std::invalid_argument("forward: feature width does not match the model input size");
  if (params.gate_weights.rows() != 4 * params.hidden_size || params.gate_weights.cols() != params.concat_size())
    throw std::invalid_argument("forward: malformed gate weights");
}

// Intermediates of one recurrent step; rows are slots.
struct StepCache {
  Eigen::VectorXd prev_mask;  // presence attached to h_prev
  double present = 0.0;       // sum of prev_mask
  Eigen::MatrixXd h_prev, c_prev;
  Eigen::MatrixXd masked;     // g
  Eigen::RowVectorXd pooled;  // K
  Eigen::MatrixXd mixed;      // o
  Eigen::MatrixXd input;      // [v; o; h_prev]
  Eigen::MatrixXd f, i, og, cand;
  Eigen::MatrixXd c, h;
};

struct Rollout {
  std::vector<StepCache> steps;
  Eigen::VectorXd affinity;
  std::vector<bool> valid;
};

Rollout rollout(const ModelParams& p, const FeatureTensor& features, const PresenceMask& mask) {
  check_shapes(p, features, mask);
  const int S = features.slots();
  const int H = p.hidden_size;
  const int N = p.input_size;
  const int T = features.steps();
  const double lambda = p.lambda();

  Rollout r;
  r.steps.resize(T);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(S, H);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(S, H);

  for (int t = 0; t < T; ++t) {
    StepCache& sc = r.steps[t];
    // h_t pairs with the presence of the frame it summarises; h_0 has none.
    sc.prev_mask = t == 0 ? Eigen::VectorXd::Zero(S) : Eigen::VectorXd(mask.values.row(t - 1).transpose());
    sc.present = sc.prev_mask.sum();
    sc.h_prev = h;
    sc.c_prev = c;
    sc.masked = sc.prev_mask.asDiagonal() * h;
    sc.pooled = sc.present > 0.0 ? Eigen::RowVectorXd(sc.masked.colwise().sum() / sc.present)
                                 : Eigen::RowVectorXd::Zero(H);
    sc.mixed = (1.0 - lambda) * sc.masked;
    sc.mixed.rowwise() += lambda * sc.pooled;

    sc.input.resize(S, N + 2 * H);
    sc.input << features.frames[t], sc.mixed, h;
    Eigen::MatrixXd z = sc.input * p.gate_weights.transpose();
    z.rowwise() += p.gate_bias.transpose();

    sc.f = logistic(z.middleCols(ModelParams::kForget * H, H));
    sc.i = logistic(z.middleCols(ModelParams::kInput * H, H));
    sc.og = logistic(z.middleCols(ModelParams::kOutput * H, H));
    sc.cand = z.middleCols(ModelParams::kCell * H, H).array().tanh().matrix();
    sc.c = sc.f.cwiseProduct(c) + sc.i.cwiseProduct(sc.cand);
    sc.h = sc.og.cwiseProduct(sc.c.array().tanh().matrix());
    h = sc.h;
    c = sc.c;
  }

  Eigen::VectorXd pre = h * p.head_weights.transpose();
  pre.array() += p.head_bias;
  r.affinity = pre.unaryExpr([](double v) { return logistic(v); });
  r.valid.resize(S);
  for (int k = 0; k < S; ++k) r.valid[k] = mask.present(T - 1, k);
  return r;
}

}  // namespace

double ModelParams::lambda() const { return logistic(lambda_raw); }

ModelParams ModelParams::zeros(int input_size, int hidden_size) {
  if (input_size <= 0 || hidden_size <= 0) throw std::invalid_argument("ModelParams: sizes must be positive");
  ModelParams p;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  p.gate_weights = Eigen::MatrixXd::Zero(4 * hidden_size, input_size + 2 * hidden_size);
  p.gate_bias = Eigen::VectorXd::Zero(4 * hidden_size);
  p.head_weights = Eigen::RowVectorXd::Zero(hidden_size);
  p.head_bias = 0.0;
  p.lambda_raw = 0.0;
  return p;
}

ModelParams ModelParams::initialize(int input_size, int hidden_size, std::uint64_t seed) {
  ModelParams p = zeros(input_size, hidden_size);
  std::mt19937_64 rng(seed);
  const double gate_bound = 1.0 / std::sqrt(static_cast<double>(p.concat_size()));
  std::uniform_real_distribution<double> gate_dist(-gate_bound, gate_bound);
  for (Eigen::Index r = 0; r < p.gate_weights.rows(); ++r)
    for (Eigen::Index c = 0; c < p.gate_weights.cols(); ++c) p.gate_weights(r, c) = gate_dist(rng);
  const double head_bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  std::uniform_real_distribution<double> head_dist(-head_bound, head_bound);
  for (Eigen::Index k = 0; k < p.head_weights.size(); ++k) p.head_weights(k) = head_dist(rng);
  p.gate_bias.segment(kForget * hidden_size, hidden_size).setOnes();
  return p;
}

Eigen::Index ModelParams::parameter_count() const {
  return gate_weights.size() + gate_bias.size() + head_weights.size() + 2;
}

Eigen::VectorXd ModelParams::to_vector() const {
  Eigen::VectorXd flat(parameter_count());
  Eigen::Index o = 0;
  flat.segment(o, gate_weights.size()) = Eigen::Map<const Eigen::VectorXd>(gate_weights.data(), gate_weights.size());
  o += gate_weights.size();
  flat.segment(o, gate_bias.size()) = gate_bias;
  o += gate_bias.size();
  flat.segment(o, head_weights.size()) = head_weights.transpose();
  o += head_weights.size();
  flat(o++) = head_bias;
  flat(o++) = lambda_raw;
  return flat;
}

void ModelParams::assign(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count()) throw std::invalid_argument("ModelParams::assign: size mismatch");
  Eigen::Index o = 0;
  Eigen::Map<Eigen::VectorXd>(gate_weights.data(), gate_weights.size()) = flat.segment(o, gate_weights.size());
  o += gate_weights.size();
  gate_bias = flat.segment(o, gate_bias.size());
  o += gate_bias.size();
  head_weights = flat.segment(o, head_weights.size()).transpose();
  o += head_weights.size();
  head_bias = flat(o++);
  lambda_raw = flat(o++);
}

bool ModelParams::operator==(const ModelParams& o) const {
  return input_size == o.input_size && hidden_size == o.hidden_size && gate_weights == o.gate_weights &&
         gate_bias == o.gate_bias && head_weights == o.head_weights && head_bias == o.head_bias &&
         lambda_raw == o.lambda_raw;
}

AffinityVector forward(const ModelParams& params, const FeatureTensor& features, const PresenceMask& mask) {
  Rollout r = rollout(params, features, mask);
  return AffinityVector{features.slot_ids, std::move(r.affinity), std::move(r.valid)};
}

double loss(std::span<const AffinityVector> predicted, std::span<const Eigen::VectorXd> targets) {
  if (predicted.empty()) throw std::invalid_argument("loss: empty batch");
  if (predicted.size() != targets.size()) throw std::invalid_argument("loss: batch size mismatch");
  double total = 0.0;
  for (std::size_t b = 0; b < predicted.size(); ++b) {
    const auto& a = predicted[b];
    const auto& y = targets[b];
    if (a.values.size() != y.size() || a.valid.size() != static_cast<std::size_t>(y.size()))
      throw std::invalid_argument("loss: prediction and target lengths differ");
    for (Eigen::Index k = 0; k < y.size(); ++k) {
      if (!a.valid[k]) continue;
      const double d = a.values(k) - y(k);
      total += d * d;
    }
  }
  return total;
}

double loss_and_gradient(const ModelParams& p, const TrainingWindow& w, ModelParams& grad) {
  const Rollout r = rollout(p, w.features, w.mask);
  const int S = w.features.slots();
  const int H = p.hidden_size;
  const int N = p.input_size;
  const double lambda = p.lambda();
  if (w.targets.size() != S) throw std::invalid_argument("loss_and_gradient: target length mismatch");

  double total = 0.0;
  const Eigen::MatrixXd& hT = r.steps.back().h;
  Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(S, H);
  for (int k = 0; k < S; ++k) {
    if (!r.valid[k]) continue;
    const double a = r.affinity(k);
    const double diff = a - w.targets(k);
    total += diff * diff;
    const double dpre = 2.0 * diff * a * (1.0 - a);
    grad.head_weights += dpre * hT.row(k);
    grad.head_bias += dpre;
    dh.row(k) += dpre * p.head_weights;
  }

  Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(S, H);
  Eigen::MatrixXd dz(S, 4 * H);
  double dlambda = 0.0;
  for (int t = static_cast<int>(r.steps.size()) - 1; t >= 0; --t) {
    const StepCache& sc = r.steps[t];
    const Eigen::ArrayXXd tc = sc.c.array().tanh();
    const Eigen::ArrayXXd dog = dh.array() * tc;
    dc.array() += dh.array() * sc.og.array() * (1.0 - tc.square());

    const Eigen::ArrayXXd f = sc.f.array(), in = sc.i.array(), og = sc.og.array(), cand = sc.cand.array();
    dz.middleCols(ModelParams::kForget * H, H) = (dc.array() * sc.c_prev.array() * f * (1.0 - f)).matrix();
    dz.middleCols(ModelParams::kInput * H, H) = (dc.array() * cand * in * (1.0 - in)).matrix();
    dz.middleCols(ModelParams::kOutput * H, H) = (dog * og * (1.0 - og)).matrix();
    dz.middleCols(ModelParams::kCell * H, H) = (dc.array() * in * (1.0 - cand.square())).matrix();
    dc = (dc.array() * f).matrix();

    grad.gate_weights.noalias() += dz.transpose() * sc.input;
    grad.gate_bias += dz.colwise().sum().transpose();
    const Eigen::MatrixXd dx = dz * p.gate_weights;

    const Eigen::MatrixXd dmixed = dx.middleCols(N, H);
    Eigen::MatrixXd dh_prev = dx.rightCols(H);

    Eigen::MatrixXd pooled_minus_masked = -sc.masked;
    pooled_minus_masked.rowwise() += sc.pooled;
    dlambda += dmixed.cwiseProduct(pooled_minus_masked).sum();
    Eigen::MatrixXd dmasked = (1.0 - lambda) * dmixed;
    if (sc.present > 0.0) {
      const Eigen::RowVectorXd dpooled = lambda * dmixed.colwise().sum();
      dmasked.rowwise() += dpooled / sc.present;
    }
    dh_prev += sc.prev_mask.asDiagonal() * dmasked;
    dh = std::move(dh_prev);
  }
  grad.lambda_raw += dlambda * lambda * (1.0 - lambda);
  return total;
}

double batch_loss(const ModelParams& params, std::span<const TrainingWindow> batch) {
  double total = 0.0;
  for (const auto& w : batch) {
    const AffinityVector a = forward(params, w.features, w.mask);
    for (Eigen::Index k = 0; k < w.targets.size(); ++k) {
      if (!a.valid[k]) continue;
      const double d = a.values(k) - w.targets(k);
      total += d * d;
    }
  }
  return total;
}

TrainResult train(std::span<const TrainingWindow> train_set, std::span<const TrainingWindow> val_set,
                  const TrainConfig& cfg, const std::function<void(const EpochLog&)>& on_epoch) {
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  if (cfg.epochs <= 0 || cfg.batch_size <= 0 || cfg.hidden_size <= 0 || !(cfg.learning_rate > 0.0))
    throw std::invalid_argument("train: epochs, batch size, hidden size and learning rate must be positive");

  const int input_size = train_set.front().features.channels();
  std::seed_seq init_seq{cfg.seed, std::uint64_t{0x1234}};
  std::seed_seq order_seq{cfg.seed, std::uint64_t{0x5678}};
  std::mt19937_64 init_rng(init_seq);
  std::mt19937_64 order_rng(order_seq);

  ModelParams params = ModelParams::initialize(input_size, cfg.hidden_size, init_rng());
  Eigen::VectorXd theta = params.to_vector();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step = 0;

  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t per_epoch =
      cfg.windows_per_epoch == 0 ? order.size() : std::min(order.size(), cfg.windows_per_epoch);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < per_epoch; start += cfg.batch_size) {
      const std::size_t stop = std::min(per_epoch, start + static_cast<std::size_t>(cfg.batch_size));
      ModelParams grad = ModelParams::zeros(input_size, cfg.hidden_size);
      for (std::size_t b = start; b < stop; ++b) epoch_loss += loss_and_gradient(params, train_set[order[b]], grad);

      Eigen::VectorXd g = grad.to_vector() / static_cast<double>(stop - start);
      if (!g.allFinite()) {
        std::ostringstream msg;
        msg << "training diverged: non-finite gradient at epoch " << epoch << ", step " << step + 1;
        throw TrainingDiverged(msg.str());
      }
      const double norm = g.norm();
      if (norm > cfg.clip_norm) g *= cfg.clip_norm / norm;

      ++step;
      m = beta1 * m + (1.0 - beta1) * g;
      v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      theta.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
      params.assign(theta);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = epoch_loss / static_cast<double>(per_epoch);
    log.val_loss = val_set.empty() ? log.train_loss
                                   : batch_loss(params, val_set) / static_cast<double>(val_set.size());
    if (!std::isfinite(log.train_loss) || !std::isfinite(log.val_loss)) {
      std::ostringstream msg;
      msg << "training diverged: loss is NaN/inf at epoch " << epoch << " (train " << log.train_loss << ", val "
          << log.val_loss << ")";
      throw TrainingDiverged(msg.str());
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
    if (log.val_loss < best) {
      best = log.val_loss;
      result.params = params;
      result.best_epoch = epoch;
    }
  }
  return result;
}

namespace {

// Plain-loop rollout in extended precision. Central differences of a double
// loss lose about 1e-11 to cancellation, which swamps tiny gradients.
long double extended_batch_loss(const ModelParams& p, std::span<const TrainingWindow> batch) {
  using L = long double;
  const int H = p.hidden_size;
  const int N = p.input_size;
  const int C = p.concat_size();
  const L lambda = 1.0L / (1.0L + std::exp(-static_cast<L>(p.lambda_raw)));
  auto sigma = [](L z) { return 1.0L / (1.0L + std::exp(-z)); };
  L total = 0.0L;
  for (const auto& w : batch) {
    check_shapes(p, w.features, w.mask);
    const int S = w.features.slots();
    const int T = w.features.steps();
    std::vector<std::vector<L>> h(S, std::vector<L>(H, 0.0L)), c = h;
    for (int t = 0; t < T; ++t) {
      std::vector<L> pooled(H, 0.0L);
      L present = 0.0L;
      for (int k = 0; k < S; ++k) {
        const L m = t == 0 ? 0.0L : static_cast<L>(w.mask.values(t - 1, k));
        present += m;
        for (int j = 0; j < H; ++j) pooled[j] += m * h[k][j];
      }
      if (present > 0.0L)
        for (L& v : pooled) v /= present;
      auto nh = h, nc = c;
      std::vector<L> x(C);
      for (int k = 0; k < S; ++k) {
        const L m = t == 0 ? 0.0L : static_cast<L>(w.mask.values(t - 1, k));
        for (int j = 0; j < N; ++j) x[j] = w.features.frames[t](k, j);
        for (int j = 0; j < H; ++j) {
          x[N + j] = lambda * pooled[j] + (1.0L - lambda) * m * h[k][j];
          x[N + H + j] = h[k][j];
        }
        for (int j = 0; j < H; ++j) {
          L z[4];
          for (int g = 0; g < 4; ++g) {
            const int row = g * H + j;
            L acc = p.gate_bias(row);
            for (int q = 0; q < C; ++q) acc += static_cast<L>(p.gate_weights(row, q)) * x[q];
            z[g] = acc;
          }
          const L f = sigma(z[ModelParams::kForget]), in = sigma(z[ModelParams::kInput]);
          const L og = sigma(z[ModelParams::kOutput]), cand = std::tanh(z[ModelParams::kCell]);
          nc[k][j] = f * c[k][j] + in * cand;
          nh[k][j] = og * std::tanh(nc[k][j]);
        }
      }
      h = std::move(nh);
      c = std::move(nc);
    }
    for (int k = 0; k < S; ++k) {
      if (!w.mask.present(T - 1, k)) continue;
      L pre = p.head_bias;
      for (int j = 0; j < H; ++j) pre += static_cast<L>(p.head_weights(j)) * h[k][j];
      const L d = sigma(pre) - static_cast<L>(w.targets(k));
      total += d * d;
    }
  }
  return total;
}

}  // namespace

GradCheckReport grad_check(const ModelParams& params, std::span<const TrainingWindow> batch) {
  constexpr double step = 1e-5;
  ModelParams grad = ModelParams::zeros(params.input_size, params.hidden_size);
  for (const auto& w : batch) loss_and_gradient(params, w, grad);
  const Eigen::VectorXd analytic = grad.to_vector();

  GradCheckReport report;
  report.parameters = analytic.size();
  ModelParams probe = params;
  const Eigen::VectorXd theta = params.to_vector();
  Eigen::VectorXd shifted = theta;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    shifted(k) = theta(k) + step;
    probe.assign(shifted);
    const long double up = extended_batch_loss(probe, batch);
    shifted(k) = theta(k) - step;
    probe.assign(shifted);
    const long double down = extended_batch_loss(probe, batch);
    shifted(k) = theta(k);

    // theta +/- step is rounded to double; divide by the realised step.
    const long double h = static_cast<long double>(theta(k) + step) - static_cast<long double>(theta(k) - step);
    const double numeric = static_cast<double>((up - down) / h);
    const double denom = std::max({std::abs(analytic(k)), std::abs(numeric), 1e-8});
    const double rel = std::abs(analytic(k) - numeric) / denom;
    if (rel > report.max_relative_error || k == 0) {
      report.max_relative_error = std::max(rel, report.max_relative_error);
      report.worst_index = k;
      report.analytic = analytic(k);
      report.numeric = numeric;
    }
  }
  return report;
}

GradCheckProblem make_grad_check_problem(std::uint64_t seed, int n, int steps, int hidden, int windows) {
  if (n < 2 || steps < 1 || hidden < 1 || windows < 1) throw std::invalid_argument("grad check problem: bad size");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  GradCheckProblem prob;
  prob.params = ModelParams::initialize(kFeatureSize, hidden, rng());
  for (Eigen::Index k = 0; k < prob.params.gate_bias.size(); ++k) prob.params.gate_bias(k) += 0.1 * normal(rng);
  prob.params.head_bias = 0.1 * normal(rng);
  prob.params.lambda_raw = normal(rng);

  const int slots = n - 1;
  for (int b = 0; b < windows; ++b) {
    TrainingWindow w;
    w.features.focal_id = 0;
    for (int k = 1; k < n; ++k) w.features.slot_ids.push_back(k);
    w.mask.values = Eigen::MatrixXd::Zero(steps, slots);
    for (int t = 0; t < steps; ++t) {
      Eigen::MatrixXd f = Eigen::MatrixXd::Constant(slots, kFeatureSize, kAbsentValue);
      for (int k = 0; k < slots; ++k) {
        // The first slot stays present at the last step so every window has a label.
        const bool present = (t == steps - 1 && k == 0) || unit(rng) < 0.75;
        if (!present) continue;
        w.mask.values(t, k) = 1.0;
        for (int c = 0; c < kFeatureSize; ++c) f(k, c) = unit(rng);
      }
      w.features.frames.push_back(std::move(f));
    }
    w.targets = Eigen::VectorXd::Zero(slots);
    for (int k = 0; k < slots; ++k) w.targets(k) = unit(rng) < 0.5 ? 0.0 : 1.0;
    prob.batch.push_back(std::move(w));
  }
  return prob;
}

}  // namespace fform
