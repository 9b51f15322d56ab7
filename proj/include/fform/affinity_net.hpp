#ifndef FFORM_AFFINITY_NET_HPP
#define FFORM_AFFINITY_NET_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fform/features.hpp"

namespace fform {

/**
 * Trainable weights of the joint LSTM.
 *
 * Every gate consumes the concatenation [v; o; h] of the pair features v
 * (input_size), the pooled-attention mixture o (hidden_size) and the previous
 * hidden state h (hidden_size). The four gates are stacked row-wise in
 * `gate_weights` / `gate_bias` in the order forget, input, output, cell.
 * The scalar mixing weight is stored unconstrained and squashed with a
 * logistic so that it always lies in (0,1).
 */
struct ModelParams {
  int input_size = kFeatureSize;
  int hidden_size = 0;
  Eigen::MatrixXd gate_weights;     // 4H x (N + 2H)
  Eigen::VectorXd gate_bias;        // 4H
  Eigen::RowVectorXd head_weights;  // 1 x H
  double head_bias = 0.0;
  double lambda_raw = 0.0;

  enum Gate : int { kForget = 0, kInput = 1, kOutput = 2, kCell = 3 };

  int concat_size() const { return input_size + 2 * hidden_size; }
  double lambda() const;

  /// All-zero parameters of the given shape.
  static ModelParams zeros(int input_size, int hidden_size);
  /// Uniform(+-1/sqrt(fan_in)) gate weights and output weights, zero biases
  /// except the forget bias which starts at 1.
  static ModelParams initialize(int input_size, int hidden_size, std::uint64_t seed);

  /// Flat view used by the optimizer and the finite-difference check.
  Eigen::VectorXd to_vector() const;
  void assign(const Eigen::VectorXd& flat);
  Eigen::Index parameter_count() const;

  bool operator==(const ModelParams&) const;
};

/// Affinities of one focal person towards every slot at the last window step.
/// `valid[k]` is false when slot k is absent at the final step.
struct AffinityVector {
  std::vector<PersonId> slot_ids;
  Eigen::VectorXd values;
  std::vector<bool> valid;
};

/// One supervised window: features, mask and binary targets per slot.
struct TrainingWindow {
  FeatureTensor features;
  PresenceMask mask;
  Eigen::VectorXd targets;
};

AffinityVector forward(const ModelParams& params, const FeatureTensor& features, const PresenceMask& mask);

/// Sum of squared errors over every valid slot of every window.
/// Throws std::invalid_argument on an empty batch or mismatched shapes.
double loss(std::span<const AffinityVector> predicted, std::span<const Eigen::VectorXd> targets);

/// Loss of one window and its gradient accumulated into `grad` (same shape
/// as params). Returns the window loss.
double loss_and_gradient(const ModelParams& params, const TrainingWindow& window, ModelParams& grad);

/// Loss of a batch without gradient.
double batch_loss(const ModelParams& params, std::span<const TrainingWindow> batch);

struct TrainConfig {
  int hidden_size = 64;
  int seq_len = 10;
  double learning_rate = 1e-3;
  int epochs = 20;
  int batch_size = 32;
  std::uint64_t seed = 0;
  double clip_norm = 5.0;
  // 0 means every training window is visited once per epoch.
  std::size_t windows_per_epoch = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;  // mean per-window loss
  double val_loss = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> log;
  int best_epoch = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mini-batch Adam with global-norm clipping. Returns the parameters of the
/// epoch with the lowest validation loss (training loss when `val` is empty).
TrainResult train(std::span<const TrainingWindow> train_set, std::span<const TrainingWindow> val_set,
                  const TrainConfig& config, const std::function<void(const EpochLog&)>& on_epoch = {});

struct GradCheckReport {
  double max_relative_error = 0.0;
  Eigen::Index worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  Eigen::Index parameters = 0;
};

/// Compares analytic gradients against central differences (step 1e-5)
/// of the loss evaluated in extended precision.
GradCheckReport grad_check(const ModelParams& params, std::span<const TrainingWindow> batch);

/// Random small problem (n people, T steps, H hidden) used by the gradient
/// checker and the CLI.
struct GradCheckProblem {
  ModelParams params;
  std::vector<TrainingWindow> batch;
};
GradCheckProblem make_grad_check_problem(std::uint64_t seed, int n = 4, int steps = 3, int hidden = 8,
                                         int windows = 3);

}  // namespace fform

#endif  // FFORM_AFFINITY_NET_HPP
