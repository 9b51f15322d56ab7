#ifndef FFORM_CHECKPOINT_HPP
#define FFORM_CHECKPOINT_HPP

#include <filesystem>
#include <stdexcept>
#include <string>

#include "fform/affinity_net.hpp"
#include "fform/features.hpp"

namespace fform {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kCheckpointVersion = 1;

/// Everything needed to run detection with a trained model.
struct Checkpoint {
  ModelParams params;
  FeatureScaler scaler;
  int seq_len = 10;
  int max_people = 0;
  TrainConfig train_config;
  int best_epoch = 0;
};

std::string checkpoint_to_string(const Checkpoint& ckpt);
Checkpoint checkpoint_from_string(const std::string& text);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Fails with CheckpointError when the stored feature layout differs from the
/// layout this build produces.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fform

#endif  // FFORM_CHECKPOINT_HPP
