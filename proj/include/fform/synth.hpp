#ifndef FFORM_SYNTH_HPP
#define FFORM_SYNTH_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fform/scene.hpp"

namespace fform {

/**
 * Knobs of the synthetic cocktail-party generator.
 *
 * The floor is a square arena cut into cells of side 2 * (o_space_radius +
 * cell_margin); every group and every lone person owns one cell. Group
 * members stand evenly spaced on a circle of radius o_space_radius around
 * the group centre and face it. Events move people between cells at
 * walking_speed, so membership changes take several steps.
 */
struct SynthConfig {
  int n_people = 8;  // ids live in [0, n_people)
  int min_people = 4;
  int n_scenes = 200;
  int steps_per_scene = 100;
  // Relative weights of group sizes 1, 2, 3, 4 in the initial layout.
  std::vector<double> group_size_distribution = {0.15, 0.35, 0.3, 0.2};
  double event_rate = 4.0;  // expected membership events per 100 steps
  double o_space_radius = 0.8;
  double cell_margin = 0.8;
  double arena_size = 14.0;
  double walking_speed = 0.6;  // distance per step
  double position_noise_std = 0.05;
  double orientation_noise_std = 0.15;
  double exit_probability = 0.1;  // share of events that take a lone person off the floor or bring one back
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument for non-positive sizes or when the arena
  /// cannot hold every person in a cell of their own.
  void validate() const;
  int cells_per_side() const;
};

std::vector<SceneSequence> generate(const SynthConfig& config);

/// Keeps every `factor`-th frame starting with the first.
SceneSequence subsample(const SceneSequence& seq, int factor);

}  // namespace fform

#endif  // FFORM_SYNTH_HPP
