#ifndef FFORM_SCENE_HPP
#define FFORM_SCENE_HPP

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fform {

using PersonId = int;

/// Raised for malformed scene files and for any violated data invariant.
/// `line()` is the 1-based line of the offending record, or 0 when the error
/// is not tied to a file position.
class SceneError : public std::runtime_error {
 public:
  explicit SceneError(const std::string& what, std::size_t line = 0);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct PersonState {
  PersonId id = 0;
  double x = 0.0;
  double y = 0.0;
  double head = 0.0;           // radians, (-pi, pi]
  std::optional<double> body;  // radians, (-pi, pi]

  double body_or_head() const { return body.value_or(head); }
  bool operator==(const PersonState&) const = default;
};

/// Disjoint member sets. Members are kept sorted and groups are ordered by
/// their smallest member, so two partitions compare equal iff they describe
/// the same grouping.
struct GroupPartition {
  std::vector<std::vector<PersonId>> groups;

  GroupPartition() = default;
  explicit GroupPartition(std::vector<std::vector<PersonId>> g);

  void validate() const;
  /// Groups with at least two members.
  std::vector<std::vector<PersonId>> multi_member_groups() const;
  /// Index of the group containing `id`, if any.
  std::optional<std::size_t> group_of(PersonId id) const;
  bool same_group(PersonId a, PersonId b) const;

  bool operator==(const GroupPartition&) const = default;
};

/// P x P pairwise affinities for the persons present at one instant.
/// Row r holds the affinities predicted with person_ids[r] as the focal
/// person, so the matrix may be asymmetric. Diagonal is stored as 0.
struct AffinityMatrix {
  std::vector<PersonId> person_ids;
  Eigen::MatrixXd values;

  std::size_t size() const { return person_ids.size(); }
  void validate() const;
};

struct Frame {
  double t = 0.0;
  std::vector<PersonState> persons;
  std::optional<GroupPartition> groups;

  const PersonState* find(PersonId id) const;
  bool present(PersonId id) const { return find(id) != nullptr; }
  std::vector<PersonId> present_ids() const;
  bool operator==(const Frame&) const = default;
};

struct SceneSequence {
  std::string scene_id;
  std::string units = "m";
  int n = 0;  // person ids live in [0, n)
  std::vector<Frame> frames;

  std::size_t steps() const { return frames.size(); }
  void validate() const;
  bool operator==(const SceneSequence&) const = default;
};

/// Reads the JSON Lines interchange format. A line carrying "scene_id" opens
/// a new sequence; every following record line belongs to it.
std::vector<SceneSequence> load_scene_sequences(const std::filesystem::path& path);
std::vector<SceneSequence> parse_scene_sequences(const std::string& text);

void save_scene_sequences(const std::vector<SceneSequence>& seqs,
                          const std::filesystem::path& path);
std::string format_scene_sequences(const std::vector<SceneSequence>& seqs);

}  // namespace fform

#endif  // FFORM_SCENE_HPP
