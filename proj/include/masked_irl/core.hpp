#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace masked_irl {

inline constexpr int kStateDim = 19;
inline constexpr int kTrajectoryLength = 21;

// Canonical state layout. Every module gets indices from here.
namespace layout {

struct Block {
  std::string_view name;
  int offset;
  int size;
};

inline constexpr Block kEefPos{"eef_pos", 0, 3};
inline constexpr Block kEefRot{"eef_rot", 3, 9};  // row-major R_xx .. R_zz
inline constexpr Block kHuman{"human", 12, 3};
inline constexpr Block kLaptop{"laptop", 15, 3};
inline constexpr Block kTable{"table", 18, 1};

inline constexpr std::array<Block, 5> kBlocks{kEefPos, kEefRot, kHuman, kLaptop, kTable};

inline constexpr int kEefX = 0;
inline constexpr int kEefY = 1;
inline constexpr int kEefZ = 2;
/// Row-major rotation element R_rc, r and c in {0,1,2}.
constexpr int rotation(int row, int col) { return kEefRot.offset + 3 * row + col; }
inline constexpr int kHumanX = 12;
inline constexpr int kHumanY = 13;
inline constexpr int kHumanZ = 14;
inline constexpr int kLaptopX = 15;
inline constexpr int kLaptopY = 16;
inline constexpr int kLaptopZ = 17;
inline constexpr int kTableZ = 18;

/// Per-element column names, in index order.
const std::array<std::string_view, kStateDim>& element_names();

}  // namespace layout

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

/// One world state, laid out per masked_irl::layout.
class StateVector {
 public:
  StateVector() { values_.fill(0.0); }
  explicit StateVector(const std::array<double, kStateDim>& values) : values_(values) {}

  /// Validating construction from an arbitrary-length buffer.
  static StateVector from_span(std::span<const double> values);

  double operator[](int i) const { return values_[static_cast<std::size_t>(i)]; }
  double& operator[](int i) { return values_[static_cast<std::size_t>(i)]; }
  const std::array<double, kStateDim>& values() const { return values_; }
  std::span<const double, kStateDim> span() const { return values_; }

  Eigen::Map<const Eigen::Matrix<double, kStateDim, 1>> as_eigen() const {
    return Eigen::Map<const Eigen::Matrix<double, kStateDim, 1>>(values_.data());
  }

  friend bool operator==(const StateVector&, const StateVector&) = default;

 private:
  std::array<double, kStateDim> values_;
};

struct UnpackedState {
  Vec3 eef_position;
  Eigen::Matrix3d eef_rotation;
  Vec3 human;
  Vec3 laptop;
  double table_z = 0.0;
};

/// Checks R^T R = I and det(R) = 1 within tol. Returns an empty string when
/// valid, otherwise a description of the failure.
std::string rotation_defect(const Eigen::Matrix3d& rotation, double tol = 1e-6);

StateVector pack_state(const Vec3& eef_position, const Eigen::Matrix3d& eef_rotation,
                       const Vec3& human, const Vec3& laptop, double table_z);
UnpackedState unpack_state(std::span<const double> state);
UnpackedState unpack_state(const StateVector& state);

struct Box {
  Vec3 min;
  Vec3 max;
  bool contains(const Vec3& p) const;
  friend bool operator==(const Box&, const Box&) = default;
};

struct EnvironmentConfig {
  Vec3 human;
  Vec3 laptop;
  double table_z = 0.0;
  Box workspace;

  /// Throws ValidationError if the laptop is off the table or anything is
  /// outside the workspace.
  void validate() const;
  /// Writes the object dims (12-18) of `state` from this config.
  void stamp(StateVector& state) const;
  friend bool operator==(const EnvironmentConfig&, const EnvironmentConfig&) = default;
};

using StateMatrix = Eigen::Matrix<double, kStateDim, Eigen::Dynamic>;

class Trajectory {
 public:
  using States = std::array<StateVector, kTrajectoryLength>;

  /// Validates the shared-object-dims invariant against `config`.
  Trajectory(States states, EnvironmentConfig config);

  const States& states() const { return states_; }
  const StateVector& operator[](int t) const { return states_[static_cast<std::size_t>(t)]; }
  const StateVector& start() const { return states_.front(); }
  const StateVector& goal() const { return states_.back(); }
  const EnvironmentConfig& config() const { return config_; }

  /// 19 x 21 column-per-timestep copy for batched evaluation.
  StateMatrix matrix() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;

 private:
  States states_;
  EnvironmentConfig config_;
};

inline constexpr int kFeatureCount = 5;

/// Per-feature weights in {-1, 0, +1}, ordered table, human, laptop, face, orient.
class PreferenceWeights {
 public:
  explicit PreferenceWeights(const std::array<int, kFeatureCount>& weights);

  int operator[](int feature) const { return weights_[static_cast<std::size_t>(feature)]; }
  const std::array<int, kFeatureCount>& values() const { return weights_; }
  int active_count() const;
  std::string to_string() const;  // e.g. "+0-00"

  friend bool operator==(const PreferenceWeights&, const PreferenceWeights&) = default;
  friend auto operator<=>(const PreferenceWeights&, const PreferenceWeights&) = default;

 private:
  std::array<int, kFeatureCount> weights_;
};

enum class MaskProvenance { kOracle, kLlm, kMock };

std::string_view to_string(MaskProvenance p);
MaskProvenance mask_provenance_from_string(std::string_view s);

struct StateMask {
  std::array<std::uint8_t, kStateDim> bits{};
  MaskProvenance provenance = MaskProvenance::kOracle;

  static StateMask all_ones(MaskProvenance p);
  bool relevant(int i) const { return bits[static_cast<std::size_t>(i)] != 0; }
  int count() const;
  /// Bits as a 19-vector of 0.0 / 1.0.
  Eigen::Matrix<double, kStateDim, 1> as_eigen() const;
  friend bool operator==(const StateMask&, const StateMask&) = default;
};

enum class Ambiguity { kClear, kReferentOmitted, kExpressionOmitted, kDisambiguated };

std::string_view to_string(Ambiguity a);
Ambiguity ambiguity_from_string(std::string_view s);

/// (feature index, sign) pairs, kept sorted by feature.
using CanonicalForm = std::vector<std::pair<int, int>>;

struct Instruction {
  std::string text;
  Ambiguity ambiguity = Ambiguity::kClear;
  std::optional<CanonicalForm> canonical;

  bool is_ambiguous() const {
    return ambiguity == Ambiguity::kReferentOmitted || ambiguity == Ambiguity::kExpressionOmitted;
  }
  void validate() const;
};

/// One training record. `preference` is the hidden label and is only read by
/// data generation and evaluation, never by the reward model.
struct AnnotatedExample {
  int demo_id = 0;    // index of the demo within its bank group
  int config_id = 0;
  int pair_id = 0;
  Trajectory trajectory;
  Instruction instruction;
  StateMask mask;
  PreferenceWeights preference;
  /// The ambiguous instruction this example was disambiguated from.
  std::optional<Instruction> original;
  bool annotation_failed = false;
};

}  // namespace masked_irl
