#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "masked_irl/core.hpp"

namespace masked_irl {

enum class FeatureId : int { kTable = 0, kHuman = 1, kLaptop = 2, kFace = 3, kOrient = 4 };

inline constexpr std::array<FeatureId, kFeatureCount> kAllFeatures{
    FeatureId::kTable, FeatureId::kHuman, FeatureId::kLaptop, FeatureId::kFace, FeatureId::kOrient};

std::string_view feature_name(FeatureId f);

/// Normalizers for closeness. Chosen to span the desk workspace.
namespace closeness_scale {
inline constexpr double kVertical = 1.0;   // |z_eef - z_table|
inline constexpr double kPlanar = 1.6;     // xy distance to human / laptop
inline constexpr double kSpatial = 2.0;    // 3-D distance to the face
inline constexpr double kFaceHeight = 0.4; // face point above the human reference
}  // namespace closeness_scale

/// State indices a feature's closeness reads. Sorted ascending.
std::span<const int> relevant_indices(FeatureId f);

/// Closeness in [0, 1]; 1 means "at" the object (or upright for kOrient).
/// Reads only relevant_indices(f) of `state`.
double closeness(FeatureId f, const StateVector& state);

/// Sum over features of w_i * closeness_i.
double gt_reward(const PreferenceWeights& w, const StateVector& state);
double gt_return(const PreferenceWeights& w, const Trajectory& trajectory);

/// Per-feature mean closeness over a trajectory.
std::array<double, kFeatureCount> mean_closeness(const Trajectory& trajectory);

StateMask oracle_mask(const PreferenceWeights& w);

/// Every non-zero vector in {-1,0,+1}^5, in lexicographic order of
/// (w_table, ..., w_orient) with -1 < 0 < +1.
std::vector<PreferenceWeights> enumerate_preferences();

/// The six single-feature preferences over table, human and laptop used for
/// the ambiguous-instruction experiments.
std::vector<PreferenceWeights> sparse_distance_preferences();

enum class Density { kSparse, kMedium, kDense };
inline constexpr std::array<Density, 3> kAllDensities{Density::kSparse, Density::kMedium, Density::kDense};
std::string_view to_string(Density d);
Density classify_density(const PreferenceWeights& w);

enum class InstructionMode { kClear, kReferentOmitted, kExpressionOmitted };
std::string_view to_string(InstructionMode m);
InstructionMode instruction_mode_from_string(std::string_view s);

/// Full sentence for one (feature, sign), e.g. "Stay away from the laptop".
std::string_view clause_template(FeatureId f, int sign);

/// Ambiguous modes need exactly one active feature among table, human and
/// laptop; anything else throws ValidationError.
Instruction render_instruction(const PreferenceWeights& w, InstructionMode mode);

/// Clear instruction over a subset of the active features (bit i of
/// `feature_subset` keeps feature i). Throws if the subset has no active feature.
Instruction render_instruction_subset(const PreferenceWeights& w, unsigned feature_subset);

/// Maps instruction text back to (feature, sign) pairs. Case and article
/// insensitive. Any clause that is out of grammar yields an empty result.
CanonicalForm parse_instruction(std::string_view text);

CanonicalForm canonical_form(const PreferenceWeights& w);

/// What an ambiguous fragment pins down: a relation ("Stay away" -> sign)
/// or a referent ("The table" -> feature).
struct Fragment {
  std::optional<int> sign;
  std::optional<FeatureId> feature;
};

/// Parses "Stay away" / "Stay close" / "The table" / ... . Returns nullopt
/// for anything else.
std::optional<Fragment> parse_fragment(std::string_view text);

/// Features an ambiguous fragment could refer to.
std::vector<FeatureId> fragment_features(const Fragment& fragment);

}  // namespace masked_irl
