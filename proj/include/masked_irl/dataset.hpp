#pragma once

#include <cstdint>
#include <vector>

#include "masked_irl/core.hpp"
#include "masked_irl/preferences.hpp"
#include "masked_irl/rng.hpp"
#include "masked_irl/world.hpp"

namespace masked_irl {

enum class DemoSelection { kBest, kBoltzmann };

std::string_view to_string(DemoSelection s);
DemoSelection demo_selection_from_string(std::string_view s);

struct DemoSpec {
  int demos_per_preference = 10;
  DemoSelection selection = DemoSelection::kBest;
  double temperature = 1.0;  // Boltzmann only; returns are divided by it
  InstructionMode mode = InstructionMode::kClear;
};

/// Picks a perturbed trajectory from one bank group for preference `w`.
/// Returns its index within the group (never 0, the reference).
int select_demo(const PreferenceWeights& w, const TrajectoryGroup& group, const DemoSpec& spec, Rng& rng);

/// For every preference, draws `demos_per_preference` distinct groups from
/// the bank, selects a demo in each and attaches the rendered instruction and
/// the oracle mask. Throws ValidationError when the bank has too few groups.
std::vector<AnnotatedExample> generate_examples(const std::vector<PreferenceWeights>& preferences,
                                                const TrajectoryBank& bank, const DemoSpec& spec, Rng& rng);

}  // namespace masked_irl
