#include "masked_irl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "masked_irl/errors.hpp"

namespace masked_irl {

std::string_view to_string(DemoSelection s) {
  return s == DemoSelection::kBest ? "best" : "boltzmann";
}

DemoSelection demo_selection_from_string(std::string_view s) {
  if (s == "best") return DemoSelection::kBest;
  if (s == "boltzmann") return DemoSelection::kBoltzmann;
  throw ValidationError("unknown demo selection: " + std::string(s));
}

int select_demo(const PreferenceWeights& w, const TrajectoryGroup& group, const DemoSpec& spec, Rng& rng) {
  const int n = static_cast<int>(group.trajectories.size());
  if (n < 2) throw ValidationError("trajectory group has no perturbed trajectories");
  std::vector<double> returns(static_cast<std::size_t>(n));
  for (int i = 1; i < n; ++i) returns[static_cast<std::size_t>(i)] = gt_return(w, group.trajectories[static_cast<std::size_t>(i)]);

  if (spec.selection == DemoSelection::kBest) {
    int best = 1;
    for (int i = 2; i < n; ++i) {
      if (returns[static_cast<std::size_t>(i)] > returns[static_cast<std::size_t>(best)]) best = i;
    }
    return best;
  }
  if (spec.temperature <= 0.0) throw ValidationError("Boltzmann temperature must be positive");
  const double top = *std::max_element(returns.begin() + 1, returns.end());
  std::vector<double> weights(static_cast<std::size_t>(n), 0.0);
  for (int i = 1; i < n; ++i) {
    weights[static_cast<std::size_t>(i)] = std::exp((returns[static_cast<std::size_t>(i)] - top) / spec.temperature);
  }
  double u = rng.uniform() * std::accumulate(weights.begin(), weights.end(), 0.0);
  for (int i = 1; i < n; ++i) {
    u -= weights[static_cast<std::size_t>(i)];
    if (u < 0.0) return i;
  }
  return n - 1;
}

std::vector<AnnotatedExample> generate_examples(const std::vector<PreferenceWeights>& preferences,
                                                const TrajectoryBank& bank, const DemoSpec& spec, Rng& rng) {
  if (spec.demos_per_preference < 1) throw ValidationError("demos per preference must be at least 1");
  if (static_cast<std::size_t>(spec.demos_per_preference) > bank.groups.size()) {
    throw ValidationError("demos per preference (" + std::to_string(spec.demos_per_preference) +
                          ") exceeds the number of bank groups (" + std::to_string(bank.groups.size()) + ")");
  }
  std::vector<AnnotatedExample> out;
  out.reserve(preferences.size() * static_cast<std::size_t>(spec.demos_per_preference));
  std::vector<std::size_t> order(bank.groups.size());
  for (const auto& w : preferences) {
    const Instruction instruction = render_instruction(w, spec.mode);
    std::iota(order.begin(), order.end(), 0);
    for (int k = 0; k < spec.demos_per_preference; ++k) {
      const auto i = static_cast<std::size_t>(k);
      std::swap(order[i], order[i + rng.index(order.size() - i)]);
    }
    std::sort(order.begin(), order.begin() + spec.demos_per_preference);
    for (int k = 0; k < spec.demos_per_preference; ++k) {
      const TrajectoryGroup& group = bank.groups[order[static_cast<std::size_t>(k)]];
      const int demo = select_demo(w, group, spec, rng);
      out.push_back(AnnotatedExample{demo, group.config_id, group.pair_id,
                                     group.trajectories[static_cast<std::size_t>(demo)], instruction,
                                     oracle_mask(w), w, std::nullopt, false});
    }
  }
  return out;
}

}  // namespace masked_irl
