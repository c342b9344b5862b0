#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "masked_irl/core.hpp"
#include "masked_irl/preferences.hpp"
#include "masked_irl/reward_model.hpp"
#include "masked_irl/rng.hpp"
#include "masked_irl/world.hpp"

namespace masked_irl {

/// A per-state reward function under evaluation, applied column-wise to a
/// 19 x N state matrix.
class Scorer {
 public:
  using Fn = std::function<Eigen::RowVectorXd(const StateMatrix&)>;

  Scorer(std::string name, Fn rewards) : name_(std::move(name)), rewards_(std::move(rewards)) {}

  const std::string& name() const { return name_; }
  Eigen::RowVectorXd rewards(const StateMatrix& states) const { return rewards_(states); }
  double trajectory_return(const Trajectory& trajectory) const;

 private:
  std::string name_;
  Fn rewards_;
};

Scorer gt_scorer(const PreferenceWeights& w);
Scorer negated_scorer(const Scorer& inner);
/// Each state gets an independent-looking U(0,1) reward, a pure function of
/// its bytes and `seed`.
Scorer random_scorer(std::uint64_t seed);
/// The learned reward conditioned on `instruction`. With `input_mask` the
/// state is multiplied by it before the network sees it (explicit masking).
Scorer learned_scorer(const RewardModel& model, std::string instruction,
                      std::optional<StateMask> input_mask = std::nullopt);

inline constexpr double kGtTieThreshold = 1e-6;

/// Fraction of sampled trajectory pairs on which `scorer` orders returns the
/// same way as the gt reward. Pairs are drawn uniformly across the whole
/// bank; pairs whose gt returns differ by at most kGtTieThreshold are
/// redrawn. Throws ValidationError when the bank has fewer than `n_pairs`
/// non-tied pairs.
double win_rate(const Scorer& scorer, const PreferenceWeights& w, const TrajectoryBank& bank, int n_pairs,
                Rng& rng);

/// Adds N(0,1) noise to every dim outside `mask`, `n_draws` times per state,
/// takes the unbiased variance of the resulting rewards and averages it over
/// states.
double reward_variance(const Scorer& scorer, const StateMask& mask, const std::vector<StateVector>& states,
                       int n_draws, Rng& rng);

/// Every state of every trajectory in the bank.
std::vector<StateVector> bank_states(const TrajectoryBank& bank);

/// Per group: pick the argmax-return trajectory and report its gt shortfall,
/// normalized by the group's gt range (0 for gt-equal groups). Averaged over
/// groups.
double regret(const Scorer& scorer, const PreferenceWeights& w, const TrajectoryBank& bank);

struct MaskScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Micro-averaged over every bit; "relevant" is the positive class. An
/// empty denominator scores 1.
MaskScores mask_metrics(const std::vector<StateMask>& predicted, const std::vector<StateMask>& oracle);

/// Fraction of queries whose candidate list holds an instruction with the
/// same canonical form as the ground truth. Missing canonical forms are
/// parsed from the text; an unparseable ground truth throws ParseError.
double instruction_accuracy(const std::vector<std::vector<Instruction>>& candidates,
                            const std::vector<Instruction>& ground_truth);

struct PreferenceMetrics {
  std::string method;
  std::uint64_t seed = 0;
  PreferenceWeights preference;
  double win_rate = 0.0;
  double reward_variance = 0.0;
  double regret = 0.0;
};

struct StratumRow {
  std::string method;
  Density stratum = Density::kSparse;
  int preferences = 0;  // distinct preferences in the stratum
  int seeds = 0;
  double win_rate_mean = 0.0, win_rate_se = 0.0;
  double variance_mean = 0.0, variance_se = 0.0;
  double regret_mean = 0.0, regret_se = 0.0;
  bool single_seed = false;  // standard errors are 0 by convention
};

struct EvalReport {
  std::vector<std::uint64_t> seeds;
  std::vector<PreferenceMetrics> per_preference;
  std::vector<StratumRow> rows;  // methods in first-seen order, then strata

  std::string rows_csv() const;
  std::string per_preference_csv() const;
};

/// Per seed, averages each metric over the preferences of a stratum; the
/// reported mean and standard error are then taken across seeds. Every
/// method gets one row per stratum, empty strata included (NaN metrics).
EvalReport build_report(std::vector<PreferenceMetrics> metrics,
                        const std::function<Density(const PreferenceWeights&)>& classify = classify_density);

/// Shortest round-trip decimal, "nan" for NaN.
std::string format_number(double x);

}  // namespace masked_irl
