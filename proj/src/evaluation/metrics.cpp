#include <algorithm>
#include <cmath>
#include <cstring>

#include "masked_irl/errors.hpp"
#include "masked_irl/evaluation.hpp"

namespace masked_irl {

namespace {

StateVector column_state(const StateMatrix& m, Eigen::Index t) {
  std::array<double, kStateDim> v{};
  for (int i = 0; i < kStateDim; ++i) v[static_cast<std::size_t>(i)] = m(i, t);
  return StateVector(v);
}

}  // namespace

double Scorer::trajectory_return(const Trajectory& trajectory) const { return rewards(trajectory.matrix()).sum(); }

Scorer gt_scorer(const PreferenceWeights& w) {
  return Scorer("gt", [w](const StateMatrix& states) {
    Eigen::RowVectorXd r(states.cols());
    for (Eigen::Index t = 0; t < states.cols(); ++t) r(t) = gt_reward(w, column_state(states, t));
    return r;
  });
}

Scorer negated_scorer(const Scorer& inner) {
  return Scorer("neg_" + inner.name(), [inner](const StateMatrix& states) { return Eigen::RowVectorXd(-inner.rewards(states)); });
}

Scorer random_scorer(std::uint64_t seed) {
  return Scorer("random", [seed](const StateMatrix& states) {
    Eigen::RowVectorXd r(states.cols());
    for (Eigen::Index t = 0; t < states.cols(); ++t) {
      std::uint64_t h = seed;
      for (int i = 0; i < kStateDim; ++i) {
        std::uint64_t bits = 0;
        const double v = states(i, t);
        std::memcpy(&bits, &v, sizeof bits);
        h = splitmix64(h ^ bits);
      }
      r(t) = static_cast<double>(h >> 11) * 0x1.0p-53;
    }
    return r;
  });
}

Scorer learned_scorer(const RewardModel& model, std::string instruction, std::optional<StateMask> input_mask) {
  const std::string name = input_mask ? "explicit_mask" : "learned";
  return Scorer(name, [&model, instruction = std::move(instruction), input_mask](const StateMatrix& states) {
    if (!input_mask) return model.rewards(states, instruction);
    const StateMatrix masked = states.array().colwise() * input_mask->as_eigen().array();
    return model.rewards(masked, instruction);
  });
}

namespace {

Eigen::VectorXd returns_of(const Scorer& scorer, const std::vector<const Trajectory*>& trajectories) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(trajectories.size()));
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = scorer.trajectory_return(*trajectories[i]);
  }
  return out;
}

std::vector<const Trajectory*> all_trajectories(const TrajectoryBank& bank) {
  std::vector<const Trajectory*> out;
  for (const auto& g : bank.groups) {
    for (const auto& t : g.trajectories) out.push_back(&t);
  }
  return out;
}

}  // namespace

double win_rate(const Scorer& scorer, const PreferenceWeights& w, const TrajectoryBank& bank, int n_pairs,
                Rng& rng) {
  if (n_pairs < 1) throw ValidationError("n_pairs must be positive");
  const auto trajectories = all_trajectories(bank);
  const Eigen::VectorXd gt = returns_of(gt_scorer(w), trajectories);
  const auto n = static_cast<std::size_t>(gt.size());

  long valid = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) valid += std::abs(gt(static_cast<Eigen::Index>(i)) - gt(static_cast<Eigen::Index>(j))) > kGtTieThreshold;
  }
  if (valid < n_pairs) {
    throw ValidationError("bank has " + std::to_string(valid) + " untied pairs, " + std::to_string(n_pairs) +
                          " requested");
  }

  const Eigen::VectorXd learned = returns_of(scorer, trajectories);
  int agree = 0;
  for (int k = 0; k < n_pairs; ++k) {
    Eigen::Index i = 0, j = 0;
    do {
      i = static_cast<Eigen::Index>(rng.index(n));
      j = static_cast<Eigen::Index>(rng.index(n));
    } while (i == j || std::abs(gt(i) - gt(j)) <= kGtTieThreshold);
    const double dl = learned(i) - learned(j);
    const double dg = gt(i) - gt(j);
    agree += (dl > 0.0 && dg > 0.0) || (dl < 0.0 && dg < 0.0);
  }
  return static_cast<double>(agree) / n_pairs;
}

std::vector<StateVector> bank_states(const TrajectoryBank& bank) {
  std::vector<StateVector> out;
  for (const auto& g : bank.groups) {
    for (const auto& t : g.trajectories) out.insert(out.end(), t.states().begin(), t.states().end());
  }
  return out;
}

double reward_variance(const Scorer& scorer, const StateMask& mask, const std::vector<StateVector>& states,
                       int n_draws, Rng& rng) {
  if (n_draws < 2) throw ValidationError("reward_variance needs at least two draws");
  if (states.empty()) throw ValidationError("reward_variance needs states");
  const auto n = static_cast<Eigen::Index>(states.size());
  StateMatrix noisy(kStateDim, n * n_draws);
  for (Eigen::Index s = 0; s < n; ++s) {
    for (int k = 0; k < n_draws; ++k) {
      StateVector v = states[static_cast<std::size_t>(s)];
      for (int j = 0; j < kStateDim; ++j) {
        if (!mask.relevant(j)) v[j] += rng.normal();
      }
      noisy.col(s * n_draws + k) = v.as_eigen();
    }
  }
  const Eigen::RowVectorXd r = scorer.rewards(noisy);
  double total = 0.0;
  for (Eigen::Index s = 0; s < n; ++s) {
    // Shifted by the first draw so identical rewards give exactly 0.
    const Eigen::ArrayXd d = r.segment(s * n_draws, n_draws).transpose().array() - r(s * n_draws);
    total += (d.square().sum() - d.sum() * d.sum() / n_draws) / (n_draws - 1);
  }
  return total / static_cast<double>(n);
}

double regret(const Scorer& scorer, const PreferenceWeights& w, const TrajectoryBank& bank) {
  if (bank.groups.empty()) throw ValidationError("regret needs at least one candidate group");
  const Scorer gt = gt_scorer(w);
  double total = 0.0;
  for (const auto& group : bank.groups) {
    if (group.trajectories.empty()) throw ValidationError("empty candidate group");
    std::vector<const Trajectory*> ts;
    for (const auto& t : group.trajectories) ts.push_back(&t);
    const Eigen::VectorXd learned = returns_of(scorer, ts);
    const Eigen::VectorXd truth = returns_of(gt, ts);
    Eigen::Index chosen = 0;
    learned.maxCoeff(&chosen);
    const double hi = truth.maxCoeff(), lo = truth.minCoeff();
    if (hi - lo > 0.0) total += (hi - truth(chosen)) / (hi - lo);
  }
  return total / static_cast<double>(bank.groups.size());
}

MaskScores mask_metrics(const std::vector<StateMask>& predicted, const std::vector<StateMask>& oracle) {
  if (predicted.size() != oracle.size()) throw ValidationError("mask_metrics: list lengths differ");
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t k = 0; k < predicted.size(); ++k) {
    for (int i = 0; i < kStateDim; ++i) {
      const bool p = predicted[k].relevant(i), o = oracle[k].relevant(i);
      tp += p && o;
      fp += p && !o;
      fn += !p && o;
    }
  }
  MaskScores s;
  s.precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  s.recall = tp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

double instruction_accuracy(const std::vector<std::vector<Instruction>>& candidates,
                            const std::vector<Instruction>& ground_truth) {
  if (candidates.size() != ground_truth.size()) throw ValidationError("instruction_accuracy: list lengths differ");
  if (ground_truth.empty()) throw ValidationError("instruction_accuracy: no queries");
  int hits = 0;
  for (std::size_t q = 0; q < ground_truth.size(); ++q) {
    const CanonicalForm truth =
        ground_truth[q].canonical ? *ground_truth[q].canonical : parse_instruction(ground_truth[q].text);
    if (truth.empty()) throw ParseError("ground-truth instruction does not parse", ground_truth[q].text);
    bool hit = false;
    for (const auto& c : candidates[q]) {
      if ((c.canonical ? *c.canonical : parse_instruction(c.text)) == truth) {
        hit = true;
        break;
      }
    }
    hits += hit;
  }
  return static_cast<double>(hits) / static_cast<double>(ground_truth.size());
}

}  // namespace masked_irl
