#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "masked_irl/core.hpp"
#include "masked_irl/llm.hpp"
#include "masked_irl/reward_model.hpp"
#include "masked_irl/rng.hpp"
#include "masked_irl/world.hpp"

namespace masked_irl {

enum class TrainMode { kMaskedIrl, kExplicitMask, kLcRl };

std::string_view to_string(TrainMode m);
TrainMode train_mode_from_string(std::string_view s);

/// Arithmetic used for the network passes during training. Parameters and
/// optimizer state are always kept in double.
enum class Precision { kFloat32, kFloat64 };

std::string_view to_string(Precision p);
Precision precision_from_string(std::string_view s);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  TrainMode mode = TrainMode::kMaskedIrl;
  double lambda = 10.0;
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 300;
  int negatives = 8;     // alternatives per demo in the partition sample
  int mask_draws = 1;    // noise draws per (state, masked dim) per step
  std::uint64_t seed = 0;
  AdamConfig adam;
  int checkpoint_every = 0;  // epochs; 0 disables periodic checkpoints
  Precision precision = Precision::kFloat32;

  /// lambda for masked_irl, 0 for the other modes.
  double effective_lambda() const { return mode == TrainMode::kMaskedIrl ? lambda : 0.0; }
  void validate() const;
};

/// One demonstration with its sampled partition set. candidates[0] is the
/// demonstration itself; the rest share its config and start-goal pair.
/// Trajectories may have any length (tests use short ones).
struct CandidateSet {
  std::string instruction;
  StateMask mask;
  std::vector<StateMatrix> candidates;
};

struct Batch {
  std::vector<CandidateSet> items;
};

/// Builds candidate sets: the demo plus up to `negatives` other trajectories
/// drawn uniformly without replacement from the demo's bank group.
Batch make_batch(std::span<const AnnotatedExample* const> examples, const TrajectoryBank& bank,
                 int negatives, Rng& rng);
Batch make_batch(const std::vector<AnnotatedExample>& examples, const TrajectoryBank& bank, int negatives,
                 Rng& rng);

/// Uniform(0,1) noise for the masking loss: draws[item][k] is a 19 x T
/// matrix, one value per (dim, state). Only masked-out dims are read.
struct MaskNoise {
  std::vector<std::vector<StateMatrix>> draws;
};

MaskNoise draw_mask_noise(const Batch& batch, int draws, Rng& rng);

struct LossBreakdown {
  double irl = 0.0;
  double mask = 0.0;
  double total = 0.0;
};

/// Computes the loss for `config.mode` and, when `grad` is non-null,
/// accumulates its gradient there. `noise` may be null when the mode needs
/// no masking term.
LossBreakdown evaluate_loss(const RewardModel& model, const Batch& batch, const TrainConfig& config,
                            const MaskNoise* noise, RewardModelParams* grad);

/// Mean over demos of -(R(demo) - logsumexp_c R(c)).
double irl_loss(const RewardModel& model, const Batch& batch);
/// Mean over (demo, state, masked-out dim, draw) of |r(s + eps e_j) - r(s)|.
double masking_loss(const RewardModel& model, const Batch& batch, const MaskNoise& noise);
double masking_loss(const RewardModel& model, const Batch& batch, Rng& rng, int draws = 1);
double total_loss(const RewardModel& model, const Batch& batch, const TrainConfig& config, Rng& rng);

struct AdamState {
  RewardModelParams first_moment;
  RewardModelParams second_moment;
  long step = 0;
};

AdamState make_adam_state(const RewardModelParams& params);
void adam_step(RewardModelParams& params, const RewardModelParams& grad, AdamState& state, double learning_rate,
               const AdamConfig& config);

struct EpochLog {
  int epoch = 0;
  std::string phase;
  double irl_loss = 0.0;
  double mask_loss = 0.0;
  double total_loss = 0.0;
  double wall_time = 0.0;  // seconds since the phase started
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  /// epoch,phase,irl_loss,mask_loss,total_loss,wall_time
  std::string to_csv() const;
};

struct TrainingState {
  RewardModel model;
  AdamState optimizer;
  int epochs_completed = 0;
  TrainingLog log;
};

using CheckpointHook = std::function<void(const TrainingState&)>;

/// Seeds a fresh model from derive_seed(config.seed, "init").
RewardModel initial_model(const ModelShape& shape, std::shared_ptr<const LanguageEncoder> encoder,
                          std::uint64_t seed);

/// Runs `config.epochs` more epochs of shuffled mini-batch optimization on
/// `state`, appending to its log under `phase`. Per-step randomness comes
/// from derive_seed(seed, epoch, batch), so runs are reproducible and
/// resumable. Throws TrainingError on a non-finite loss.
void run_epochs(TrainingState& state, const std::vector<AnnotatedExample>& dataset, const TrajectoryBank& bank,
                const TrainConfig& config, std::string_view phase, const CheckpointHook& hook = {});

/// Pretraining from a fresh initialization.
TrainingState train(const std::vector<AnnotatedExample>& dataset, const TrajectoryBank& bank,
                    const TrainConfig& config, std::shared_ptr<const LanguageEncoder> encoder,
                    const ModelShape& shape = {}, const CheckpointHook& hook = {});

/// Continues optimizing a pretrained model on new preferences with a fresh
/// optimizer state. All reward-model parameters are updated; the encoder is
/// never touched.
TrainingState fine_tune(const RewardModel& pretrained, const std::vector<AnnotatedExample>& dataset,
                        const TrajectoryBank& bank, const TrainConfig& config, const CheckpointHook& hook = {});

struct AnnotationFailure {
  std::size_t example = 0;  // index in the input dataset
  std::string family;       // "mask" or "disambiguation"
  std::string instruction;
  std::string error;
};

/// Sets every example's mask to predict_mask(instruction text). When the
/// client gives up, the example gets an all-ones mask (no masking signal)
/// and is flagged.
void annotate_masks(std::vector<AnnotatedExample>& dataset, const LlmClient& client,
                    std::vector<AnnotationFailure>* failures = nullptr);

/// Replaces each ambiguous example by one example per disambiguated
/// candidate, contrasting the demo with its group's reference trajectory.
/// Masks come from the candidate text and `original` keeps the ambiguous
/// instruction. If disambiguation fails, the example is kept with a mask
/// predicted from the ambiguous text and flagged. Clear examples pass
/// through untouched. `candidates`, when given, receives one list per input
/// example (empty for clear or failed ones).
std::vector<AnnotatedExample> augment_with_disambiguations(
    const std::vector<AnnotatedExample>& dataset, const TrajectoryBank& bank, const LlmClient& client,
    std::vector<AnnotationFailure>* failures = nullptr,
    std::vector<std::vector<Instruction>>* candidates = nullptr);

}  // namespace masked_irl
