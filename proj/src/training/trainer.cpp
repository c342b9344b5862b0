#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "masked_irl/errors.hpp"
#include "masked_irl/training.hpp"

namespace masked_irl {

AdamState make_adam_state(const RewardModelParams& params) {
  return AdamState{zeros_like(params), zeros_like(params), 0};
}

void adam_step(RewardModelParams& params, const RewardModelParams& grad, AdamState& state, double learning_rate,
               const AdamConfig& config) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  auto p = params.tensors();
  const auto g = grad.tensors();
  auto m = state.first_moment.tensors();
  auto v = state.second_moment.tensors();
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto& mi = *m[i].second;
    auto& vi = *v[i].second;
    const auto& gi = *g[i].second;
    mi = config.beta1 * mi + (1.0 - config.beta1) * gi;
    vi = config.beta2 * vi + (1.0 - config.beta2) * gi.cwiseAbs2();
    p[i].second->array() -=
        learning_rate * (mi.array() / c1) / ((vi.array() / c2).sqrt() + config.epsilon);
  }
}

std::string TrainingLog::to_csv() const {
  std::ostringstream out;
  out << "epoch,phase,irl_loss,mask_loss,total_loss,wall_time\n";
  out << std::setprecision(10);
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.phase << ',' << e.irl_loss << ',' << e.mask_loss << ',' << e.total_loss << ','
        << e.wall_time << '\n';
  }
  return out.str();
}

RewardModel initial_model(const ModelShape& shape, std::shared_ptr<const LanguageEncoder> encoder,
                          std::uint64_t seed) {
  Rng rng(derive_seed(seed, fnv1a64("init")));
  return RewardModel(init_params(rng, shape), std::move(encoder));
}

void run_epochs(TrainingState& state, const std::vector<AnnotatedExample>& dataset, const TrajectoryBank& bank,
                const TrainConfig& config, std::string_view phase, const CheckpointHook& hook) {
  config.validate();
  if (dataset.empty()) throw TrainingError("training dataset is empty");
  const auto start = std::chrono::steady_clock::now();
  const int first = state.epochs_completed;
  for (int epoch = first; epoch < first + config.epochs; ++epoch) {
    Rng order_rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    order_rng.shuffle(order.begin(), order.end());

    LossBreakdown sum;
    double weight = 0.0;
    const auto batch_size = static_cast<std::size_t>(config.batch_size);
    for (std::size_t b = 0; b * batch_size < order.size(); ++b) {
      Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch), b + 1));
      std::vector<const AnnotatedExample*> chunk;
      for (std::size_t i = b * batch_size; i < std::min(order.size(), (b + 1) * batch_size); ++i) {
        chunk.push_back(&dataset[order[i]]);
      }
      const Batch batch = make_batch(chunk, bank, config.negatives, rng);
      MaskNoise noise;
      if (config.effective_lambda() > 0.0) noise = draw_mask_noise(batch, config.mask_draws, rng);

      RewardModelParams grad = zeros_like(state.model.params());
      const LossBreakdown loss = evaluate_loss(state.model, batch, config, &noise, &grad);
      if (!std::isfinite(loss.total) || !grad.all_finite()) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b));
      }
      adam_step(state.model.mutable_params(), grad, state.optimizer, config.learning_rate, config.adam);

      const double w = static_cast<double>(chunk.size());
      sum.irl += w * loss.irl;
      sum.mask += w * loss.mask;
      sum.total += w * loss.total;
      weight += w;
    }
    if (!state.model.params().all_finite()) {
      throw TrainingError("parameters became non-finite at epoch " + std::to_string(epoch));
    }

    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    state.log.epochs.push_back(
        EpochLog{epoch, std::string(phase), sum.irl / weight, sum.mask / weight, sum.total / weight, elapsed});
    state.epochs_completed = epoch + 1;
    if (hook && config.checkpoint_every > 0 && state.epochs_completed % config.checkpoint_every == 0) hook(state);
  }
}

TrainingState train(const std::vector<AnnotatedExample>& dataset, const TrajectoryBank& bank,
                    const TrainConfig& config, std::shared_ptr<const LanguageEncoder> encoder,
                    const ModelShape& shape, const CheckpointHook& hook) {
  RewardModel model = initial_model(shape, std::move(encoder), config.seed);
  AdamState optimizer = make_adam_state(model.params());
  TrainingState state{std::move(model), std::move(optimizer), 0, {}};
  run_epochs(state, dataset, bank, config, "pretrain", hook);
  return state;
}

TrainingState fine_tune(const RewardModel& pretrained, const std::vector<AnnotatedExample>& dataset,
                        const TrajectoryBank& bank, const TrainConfig& config, const CheckpointHook& hook) {
  TrainingState state{pretrained, make_adam_state(pretrained.params()), 0, {}};
  run_epochs(state, dataset, bank, config, "fine_tune", hook);
  return state;
}

}  // namespace masked_irl
