#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "masked_irl/errors.hpp"
#include "masked_irl/training.hpp"

namespace masked_irl {

namespace {

struct Conditioning {
  Eigen::MatrixXd embeddings;
  std::vector<int> item_group;
};

Conditioning condition(const RewardModel& model, const Batch& batch) {
  std::map<std::string, int, std::less<>> index;
  std::vector<std::string_view> texts;
  Conditioning c;
  for (const auto& item : batch.items) {
    auto [it, inserted] = index.emplace(item.instruction, static_cast<int>(texts.size()));
    if (inserted) texts.push_back(item.instruction);
    c.item_group.push_back(it->second);
  }
  c.embeddings.resize(model.params().shape.embed_dim, static_cast<Eigen::Index>(texts.size()));
  for (std::size_t g = 0; g < texts.size(); ++g) {
    c.embeddings.col(static_cast<Eigen::Index>(g)) = model.embedding(texts[g]);
  }
  return c;
}

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

std::string_view to_string(TrainMode m) {
  switch (m) {
    case TrainMode::kMaskedIrl: return "masked_irl";
    case TrainMode::kExplicitMask: return "explicit_mask";
    case TrainMode::kLcRl: return "lc_rl";
  }
  return "masked_irl";
}

TrainMode train_mode_from_string(std::string_view s) {
  if (s == "masked_irl") return TrainMode::kMaskedIrl;
  if (s == "explicit_mask") return TrainMode::kExplicitMask;
  if (s == "lc_rl") return TrainMode::kLcRl;
  throw ValidationError("unknown training mode: " + std::string(s));
}

std::string_view to_string(Precision p) { return p == Precision::kFloat32 ? "float32" : "float64"; }

Precision precision_from_string(std::string_view s) {
  if (s == "float32") return Precision::kFloat32;
  if (s == "float64") return Precision::kFloat64;
  throw ValidationError("unknown precision: " + std::string(s));
}

void TrainConfig::validate() const {
  if (lambda < 0.0) throw ValidationError("lambda must be non-negative");
  if (learning_rate <= 0.0) throw ValidationError("learning rate must be positive");
  if (batch_size < 1) throw ValidationError("batch size must be at least 1");
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
  if (negatives < 0) throw ValidationError("negatives must be non-negative");
  if (mask_draws < 1) throw ValidationError("mask_draws must be at least 1");
}

Batch make_batch(std::span<const AnnotatedExample* const> examples, const TrajectoryBank& bank, int negatives,
                 Rng& rng) {
  Batch batch;
  batch.items.reserve(examples.size());
  for (const AnnotatedExample* ex : examples) {
    const TrajectoryGroup& group = bank.group(ex->config_id, ex->pair_id);
    CandidateSet set;
    set.instruction = ex->instruction.text;
    set.mask = ex->mask;
    set.candidates.push_back(ex->trajectory.matrix());

    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
      if (static_cast<int>(i) != ex->demo_id) others.push_back(i);
    }
    const std::size_t take = std::min(others.size(), static_cast<std::size_t>(negatives));
    // Partial Fisher-Yates: the first `take` entries become a uniform sample.
    for (std::size_t i = 0; i < take; ++i) {
      std::swap(others[i], others[i + rng.index(others.size() - i)]);
      set.candidates.push_back(group.trajectories[others[i]].matrix());
    }
    batch.items.push_back(std::move(set));
  }
  return batch;
}

Batch make_batch(const std::vector<AnnotatedExample>& examples, const TrajectoryBank& bank, int negatives,
                 Rng& rng) {
  std::vector<const AnnotatedExample*> ptrs;
  for (const auto& e : examples) ptrs.push_back(&e);
  return make_batch(ptrs, bank, negatives, rng);
}

MaskNoise draw_mask_noise(const Batch& batch, int draws, Rng& rng) {
  MaskNoise noise;
  noise.draws.resize(batch.items.size());
  for (std::size_t i = 0; i < batch.items.size(); ++i) {
    const auto& demo = batch.items[i].candidates.front();
    for (int k = 0; k < draws; ++k) {
      StateMatrix eps(kStateDim, demo.cols());
      for (Eigen::Index t = 0; t < eps.cols(); ++t) {
        for (int j = 0; j < kStateDim; ++j) eps(j, t) = rng.uniform();
      }
      noise.draws[i].push_back(std::move(eps));
    }
  }
  return noise;
}

namespace {

template <class S>
LossBreakdown evaluate_loss_as(const RewardModel& model, const Batch& batch, const TrainConfig& config,
                               const MaskNoise* noise, RewardModelParams* grad) {
  LossBreakdown out;
  if (batch.items.empty()) return out;
  const double lambda = config.effective_lambda();
  const bool use_mask_loss = lambda > 0.0;
  const bool explicit_mask = config.mode == TrainMode::kExplicitMask;
  if (use_mask_loss && noise == nullptr) throw ValidationError("masking loss needs a noise sample");

  const Conditioning cond = condition(model, batch);

  // Column layout: every candidate state of every item, then the perturbed
  // copies used by the masking loss.
  std::vector<Eigen::Index> item_offset(batch.items.size());
  Eigen::Index columns = 0;
  for (std::size_t i = 0; i < batch.items.size(); ++i) {
    if (batch.items[i].candidates.empty()) throw ValidationError("candidate set is empty");
    item_offset[i] = columns;
    for (const auto& c : batch.items[i].candidates) columns += c.cols();
  }
  const Eigen::Index irl_columns = columns;

  struct Perturbed {
    Eigen::Index base;  // column of the unperturbed demo state
  };
  std::vector<Perturbed> perturbed;
  if (use_mask_loss) {
    for (std::size_t i = 0; i < batch.items.size(); ++i) {
      const auto& item = batch.items[i];
      const int masked_dims = kStateDim - item.mask.count();
      columns += static_cast<Eigen::Index>(noise->draws.at(i).size()) * item.candidates.front().cols() * masked_dims;
    }
    perturbed.reserve(static_cast<std::size_t>(columns - irl_columns));
  }

  Eigen::Matrix<S, kStateDim, Eigen::Dynamic> states(kStateDim, columns);
  std::vector<int> group(static_cast<std::size_t>(columns));
  for (std::size_t i = 0; i < batch.items.size(); ++i) {
    const auto& item = batch.items[i];
    Eigen::Index col = item_offset[i];
    const Eigen::Matrix<double, kStateDim, 1> m = item.mask.as_eigen();
    for (const auto& c : item.candidates) {
      if (explicit_mask) {
        states.middleCols(col, c.cols()) = (c.array().colwise() * m.array()).template cast<S>();
      } else {
        states.middleCols(col, c.cols()) = c.template cast<S>();
      }
      std::fill_n(group.begin() + col, c.cols(), cond.item_group[i]);
      col += c.cols();
    }
  }
  if (use_mask_loss) {
    Eigen::Index col = irl_columns;
    for (std::size_t i = 0; i < batch.items.size(); ++i) {
      const auto& item = batch.items[i];
      const auto& demo = item.candidates.front();
      for (const auto& eps : noise->draws[i]) {
        for (Eigen::Index t = 0; t < demo.cols(); ++t) {
          for (int j = 0; j < kStateDim; ++j) {
            if (item.mask.relevant(j)) continue;
            // Perturb in double, then round once.
            Eigen::Matrix<double, kStateDim, 1> s = demo.col(t);
            s(j) += eps(j, t);
            states.col(col) = s.template cast<S>();
            group[static_cast<std::size_t>(col)] = cond.item_group[i];
            perturbed.push_back({item_offset[i] + t});
            ++col;
          }
        }
      }
    }
  }

  const RewardModelParamsT<S> params = cast_params<S>(model.params());
  ForwardCacheT<S> cache;
  const Eigen::RowVectorXd r =
      forward_rewards<S>(params, cond.embeddings.template cast<S>(), states, group,
                         grad != nullptr ? &cache : nullptr)
          .template cast<double>();

  Eigen::RowVectorXd upstream;
  if (grad != nullptr) upstream = Eigen::RowVectorXd::Zero(columns);

  const double n_items = static_cast<double>(batch.items.size());
  double irl = 0.0;
  for (std::size_t i = 0; i < batch.items.size(); ++i) {
    const auto& item = batch.items[i];
    Eigen::VectorXd returns(static_cast<Eigen::Index>(item.candidates.size()));
    Eigen::Index col = item_offset[i];
    for (std::size_t c = 0; c < item.candidates.size(); ++c) {
      const Eigen::Index len = item.candidates[c].cols();
      returns(static_cast<Eigen::Index>(c)) = r.segment(col, len).sum();
      col += len;
    }
    const double lse = log_sum_exp(returns);
    irl += lse - returns(0);
    if (grad != nullptr) {
      const Eigen::VectorXd softmax = (returns.array() - lse).exp();
      col = item_offset[i];
      for (std::size_t c = 0; c < item.candidates.size(); ++c) {
        const Eigen::Index len = item.candidates[c].cols();
        const double d = (softmax(static_cast<Eigen::Index>(c)) - (c == 0 ? 1.0 : 0.0)) / n_items;
        upstream.segment(col, len).array() += d;
        col += len;
      }
    }
  }
  out.irl = irl / n_items;

  if (use_mask_loss && !perturbed.empty()) {
    const double terms = static_cast<double>(perturbed.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < perturbed.size(); ++k) {
      const Eigen::Index col = irl_columns + static_cast<Eigen::Index>(k);
      const double diff = r(col) - r(perturbed[k].base);
      sum += std::abs(diff);
      if (grad != nullptr && diff != 0.0) {
        const double d = (diff > 0.0 ? 1.0 : -1.0) * lambda / terms;
        upstream(col) += d;
        upstream(perturbed[k].base) -= d;
      }
    }
    out.mask = sum / terms;
  }
  out.total = out.irl + lambda * out.mask;

  if (grad != nullptr) {
    RewardModelParamsT<S> g = zeros_like(params);
    backward_rewards<S>(params, cache, upstream.template cast<S>(), g);
    const RewardModelParams gd = cast_params<double>(g);
    auto dst = grad->tensors();
    const auto src = gd.tensors();
    for (std::size_t i = 0; i < dst.size(); ++i) *dst[i].second += *src[i].second;
  }
  return out;
}

}  // namespace

LossBreakdown evaluate_loss(const RewardModel& model, const Batch& batch, const TrainConfig& config,
                            const MaskNoise* noise, RewardModelParams* grad) {
  if (config.precision == Precision::kFloat32) return evaluate_loss_as<float>(model, batch, config, noise, grad);
  return evaluate_loss_as<double>(model, batch, config, noise, grad);
}

double irl_loss(const RewardModel& model, const Batch& batch) {
  TrainConfig config;
  config.mode = TrainMode::kLcRl;
  config.precision = Precision::kFloat64;
  return evaluate_loss(model, batch, config, nullptr, nullptr).irl;
}

double masking_loss(const RewardModel& model, const Batch& batch, const MaskNoise& noise) {
  TrainConfig config;
  config.mode = TrainMode::kMaskedIrl;
  config.lambda = 1.0;
  config.precision = Precision::kFloat64;
  return evaluate_loss(model, batch, config, &noise, nullptr).mask;
}

double masking_loss(const RewardModel& model, const Batch& batch, Rng& rng, int draws) {
  const MaskNoise noise = draw_mask_noise(batch, draws, rng);
  return masking_loss(model, batch, noise);
}

double total_loss(const RewardModel& model, const Batch& batch, const TrainConfig& config, Rng& rng) {
  MaskNoise noise;
  if (config.effective_lambda() > 0.0) noise = draw_mask_noise(batch, config.mask_draws, rng);
  return evaluate_loss(model, batch, config, &noise, nullptr).total;
}

}  // namespace masked_irl
