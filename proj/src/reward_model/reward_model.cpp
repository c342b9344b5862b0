#include "masked_irl/reward_model.hpp"

#include <algorithm>
#include <cmath>

#include "masked_irl/errors.hpp"

namespace masked_irl {

namespace {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

constexpr Eigen::Index kColumnBlock = 256;

Layer make_layer(Rng& rng, int in, int out, double weight_scale = 1.0) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Layer layer{Eigen::MatrixXd(out, in), Eigen::MatrixXd(out, 1)};
  for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      layer.weight(r, c) = weight_scale * rng.uniform(-bound, bound);
    }
  }
  for (Eigen::Index r = 0; r < layer.bias.rows(); ++r) layer.bias(r, 0) = rng.uniform(-bound, bound);
  return layer;
}

/// max(W x + b, 0) written straight into `out`.
template <class S, class In>
void affine_relu(const LayerT<S>& layer, const In& input, Mat<S>& out) {
  out.noalias() = layer.weight * input;
  out.colwise() += layer.bias.col(0);
  out = out.cwiseMax(S(0));
}

/// Rectifier derivative applied in place: zero where the activation is zero.
template <class S>
void relu_mask_inplace(Mat<S>& delta, const Mat<S>& activation) {
  delta = (activation.array() > S(0)).select(delta, S(0));
}

template <class S, class Delta, class In>
void accumulate_layer(LayerT<S>& grad, const Delta& delta, const In& input) {
  grad.weight.noalias() += delta * input.transpose();
  grad.bias.col(0) += delta.rowwise().sum();
}

}  // namespace

template <class S>
std::vector<std::pair<std::string, typename RewardModelParamsT<S>::Tensor*>> RewardModelParamsT<S>::tensors() {
  std::vector<std::pair<std::string, Tensor*>> out;
  auto add = [&](const std::string& name, LayerT<S>& layer) {
    out.emplace_back(name + ".weight", &layer.weight);
    out.emplace_back(name + ".bias", &layer.bias);
  };
  add("film.gamma.hidden", gamma_hidden);
  add("film.gamma.out", gamma_out);
  add("film.beta.hidden", beta_hidden);
  add("film.beta.out", beta_out);
  for (std::size_t i = 0; i < mlp.size(); ++i) add("mlp." + std::to_string(i), mlp[i]);
  return out;
}

template <class S>
std::vector<std::pair<std::string, const typename RewardModelParamsT<S>::Tensor*>> RewardModelParamsT<S>::tensors()
    const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : const_cast<RewardModelParamsT*>(this)->tensors()) out.emplace_back(name, t);
  return out;
}

template <class S>
std::size_t RewardModelParamsT<S>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors()) n += static_cast<std::size_t>(t->size());
  return n;
}

template <class S>
bool RewardModelParamsT<S>::all_finite() const {
  for (const auto& [name, t] : tensors()) {
    if (!t->allFinite()) return false;
  }
  return true;
}

template <class To, class From>
RewardModelParamsT<To> cast_params(const RewardModelParamsT<From>& params) {
  auto layer = [](const LayerT<From>& l) {
    return LayerT<To>{l.weight.template cast<To>(), l.bias.template cast<To>()};
  };
  RewardModelParamsT<To> out;
  out.shape = params.shape;
  out.gamma_hidden = layer(params.gamma_hidden);
  out.gamma_out = layer(params.gamma_out);
  out.beta_hidden = layer(params.beta_hidden);
  out.beta_out = layer(params.beta_out);
  for (std::size_t i = 0; i < out.mlp.size(); ++i) out.mlp[i] = layer(params.mlp[i]);
  return out;
}

RewardModelParams init_params(Rng& rng, const ModelShape& shape) {
  if (shape.embed_dim <= 0 || shape.film_hidden <= 0 || shape.hidden[0] <= 0 || shape.hidden[1] <= 0 ||
      shape.hidden[2] <= 0) {
    throw ValidationError("model dimensions must be positive");
  }
  RewardModelParams p;
  p.shape = shape;
  p.gamma_hidden = make_layer(rng, shape.embed_dim, shape.film_hidden);
  p.gamma_out = make_layer(rng, shape.film_hidden, kStateDim, 0.1);
  p.gamma_out.bias.setOnes();
  p.beta_hidden = make_layer(rng, shape.embed_dim, shape.film_hidden);
  p.beta_out = make_layer(rng, shape.film_hidden, kStateDim, 0.1);
  p.beta_out.bias.setZero();
  p.mlp[0] = make_layer(rng, kStateDim, shape.hidden[0]);
  p.mlp[1] = make_layer(rng, shape.hidden[0], shape.hidden[1]);
  p.mlp[2] = make_layer(rng, shape.hidden[1], shape.hidden[2]);
  p.mlp[3] = make_layer(rng, shape.hidden[2], 1);
  return p;
}

template <class S>
RewardModelParamsT<S> zeros_like(const RewardModelParamsT<S>& params) {
  RewardModelParamsT<S> z = params;
  for (auto& [name, t] : z.tensors()) t->setZero();
  return z;
}

void zero_output_head(RewardModelParams& params) {
  params.mlp[3].weight.setZero();
  params.mlp[3].bias.setZero();
}

std::vector<double> film_modulate(std::span<const double> state, std::span<const double> gamma,
                                  std::span<const double> beta) {
  if (state.size() != gamma.size() || state.size() != beta.size()) {
    throw ValidationError("film_modulate: state, gamma and beta lengths differ");
  }
  std::vector<double> out(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) out[i] = gamma[i] * state[i] + beta[i];
  return out;
}

template <class S>
Eigen::Matrix<S, 1, Eigen::Dynamic> forward_rewards(const RewardModelParamsT<S>& params, const Mat<S>& embeddings,
                                                    const Eigen::Matrix<S, kStateDim, Eigen::Dynamic>& states,
                                                    std::span<const int> group, ForwardCacheT<S>* cache) {
  if (static_cast<Eigen::Index>(group.size()) != states.cols()) {
    throw ValidationError("forward_rewards: one group index per state column required");
  }
  if (embeddings.rows() != params.shape.embed_dim) {
    throw ValidationError("forward_rewards: embedding dimension does not match the model");
  }

  ForwardCacheT<S> local;
  ForwardCacheT<S>& c = cache != nullptr ? *cache : local;
  affine_relu(params.gamma_hidden, embeddings, c.gamma_act);
  c.gamma.noalias() = params.gamma_out.weight * c.gamma_act;
  c.gamma.colwise() += params.gamma_out.bias.col(0);
  affine_relu(params.beta_hidden, embeddings, c.beta_act);
  c.beta.noalias() = params.beta_out.weight * c.beta_act;
  c.beta.colwise() += params.beta_out.bias.col(0);

  const Eigen::Index n = states.cols();
  for (auto& m : c.inputs) m.resize(m.rows(), 0);
  c.inputs[0].resize(kStateDim, n);
  c.inputs[1].resize(params.shape.hidden[0], n);
  c.inputs[2].resize(params.shape.hidden[1], n);
  c.inputs[3].resize(params.shape.hidden[2], n);
  Eigen::Matrix<S, 1, Eigen::Dynamic> out(n);

  // Column blocks keep each block's activations resident in cache.
  for (Eigen::Index start = 0; start < n; start += kColumnBlock) {
    const Eigen::Index w = std::min(kColumnBlock, n - start);
    for (Eigen::Index col = start; col < start + w; ++col) {
      const int g = group[static_cast<std::size_t>(col)];
      c.inputs[0].col(col) = c.gamma.col(g).cwiseProduct(states.col(col)) + c.beta.col(g);
    }
    for (std::size_t i = 0; i < 3; ++i) {
      auto dst = c.inputs[i + 1].middleCols(start, w);
      dst.noalias() = params.mlp[i].weight * c.inputs[i].middleCols(start, w);
      dst = (dst.colwise() + params.mlp[i].bias.col(0)).cwiseMax(S(0));
    }
    out.segment(start, w).noalias() = params.mlp[3].weight * c.inputs[3].middleCols(start, w);
  }
  out.array() += params.mlp[3].bias(0, 0);

  if (cache != nullptr) {
    c.embeddings = embeddings;
    c.states = states;
    c.group.assign(group.begin(), group.end());
  }
  return out;
}

template <class S>
void backward_rewards(const RewardModelParamsT<S>& params, const ForwardCacheT<S>& cache,
                      const Eigen::Matrix<S, 1, Eigen::Dynamic>& upstream, RewardModelParamsT<S>& grad) {
  const Eigen::Index groups = cache.gamma.cols();
  Mat<S> d_gamma = Mat<S>::Zero(kStateDim, groups);
  Mat<S> d_beta = Mat<S>::Zero(kStateDim, groups);
  Mat<S> delta, next;
  const Eigen::Index n = upstream.cols();
  for (Eigen::Index start = 0; start < n; start += kColumnBlock) {
    const Eigen::Index w = std::min(kColumnBlock, n - start);
    delta = upstream.segment(start, w);
    for (int i = 3; i >= 0; --i) {
      const auto idx = static_cast<std::size_t>(i);
      const auto input = cache.inputs[idx].middleCols(start, w);
      accumulate_layer(grad.mlp[idx], delta, input);
      next.noalias() = params.mlp[idx].weight.transpose() * delta;
      if (i > 0) next = (input.array() > S(0)).select(next, S(0));
      std::swap(delta, next);
    }
    // delta is now d/d(modulated state) for this block, 19 x w.
    for (Eigen::Index k = 0; k < w; ++k) {
      const Eigen::Index col = start + k;
      const int g = cache.group[static_cast<std::size_t>(col)];
      d_gamma.col(g) += delta.col(k).cwiseProduct(cache.states.col(col));
      d_beta.col(g) += delta.col(k);
    }
  }

  accumulate_layer(grad.gamma_out, d_gamma, cache.gamma_act);
  Mat<S> d_gamma_act = params.gamma_out.weight.transpose() * d_gamma;
  relu_mask_inplace(d_gamma_act, cache.gamma_act);
  accumulate_layer(grad.gamma_hidden, d_gamma_act, cache.embeddings);

  accumulate_layer(grad.beta_out, d_beta, cache.beta_act);
  Mat<S> d_beta_act = params.beta_out.weight.transpose() * d_beta;
  relu_mask_inplace(d_beta_act, cache.beta_act);
  accumulate_layer(grad.beta_hidden, d_beta_act, cache.embeddings);
}

#define MASKED_IRL_INSTANTIATE(S)                                                                              \
  template struct RewardModelParamsT<S>;                                                                       \
  template RewardModelParamsT<S> zeros_like(const RewardModelParamsT<S>&);                                    \
  template Eigen::Matrix<S, 1, Eigen::Dynamic> forward_rewards(                                               \
      const RewardModelParamsT<S>&, const Mat<S>&, const Eigen::Matrix<S, kStateDim, Eigen::Dynamic>&,         \
      std::span<const int>, ForwardCacheT<S>*);                                                                \
  template void backward_rewards(const RewardModelParamsT<S>&, const ForwardCacheT<S>&,                       \
                                 const Eigen::Matrix<S, 1, Eigen::Dynamic>&, RewardModelParamsT<S>&);

MASKED_IRL_INSTANTIATE(double)
MASKED_IRL_INSTANTIATE(float)
#undef MASKED_IRL_INSTANTIATE

template RewardModelParamsT<float> cast_params(const RewardModelParamsT<double>&);
template RewardModelParamsT<double> cast_params(const RewardModelParamsT<float>&);
template RewardModelParamsT<double> cast_params(const RewardModelParamsT<double>&);
template RewardModelParamsT<float> cast_params(const RewardModelParamsT<float>&);

RewardModel::RewardModel(RewardModelParams params, std::shared_ptr<const LanguageEncoder> encoder)
    : params_(std::move(params)), encoder_(std::move(encoder)) {
  if (!encoder_) throw ValidationError("reward model needs an encoder");
  if (encoder_->dim() != params_.shape.embed_dim) {
    throw ValidationError("encoder dimension does not match the model's embedding size");
  }
}

RewardModel::RewardModel(const RewardModel& other) : params_(other.params_), encoder_(other.encoder_) {
  std::lock_guard lock(other.memo_mutex_);
  memo_ = other.memo_;
}

RewardModel& RewardModel::operator=(const RewardModel& other) {
  if (this == &other) return *this;
  params_ = other.params_;
  encoder_ = other.encoder_;
  std::scoped_lock lock(memo_mutex_, other.memo_mutex_);
  memo_ = other.memo_;
  return *this;
}

Eigen::VectorXd RewardModel::embedding(std::string_view text) const {
  std::lock_guard lock(memo_mutex_);
  if (const auto it = memo_.find(text); it != memo_.end()) return it->second;
  Eigen::VectorXd e = encoder_->encode(text);
  memo_.emplace(std::string(text), e);
  return e;
}

Eigen::RowVectorXd RewardModel::rewards(const StateMatrix& states, std::string_view instruction) const {
  const Eigen::MatrixXd h = embedding(instruction);
  const std::vector<int> group(static_cast<std::size_t>(states.cols()), 0);
  return forward_rewards(params_, h, states, group);
}

double RewardModel::reward(const StateVector& state, std::string_view instruction) const {
  StateMatrix m = state.as_eigen();
  return rewards(m, instruction)(0);
}

double RewardModel::trajectory_return(const Trajectory& trajectory, std::string_view instruction) const {
  return rewards(trajectory.matrix(), instruction).sum();
}

double reward_forward(const RewardModelParams& params, const LanguageEncoder& encoder,
                      const StateVector& state, std::string_view instruction) {
  const Eigen::MatrixXd h = encoder.encode(instruction);
  const StateMatrix m = state.as_eigen();
  const int group = 0;
  return forward_rewards(params, h, m, std::span<const int>(&group, 1))(0);
}

double trajectory_return(const RewardModelParams& params, const LanguageEncoder& encoder,
                         const Trajectory& trajectory, std::string_view instruction) {
  const Eigen::MatrixXd h = encoder.encode(instruction);
  const std::vector<int> group(kTrajectoryLength, 0);
  return forward_rewards(params, h, trajectory.matrix(), group).sum();
}

}  // namespace masked_irl
