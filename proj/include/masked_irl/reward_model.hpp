#pragma once

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "masked_irl/core.hpp"
#include "masked_irl/encoder.hpp"
#include "masked_irl/rng.hpp"

namespace masked_irl {

struct ModelShape {
  int embed_dim = 512;
  int film_hidden = 128;
  std::array<int, 3> hidden{128, 256, 128};
  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// Affine layer; bias is stored as an n x 1 matrix so every tensor has the
/// same type.
template <class S>
struct LayerT {
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> weight;
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> bias;
};

/// gamma-net and beta-net: E -> film_hidden -> 19, rectified hidden layer.
/// Reward MLP: 19 -> h0 -> h1 -> h2 -> 1, rectified hidden layers.
/// Stored in double; float copies are used for fast training passes.
template <class S>
struct RewardModelParamsT {
  using Tensor = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

  ModelShape shape;
  LayerT<S> gamma_hidden, gamma_out;
  LayerT<S> beta_hidden, beta_out;
  std::array<LayerT<S>, 4> mlp;

  /// Every tensor with a stable dotted name ("mlp.2.weight", ...).
  std::vector<std::pair<std::string, Tensor*>> tensors();
  std::vector<std::pair<std::string, const Tensor*>> tensors() const;
  std::size_t parameter_count() const;
  bool all_finite() const;
};

using Layer = LayerT<double>;
using RewardModelParams = RewardModelParamsT<double>;

/// Element-wise conversion between precisions.
template <class To, class From>
RewardModelParamsT<To> cast_params(const RewardModelParamsT<From>& params);

/// Hidden layers draw weights and biases from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
/// FiLM output weights use a tenth of that range with biases 1 (gamma) and
/// 0 (beta), so the initial modulation is close to the identity.
RewardModelParams init_params(Rng& rng, const ModelShape& shape);

/// Same shapes, all zeros. Used for gradient and optimizer buffers.
template <class S>
RewardModelParamsT<S> zeros_like(const RewardModelParamsT<S>& params);

/// Zeroes the final reward layer so every reward is exactly 0.
void zero_output_head(RewardModelParams& params);

/// gamma * state + beta, element-wise. Throws ValidationError on length mismatch.
std::vector<double> film_modulate(std::span<const double> state, std::span<const double> gamma,
                                  std::span<const double> beta);

/// Intermediate values of one batched forward pass, kept for backprop.
template <class S>
struct ForwardCacheT {
  using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  Matrix embeddings;           // E x G
  Matrix gamma_act, beta_act;  // film_hidden x G, after rectifier
  Matrix gamma, beta;          // 19 x G
  Matrix states;               // 19 x N
  std::vector<int> group;      // column -> conditioning index
  std::array<Matrix, 4> inputs;  // input to each MLP layer
};

using ForwardCache = ForwardCacheT<double>;

/// Batched forward pass. Column n of `states` is conditioned on column
/// group[n] of `embeddings`. Returns one reward per column.
template <class S>
Eigen::Matrix<S, 1, Eigen::Dynamic> forward_rewards(const RewardModelParamsT<S>& params,
                                                    const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& embeddings,
                                                    const Eigen::Matrix<S, kStateDim, Eigen::Dynamic>& states,
                                                    std::span<const int> group, ForwardCacheT<S>* cache = nullptr);

/// Accumulates d(sum_n upstream_n * r_n)/d(params) into `grad`.
template <class S>
void backward_rewards(const RewardModelParamsT<S>& params, const ForwardCacheT<S>& cache,
                      const Eigen::Matrix<S, 1, Eigen::Dynamic>& upstream, RewardModelParamsT<S>& grad);

/// Parameters bound to a frozen encoder. Embeddings are memoized per text;
/// the memo is guarded so concurrent readers are fine.
class RewardModel {
 public:
  RewardModel(RewardModelParams params, std::shared_ptr<const LanguageEncoder> encoder);
  RewardModel(const RewardModel& other);
  RewardModel& operator=(const RewardModel& other);

  const RewardModelParams& params() const { return params_; }
  RewardModelParams& mutable_params() { return params_; }
  const LanguageEncoder& encoder() const { return *encoder_; }
  std::shared_ptr<const LanguageEncoder> encoder_ptr() const { return encoder_; }

  Eigen::VectorXd embedding(std::string_view text) const;

  double reward(const StateVector& state, std::string_view instruction) const;
  Eigen::RowVectorXd rewards(const StateMatrix& states, std::string_view instruction) const;
  double trajectory_return(const Trajectory& trajectory, std::string_view instruction) const;

 private:
  RewardModelParams params_;
  std::shared_ptr<const LanguageEncoder> encoder_;
  mutable std::mutex memo_mutex_;
  mutable std::map<std::string, Eigen::VectorXd, std::less<>> memo_;
};

double reward_forward(const RewardModelParams& params, const LanguageEncoder& encoder,
                      const StateVector& state, std::string_view instruction);
double trajectory_return(const RewardModelParams& params, const LanguageEncoder& encoder,
                         const Trajectory& trajectory, std::string_view instruction);

}  // namespace masked_irl
