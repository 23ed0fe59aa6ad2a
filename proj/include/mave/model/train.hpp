#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mave/errors.hpp"
#include "mave/hash.hpp"
#include "mave/model/config.hpp"
#include "mave/model/encode.hpp"
#include "mave/model/network.hpp"
#include "mave/model/params.hpp"

namespace mave::model {

/// Linear warmup from 0 to peak over `warmup` steps, then linear decay to 0
/// at `total`. lr(0) = 0, lr(warmup) = peak, lr(total) = 0.
struct LrSchedule {
  double peak = 3e-5;
  long warmup = 10000;
  long total = 200000;

  double at(long step) const {
    if (step <= 0) return 0.0;
    if (step < warmup) return peak * static_cast<double>(step) / static_cast<double>(warmup);
    if (step >= total) return 0.0;
    return peak * static_cast<double>(total - step) / static_cast<double>(total - warmup);
  }
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-6;
};

/// Bias-corrected Adam update of one tensor in place.
inline void adam_update(Mat& param, const Mat& grad, Mat& m, Mat& v, long t, double lr,
                        const AdamConfig& adam) {
  const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(t));
  m = adam.beta1 * m + (1.0 - adam.beta1) * grad;
  v = adam.beta2 * v + (1.0 - adam.beta2) * grad.cwiseProduct(grad);
  param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + adam.eps);
}

struct TrainState {
  Parameters params;
  Parameters moment1, moment2;
  long step = 0;
  std::vector<double> loss_history;
};

inline TrainState make_train_state(const ModelConfig& config, std::uint64_t seed) {
  TrainState st;
  st.params = init_params(config, seed);
  st.moment1 = Parameters::zeros(config);
  st.moment2 = Parameters::zeros(config);
  return st;
}

/// One optimization step over a batch: summed loss over the batch, full
/// backward pass, Adam update at the scheduled learning rate. Returns the
/// batch loss.
inline double train_step(TrainState& state, std::span<const EncodedInput> batch,
                         const LrSchedule& schedule, const ModelConfig& config,
                         const AdamConfig& adam = AdamConfig{}) {
  Parameters grads = Parameters::zeros(config);
  double batch_loss = 0.0;
  for (const auto& enc : batch) {
    ForwardCache cache;
    const ForwardResult result = forward(enc, state.params, config, &cache);
    batch_loss += loss(result, enc);
    backward(enc, state.params, config, cache, grads);
  }

  auto grad_table = tensor_table(grads);
  for (const auto& nt : grad_table)
    if (!nt.tensor->allFinite())
      throw NumericFault("non-finite gradient in parameter " + nt.name);

  const double lr = schedule.at(state.step);
  const long t = state.step + 1;
  auto params_table = tensor_table(state.params);
  auto m_table = tensor_table(state.moment1);
  auto v_table = tensor_table(state.moment2);
  for (std::size_t i = 0; i < params_table.size(); ++i)
    adam_update(*params_table[i].tensor, *grad_table[i].tensor, *m_table[i].tensor,
                *v_table[i].tensor, t, lr, adam);
  ++state.step;
  state.loss_history.push_back(batch_loss);
  return batch_loss;
}

namespace detail {

/// Seeded Fisher-Yates with a platform-independent stream.
inline void shuffle_indices(std::vector<std::size_t>& idx, std::uint64_t seed) {
  std::uint64_t state = seed;
  for (std::size_t i = idx.size(); i > 1; --i) {
    state = splitmix64(state);
    std::swap(idx[i - 1], idx[state % i]);
  }
}

}  // namespace detail

/// Epoch-shuffled mini-batch training, single-threaded, fully determined by
/// the seed and the example order.
inline TrainState run_training(
    const std::vector<EncodedInput>& examples, const ModelConfig& config,
    const TrainConfig& train, std::uint64_t seed,
    const std::function<void(long step, double lr, double loss)>& on_step = nullptr) {
  if (examples.empty()) throw ContractError("training set is empty");
  TrainState state = make_train_state(config, seed);
  const LrSchedule schedule{train.peak_lr, train.warmup_steps, train.total_steps};

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t cursor = order.size();
  std::uint64_t epoch = 0;

  std::vector<EncodedInput> batch;
  while (state.step < train.total_steps) {
    batch.clear();
    for (int b = 0; b < train.batch_size; ++b) {
      if (cursor == order.size()) {
        detail::shuffle_indices(order, stable_hash(seed, {"epoch", std::to_string(epoch)}));
        ++epoch;
        cursor = 0;
      }
      batch.push_back(examples[order[cursor++]]);
    }
    const double lr = schedule.at(state.step);
    const double batch_loss = train_step(state, batch, schedule, config);
    if (on_step) on_step(state.step, lr, batch_loss);
  }
  return state;
}

}  // namespace mave::model
