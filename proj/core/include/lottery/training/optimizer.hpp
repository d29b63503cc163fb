#pragma once

#include <cstdint>
#include <string>

#include "lottery/transformer/model.hpp"

namespace lottery {

struct TrainConfig {
  double lr = 1e-3;
  std::size_t steps = 300;  // t
  std::size_t batch_size = 16;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  std::size_t eval_interval = 0;  // 0 disables intermediate evaluation
  bool reset_optimizer_on_rewind = true;

  void validate() const;
  std::string canonical() const;
};

// lr0 (1 - step / t); throws ArgumentError when step > t.
double lr_at(const TrainConfig& config, std::size_t step);

// Rewind points are round(fraction * t).
std::size_t rewind_step(const TrainConfig& config, double fraction);

template <typename T>
struct OptimizerState {
  TensorMap<T> m;
  TensorMap<T> v;
  std::uint64_t step = 0;  // completed updates

  static OptimizerState zeros_like(const Model<T>& model);
};

// Weight matrices (backbone and head alike) decay; biases and norm parameters do not.
bool applies_weight_decay(const std::string& name);

// Decoupled weight decay followed by the bias-corrected Adam step:
//   theta <- theta (1 - lr wd)
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   theta <- theta - lr (m / (1 - b1^k)) / (sqrt(v / (1 - b2^k)) + eps)
// `grads` must hold every parameter of `model`. Throws NumericError naming the
// first tensor with a non-finite gradient, before anything is modified.
template <typename T>
void adamw_step(Model<T>& model, const TensorMap<T>& grads, OptimizerState<T>& state, double lr,
                const TrainConfig& config);

}  // namespace lottery
