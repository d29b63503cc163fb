#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lottery/io/fingerprint.hpp"
#include "lottery/masking/mask.hpp"
#include "lottery/numerics/rng.hpp"
#include "lottery/tasks/task.hpp"
#include "lottery/training/optimizer.hpp"
#include "lottery/transformer/model.hpp"

namespace lottery {

inline constexpr const char* kDataOrderStream = "data-order";
inline constexpr const char* kMlmMaskingStream = "mlm-masking";

/// Everything a training run carries between steps; a checkpoint is a copy of it.
template <typename T>
struct TrainState {
  Model<T> model;
  OptimizerState<T> optimizer;
  std::size_t step = 0;
  Rng data_rng;
  Rng mlm_rng;

  // Fresh state: zero moments, step 0, substreams derived from config.seed.
  static TrainState start(Model<T> model, const TrainConfig& config);
  // Zeroes pruned weights and their optimizer moments.
  void apply_mask(const Mask& mask);
  // Discards moments and the update counter.
  void reset_optimizer();
};

struct TracePoint {
  std::size_t step = 0;
  double value = 0.0;
};

struct TrainTrace {
  std::vector<TracePoint> loss;    // training loss at every step
  std::vector<TracePoint> metric;  // evaluation metric every eval_interval steps
};

template <typename T>
struct TrainOptions {
  // Absolute step to stop at; defaults to config.steps.
  std::optional<std::size_t> until;
  // States at these absolute steps are passed to on_checkpoint (including the
  // starting step when listed).
  std::vector<std::size_t> checkpoint_steps;
  std::function<void(const TrainState<T>&)> on_checkpoint;
};

// Loss of one minibatch; also used by the gradient-check tests.
template <typename T>
ad::Var<T> batch_loss(const BoundModel<T>& bound, const Task& task,
                      std::span<const std::size_t> indices, Rng& mlm_rng);

// Runs steps [state.step, until) of A_t on `task`. Gradients of pruned weights
// are zeroed before each update and the weights re-masked after it, so pruned
// coordinates stay exactly 0 and their moments never move.
template <typename T>
TrainTrace train(TrainState<T>& state, const Mask* mask, const Task& task, const TrainConfig& config,
                 const TrainOptions<T>& options = {});

// One update using the given minibatch (exposed for multi-task training).
template <typename T>
double train_step(TrainState<T>& state, const Mask* mask, const Task& task, const TrainConfig& config,
                  std::span<const std::size_t> indices);

struct EvalResult {
  double value = 0.0;
  bool undefined = false;
  std::vector<double> predictions;
  std::vector<double> references;
};

// Deterministic metric over the full eval split; mlm masks with task.eval_seed.
template <typename T>
EvalResult evaluate(const Model<T>& model, const Mask* mask, const Task& task);

}  // namespace lottery
