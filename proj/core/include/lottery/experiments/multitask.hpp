#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lottery/experiments/imp.hpp"

namespace lottery {

inline constexpr const char* kTaskMixingStream = "task-mixing";

// Task index of each of `steps` draws, with probability proportional to
// sizes[k]; reads the "task-mixing" substream of `seed`.
std::vector<std::size_t> mixing_schedule(std::span<const std::size_t> sizes, std::size_t steps,
                                         std::uint64_t seed);

/// Shared backbone with one head per task. `shared` holds the active task's
/// head and moments; the others are parked until their task is drawn.
template <typename T>
struct MultitaskState {
  TrainState<T> shared;
  std::string active;
  std::map<std::string, HeadSpec> specs;
  std::map<std::string, TensorMap<T>> heads;
  std::map<std::string, TensorMap<T>> head_m;
  std::map<std::string, TensorMap<T>> head_v;
  Rng mixing_rng;

  // Heads from head_seed(config.seed, id); data order and MLM masking as in
  // TrainState::start.
  static MultitaskState start(const Model<T>& backbone, std::span<const Task* const> tasks,
                              const TrainConfig& config);
  void activate(const std::string& task_id);
  void apply_mask(const Mask& mask);
  void reset_optimizer();
};

// Steps [state.step, until) (until defaults to t): draw a task by size, take its minibatch from the
// shared data-order stream, and update with that task's head and loss.
template <typename T>
void train_multitask(MultitaskState<T>& state, const Mask* mask, std::span<const Task* const> tasks,
                     const TrainConfig& config, std::optional<std::size_t> until = std::nullopt);

struct MultitaskImpResult {
  std::vector<ImpRound> rounds;
  std::vector<std::pair<double, Mask>> snapshots;
  const Mask& final_mask() const { return rounds.back().mask; }
};

// IMP over the shared backbone trained with the mixed objective. With a
// single task this is exactly imp().
template <typename T>
MultitaskImpResult multitask_imp(const Model<T>& backbone, std::span<const Task* const> tasks,
                                 const TrainConfig& config, const ImpSpec& spec);

}  // namespace lottery
