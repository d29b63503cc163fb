#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "lottery/masking/mask.hpp"
#include "lottery/training/trainer.hpp"

namespace lottery {

struct ImpSpec {
  std::size_t rewind_step = 0;  // i, absolute step
  double prune_fraction = 0.1;  // of remaining weights, per round
  double target = 0.6;          // s
  // Extra exact-sparsity masks branched off the chain (each <= target).
  std::vector<double> snapshots;
  std::uint64_t seed = 1;
  // Standard pruning: keep training from the final weights instead of rewinding.
  bool standard = false;

  void validate(const TrainConfig& train) const;
  std::string canonical() const;
};

struct ImpRound {
  std::size_t round = 0;  // 1-based
  Mask mask;              // mask after this round's prune
  bool trimmed = false;   // pruned to the target instead of a full fraction
};

template <typename T>
struct ImpEvent {
  std::size_t round = 0;       // round about to train (1-based)
  const TrainState<T>* state;  // state at the round's first step, mask applied
  const Mask* mask;            // mask the round trains with
};

template <typename T>
struct ImpResult {
  std::vector<ImpRound> rounds;
  std::vector<std::pair<double, Mask>> snapshots;
  // theta_i and gamma_i (for standard pruning: the dense state at step t).
  TrainState<T> rewind;
  // Weights after the last training round; for standard pruning the last
  // round trains with the final mask, so this is the pruned network itself.
  Model<T> final_weights;

  const Mask& final_mask() const { return rounds.back().mask; }
  const Mask& snapshot(double sparsity) const;
};

template <typename T>
using ImpObserver = std::function<void(const ImpEvent<T>&)>;

// Head seed shared by every run of `seed` on a task, so variants of one seed
// differ only in mask and weights.
std::uint64_t head_seed(std::uint64_t seed, const std::string& task_id);

// IMP with rewinding from `start` (theta0 plus gamma0): train to step i, then repeat
// {train m*theta_i to t, prune prune_fraction of the remaining weights by
// magnitude, rewind to theta_i} until the target sparsity; the last round is
// trimmed to land on it exactly. With spec.standard, every round instead
// continues from the final weights for a further t steps.
template <typename T>
ImpResult<T> imp(const Model<T>& start, const Task& task, const TrainConfig& train_config,
                 const ImpSpec& spec, const ImpObserver<T>& observer = {});

// The same loop from a state already trained to the rewind point (step i, or
// step t for standard pruning), e.g. one restored from a dense-run checkpoint.
template <typename T>
ImpResult<T> imp_from(const TrainState<T>& rewind, const Task& task, const TrainConfig& train_config,
                      const ImpSpec& spec, const ImpObserver<T>& observer = {});

struct FinetuneResult {
  EvalResult eval;
  TrainTrace trace;
};

// A_t on `task` from `start` (head attached) with the mask applied; a fresh
// optimizer and substreams from train_config.seed.
template <typename T>
FinetuneResult finetune(const Model<T>& start, const Mask* mask, const Task& task,
                        const TrainConfig& train_config);

}  // namespace lottery
