#include "lottery/experiments/imp.hpp"

#include <cmath>
#include <cstdio>

#include "lottery/errors.hpp"
#include "lottery/masking/pruning.hpp"
#include "imp_loop.hpp"

namespace lottery {

void ImpSpec::validate(const TrainConfig& train) const {
  if (!(target > 0.0 && target < 1.0)) {
    throw ArgumentError("target sparsity must lie in (0, 1)");
  }
  if (!(prune_fraction > 0.0 && prune_fraction < 1.0)) {
    throw ArgumentError("prune fraction must lie in (0, 1)");
  }
  if (rewind_step > train.steps) {
    throw ArgumentError("rewind step " + std::to_string(rewind_step) + " exceeds t=" +
                        std::to_string(train.steps));
  }
  for (double s : snapshots) {
    if (!(s >= 0.0 && s <= target)) {
      throw ArgumentError("snapshot sparsities must lie in [0, target]");
    }
  }
}

std::string ImpSpec::canonical() const {
  std::string out;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "imp{i=%zu,p=%.17g,s=%.17g,", rewind_step, prune_fraction, target);
  out += buf;
  out += "snap=[";
  for (double s : snapshots) {
    std::snprintf(buf, sizeof(buf), "%.17g;", s);
    out += buf;
  }
  out += "],seed=" + std::to_string(seed) + ",standard=" + (standard ? "1" : "0") + "}";
  return out;
}

template <typename T>
const Mask& ImpResult<T>::snapshot(double sparsity) const {
  for (const auto& [s, m] : snapshots) {
    if (std::abs(s - sparsity) < 1e-12) {
      return m;
    }
  }
  throw StateError("no IMP mask at sparsity " + std::to_string(sparsity));
}

std::uint64_t head_seed(std::uint64_t seed, const std::string& task_id) {
  return derive_seed(seed, "head:" + task_id);
}

namespace {

template <typename T>
struct SingleTaskOps {
  const Task& task;
  const TrainConfig& config;
  const ImpSpec& spec;
  const ImpObserver<T>& observer;

  const Model<T>& model(const TrainState<T>& s) const { return s.model; }
  void prepare(TrainState<T>& s, const Mask& mask, std::size_t round) const {
    if (spec.standard) {
      s.step = 0;
    }
    if (config.reset_optimizer_on_rewind) {
      s.reset_optimizer();
    }
    s.apply_mask(mask);
    if (observer) {
      observer({round, &s, &mask});
    }
  }
  void train(TrainState<T>& s, const Mask& mask) const { lottery::train(s, &mask, task, config); }
};

}  // namespace

template <typename T>
ImpResult<T> imp_from(const TrainState<T>& rewind, const Task& task, const TrainConfig& train_config,
                      const ImpSpec& spec, const ImpObserver<T>& observer) {
  train_config.validate();
  spec.validate(train_config);
  const std::size_t expected = spec.standard ? train_config.steps : spec.rewind_step;
  if (rewind.step != expected) {
    throw StateError("IMP start state is at step " + std::to_string(rewind.step) + ", expected " +
                     std::to_string(expected));
  }
  ImpResult<T> result;
  result.rewind = rewind;
  TrainState<T> state = rewind;
  SingleTaskOps<T> ops{task, train_config, spec, observer};
  detail::ImpChain chain = detail::run_imp_chain<T>(state, result.rewind, spec, ops);
  result.rounds = std::move(chain.rounds);
  result.snapshots = std::move(chain.snapshots);
  result.final_weights = std::move(state.model);
  return result;
}

template <typename T>
ImpResult<T> imp(const Model<T>& start, const Task& task, const TrainConfig& train_config,
                 const ImpSpec& spec, const ImpObserver<T>& observer) {
  train_config.validate();
  spec.validate(train_config);
  TrainState<T> state = TrainState<T>::start(start, train_config);
  TrainOptions<T> to_rewind;
  to_rewind.until = spec.standard ? train_config.steps : spec.rewind_step;
  train(state, nullptr, task, train_config, to_rewind);
  return imp_from(state, task, train_config, spec, observer);
}

template <typename T>
FinetuneResult finetune(const Model<T>& start, const Mask* mask, const Task& task,
                        const TrainConfig& train_config) {
  FinetuneResult r;
  TrainState<T> state = TrainState<T>::start(start, train_config);
  r.trace = train(state, mask, task, train_config);
  r.eval = evaluate(state.model, mask, task);
  return r;
}

#define LOTTERY_INSTANTIATE_IMP(T)                                                              \
  template struct ImpResult<T>;                                                                 \
  template ImpResult<T> imp<T>(const Model<T>&, const Task&, const TrainConfig&, const ImpSpec&, \
                               const ImpObserver<T>&);                                          \
  template ImpResult<T> imp_from<T>(const TrainState<T>&, const Task&, const TrainConfig&,       \
                                    const ImpSpec&, const ImpObserver<T>&);                     \
  template FinetuneResult finetune<T>(const Model<T>&, const Mask*, const Task&, const TrainConfig&);

LOTTERY_INSTANTIATE_IMP(float)
LOTTERY_INSTANTIATE_IMP(double)

}  // namespace lottery
