#include "lottery/experiments/multitask.hpp"

#include <algorithm>

#include "imp_loop.hpp"
#include "lottery/errors.hpp"

namespace lottery {

std::vector<std::size_t> mixing_schedule(std::span<const std::size_t> sizes, std::size_t steps,
                                         std::uint64_t seed) {
  std::vector<double> weights(sizes.begin(), sizes.end());
  Rng rng = Rng::substream(seed, kTaskMixingStream);
  std::vector<std::size_t> out(steps);
  for (auto& k : out) {
    k = rng.categorical(weights);
  }
  return out;
}

namespace {

void check_tasks(std::span<const Task* const> tasks, const ModelConfig& config) {
  if (tasks.empty()) {
    throw ArgumentError("multi-task training needs at least one task");
  }
  for (const Task* t : tasks) {
    if (t->vocab_size != config.vocab) {
      throw ConfigError("task '" + t->id + "' has vocab " + std::to_string(t->vocab_size) +
                        " but the backbone has " + std::to_string(config.vocab));
    }
    if (t->train.empty()) {
      throw DataError("task '" + t->id + "' has an empty training split");
    }
  }
}

template <typename T>
void take_head(TensorMap<T>& from, TensorMap<T>& into, const TensorMap<T>& names) {
  for (const auto& [name, _] : names) {
    auto node = from.extract(name);
    into.insert(std::move(node));
  }
}

}  // namespace

template <typename T>
MultitaskState<T> MultitaskState<T>::start(const Model<T>& backbone, std::span<const Task* const> tasks,
                                           const TrainConfig& config) {
  check_tasks(tasks, backbone.config);
  MultitaskState s;
  Model<T> bare;
  bare.config = backbone.config;
  bare.backbone = backbone.backbone;
  for (const Task* t : tasks) {
    if (s.specs.count(t->id) != 0) {
      throw ArgumentError("task '" + t->id + "' listed twice");
    }
    Model<T> with = attach_head(bare, t->head, head_seed(config.seed, t->id));
    s.specs[t->id] = t->head;
    s.heads[t->id] = std::move(with.head);
    TensorMap<T> zeros;
    for (const auto& [name, tensor] : s.heads[t->id]) {
      zeros.emplace(name, Tensor<T>(tensor.shape()));
    }
    s.head_m[t->id] = zeros;
    s.head_v[t->id] = std::move(zeros);
  }
  const std::string first = tasks.front()->id;
  bare.head_spec = s.specs[first];
  bare.head = std::move(s.heads[first]);
  s.heads.erase(first);
  s.shared = TrainState<T>::start(std::move(bare), config);
  s.head_m.erase(first);
  s.head_v.erase(first);
  s.active = first;
  s.mixing_rng = Rng::substream(config.seed, kTaskMixingStream);
  return s;
}

template <typename T>
void MultitaskState<T>::activate(const std::string& task_id) {
  if (task_id == active) {
    return;
  }
  if (heads.count(task_id) == 0) {
    throw StateError("no head for task '" + task_id + "'");
  }
  TensorMap<T>& model_head = shared.model.head;
  const TensorMap<T> names = model_head;
  TensorMap<T> parked, parked_m, parked_v;
  take_head(model_head, parked, names);
  take_head(shared.optimizer.m, parked_m, names);
  take_head(shared.optimizer.v, parked_v, names);

  const TensorMap<T> incoming = heads.at(task_id);
  take_head(heads.at(task_id), model_head, incoming);
  take_head(head_m.at(task_id), shared.optimizer.m, incoming);
  take_head(head_v.at(task_id), shared.optimizer.v, incoming);
  heads.erase(task_id);
  head_m.erase(task_id);
  head_v.erase(task_id);

  heads[active] = std::move(parked);
  head_m[active] = std::move(parked_m);
  head_v[active] = std::move(parked_v);
  shared.model.head_spec = specs.at(task_id);
  active = task_id;
}

template <typename T>
void MultitaskState<T>::apply_mask(const Mask& mask) {
  shared.apply_mask(mask);
}

template <typename T>
void MultitaskState<T>::reset_optimizer() {
  shared.reset_optimizer();
  for (auto& [id, m] : head_m) {
    for (auto& [name, t] : m) {
      t = Tensor<T>(t.shape());
    }
    for (auto& [name, t] : head_v.at(id)) {
      t = Tensor<T>(t.shape());
    }
  }
}

template <typename T>
void train_multitask(MultitaskState<T>& state, const Mask* mask, std::span<const Task* const> tasks,
                     const TrainConfig& config, std::optional<std::size_t> until) {
  config.validate();
  check_tasks(tasks, state.shared.model.config);
  const std::size_t stop = until.value_or(config.steps);
  if (stop > config.steps) {
    throw ArgumentError("cannot train past t=" + std::to_string(config.steps));
  }
  std::vector<double> weights;
  for (const Task* t : tasks) {
    weights.push_back(static_cast<double>(t->train.size()));
  }
  if (mask != nullptr) {
    state.apply_mask(*mask);
  }
  while (state.shared.step < stop) {
    const Task& task = *tasks[state.mixing_rng.categorical(weights)];
    state.activate(task.id);
    const std::size_t n = task.train.size();
    const std::vector<std::size_t> indices = state.shared.data_rng.choice(n, std::min(config.batch_size, n));
    train_step(state.shared, mask, task, config, indices);
  }
}

namespace {

template <typename T>
struct MultitaskOps {
  std::span<const Task* const> tasks;
  const TrainConfig& config;
  const ImpSpec& spec;

  const Model<T>& model(const MultitaskState<T>& s) const { return s.shared.model; }
  void prepare(MultitaskState<T>& s, const Mask& mask, std::size_t) const {
    if (spec.standard) {
      s.shared.step = 0;
    }
    if (config.reset_optimizer_on_rewind) {
      s.reset_optimizer();
    }
    s.apply_mask(mask);
  }
  void train(MultitaskState<T>& s, const Mask& mask) const { train_multitask(s, &mask, tasks, config); }
};

}  // namespace

template <typename T>
MultitaskImpResult multitask_imp(const Model<T>& backbone, std::span<const Task* const> tasks,
                                 const TrainConfig& config, const ImpSpec& spec) {
  config.validate();
  spec.validate(config);
  MultitaskState<T> state = MultitaskState<T>::start(backbone, tasks, config);
  train_multitask(state, nullptr, tasks, config, spec.standard ? config.steps : spec.rewind_step);
  const MultitaskState<T> rewind = state;
  MultitaskOps<T> ops{tasks, config, spec};
  detail::ImpChain chain = detail::run_imp_chain<T>(state, rewind, spec, ops);
  return {std::move(chain.rounds), std::move(chain.snapshots)};
}

#define LOTTERY_INSTANTIATE_MULTITASK(T)                                                          \
  template struct MultitaskState<T>;                                                              \
  template void train_multitask<T>(MultitaskState<T>&, const Mask*, std::span<const Task* const>, \
                                   const TrainConfig&, std::optional<std::size_t>);               \
  template MultitaskImpResult multitask_imp<T>(const Model<T>&, std::span<const Task* const>,     \
                                               const TrainConfig&, const ImpSpec&);

LOTTERY_INSTANTIATE_MULTITASK(float)
LOTTERY_INSTANTIATE_MULTITASK(double)

}  // namespace lottery
