#include "lottery/training/trainer.hpp"

#include <algorithm>

#include "lottery/errors.hpp"
#include "lottery/masking/pruning.hpp"

namespace lottery {

template <typename T>
TrainState<T> TrainState<T>::start(Model<T> model, const TrainConfig& config) {
  TrainState<T> s;
  s.optimizer = OptimizerState<T>::zeros_like(model);
  s.model = std::move(model);
  s.data_rng = Rng::substream(config.seed, kDataOrderStream);
  s.mlm_rng = Rng::substream(config.seed, kMlmMaskingStream);
  return s;
}

template <typename T>
void TrainState<T>::apply_mask(const Mask& mask) {
  apply_in_place(mask, model);
  for (const auto& [name, bits] : mask.tensors()) {
    Tensor<T>& m = optimizer.m.at(name);
    Tensor<T>& v = optimizer.v.at(name);
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i] == 0) {
        m[i] = T{0};
        v[i] = T{0};
      }
    }
  }
}

template <typename T>
void TrainState<T>::reset_optimizer() {
  optimizer = OptimizerState<T>::zeros_like(model);
}

namespace {

constexpr std::size_t kEvalBatch = 128;

template <typename T>
std::size_t argmax_row(const Tensor<T>& logits, std::size_t row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.cols(); ++c) {
    if (logits.at(row, c) > logits.at(row, best)) {
      best = c;
    }
  }
  return best;
}

struct MlmPack {
  TokenBatch batch;
  std::vector<std::size_t> rows;
  std::vector<std::uint32_t> targets;
};

MlmPack pack_mlm(const Task& task, std::span<const std::size_t> indices,
                 const std::vector<Example>& examples, Rng& rng) {
  MlmPack p;
  std::vector<std::vector<std::uint32_t>> seqs;
  std::size_t offset = 0;
  for (std::size_t idx : indices) {
    MlmExample ex = mask_sequence(examples[idx].tokens, task.mask_rate, rng);
    if (ex.positions.empty()) {
      continue;
    }
    for (std::size_t k = 0; k < ex.positions.size(); ++k) {
      p.rows.push_back(offset + ex.positions[k]);
      p.targets.push_back(ex.targets[k]);
    }
    offset += ex.input.size();
    seqs.push_back(std::move(ex.input));
  }
  if (!seqs.empty()) {
    p.batch = TokenBatch::pack(seqs, task.max_seq_len);
  }
  return p;
}

TokenBatch pack_examples(const Task& task, std::span<const std::size_t> indices,
                         const std::vector<Example>& examples) {
  std::vector<std::vector<std::uint32_t>> seqs;
  seqs.reserve(indices.size());
  for (std::size_t idx : indices) {
    seqs.push_back(examples[idx].tokens);
  }
  return TokenBatch::pack(seqs, task.max_seq_len);
}

}  // namespace

template <typename T>
ad::Var<T> batch_loss(const BoundModel<T>& bound, const Task& task,
                      std::span<const std::size_t> indices, Rng& mlm_rng) {
  if (task.kind == TaskKind::mlm) {
    MlmPack p = pack_mlm(task, indices, task.train, mlm_rng);
    if (p.rows.empty()) {
      return {};
    }
    ad::Var<T> hidden = encode(bound, p.batch);
    ad::Var<T> logits = mlm_logits(bound, hidden, std::span<const std::size_t>(p.rows));
    return ad::cross_entropy(logits, std::span<const std::uint32_t>(p.targets));
  }
  const TokenBatch batch = pack_examples(task, indices, task.train);
  ad::Var<T> out = sequence_output(bound, encode(bound, batch), batch);
  if (task.kind == TaskKind::regression) {
    std::vector<T> targets;
    for (std::size_t idx : indices) {
      targets.push_back(static_cast<T>(task.train[idx].label));
    }
    return ad::mse(out, std::span<const T>(targets));
  }
  std::vector<std::uint32_t> labels;
  for (std::size_t idx : indices) {
    labels.push_back(static_cast<std::uint32_t>(task.train[idx].label));
  }
  return ad::cross_entropy(out, std::span<const std::uint32_t>(labels));
}

template <typename T>
double train_step(TrainState<T>& state, const Mask* mask, const Task& task, const TrainConfig& config,
                  std::span<const std::size_t> indices) {
  if (!state.model.head_spec || !(*state.model.head_spec == task.head)) {
    throw StateError("model head does not match task '" + task.id + "'");
  }
  ad::Tape<T> tape;
  const BoundModel<T> bound = bind(tape, state.model, mask);
  ad::Var<T> loss = batch_loss(bound, task, indices, state.mlm_rng);
  double value = 0.0;
  if (loss.valid()) {
    value = static_cast<double>(loss.value().item());
    tape.backward(loss);
    TensorMap<T> grads;
    for (const auto& [name, leaf] : bound.leaves) {
      grads.emplace(name, leaf.grad());
    }
    if (mask != nullptr) {
      for (const auto& [name, bits] : mask->tensors()) {
        Tensor<T>& g = grads.at(name);
        for (std::size_t i = 0; i < bits.size(); ++i) {
          if (bits[i] == 0) {
            g[i] = T{0};
          }
        }
      }
    }
    adamw_step(state.model, grads, state.optimizer, lr_at(config, state.step), config);
    if (mask != nullptr) {
      apply_in_place(*mask, state.model);
    }
  }
  ++state.step;
  return value;
}

template <typename T>
TrainTrace train(TrainState<T>& state, const Mask* mask, const Task& task, const TrainConfig& config,
                 const TrainOptions<T>& options) {
  if (config.steps == 0) {
    return {};
  }
  config.validate();
  if (task.train.empty()) {
    throw DataError("task '" + task.id + "' has an empty training split");
  }
  const std::size_t until = options.until.value_or(config.steps);
  if (until > config.steps) {
    throw ArgumentError("cannot train past t=" + std::to_string(config.steps));
  }
  if (state.step > until) {
    throw StateError("state is already at step " + std::to_string(state.step));
  }
  if (mask != nullptr) {
    state.apply_mask(*mask);
  }
  auto wants_checkpoint = [&](std::size_t step) {
    return options.on_checkpoint &&
           std::find(options.checkpoint_steps.begin(), options.checkpoint_steps.end(), step) !=
               options.checkpoint_steps.end();
  };
  TrainTrace trace;
  const std::size_t n = task.train.size();
  const std::size_t bs = std::min(config.batch_size, n);
  while (state.step < until) {
    if (wants_checkpoint(state.step)) {
      options.on_checkpoint(state);
    }
    const std::size_t step = state.step;
    const std::vector<std::size_t> indices = state.data_rng.choice(n, bs);
    const double loss = train_step(state, mask, task, config, indices);
    trace.loss.push_back({step, loss});
    if (config.eval_interval > 0 && state.step % config.eval_interval == 0) {
      trace.metric.push_back({state.step, evaluate(state.model, mask, task).value});
    }
  }
  if (wants_checkpoint(state.step)) {
    options.on_checkpoint(state);
  }
  return trace;
}

template <typename T>
EvalResult evaluate(const Model<T>& model, const Mask* mask, const Task& task) {
  if (task.eval.empty()) {
    throw DataError("task '" + task.id + "' has an empty eval split");
  }
  EvalResult r;
  Rng eval_rng(task.eval_seed);
  for (std::size_t lo = 0; lo < task.eval.size(); lo += kEvalBatch) {
    const std::size_t hi = std::min(lo + kEvalBatch, task.eval.size());
    std::vector<std::size_t> idx(hi - lo);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      idx[i] = lo + i;
    }
    ad::Tape<T> tape(false);
    const BoundModel<T> bound = bind(tape, model, mask);
    if (task.kind == TaskKind::mlm) {
      MlmPack p = pack_mlm(task, idx, task.eval, eval_rng);
      if (p.rows.empty()) {
        continue;
      }
      const Tensor<T> logits =
          mlm_logits(bound, encode(bound, p.batch), std::span<const std::size_t>(p.rows)).value();
      for (std::size_t k = 0; k < p.rows.size(); ++k) {
        r.predictions.push_back(static_cast<double>(argmax_row(logits, k)));
        r.references.push_back(static_cast<double>(p.targets[k]));
      }
      continue;
    }
    const TokenBatch batch = pack_examples(task, idx, task.eval);
    const Tensor<T> out = sequence_output(bound, encode(bound, batch), batch).value();
    for (std::size_t k = 0; k < idx.size(); ++k) {
      r.predictions.push_back(task.kind == TaskKind::regression ? static_cast<double>(out[k])
                                                                : static_cast<double>(argmax_row(out, k)));
      r.references.push_back(task.eval[idx[k]].label);
    }
  }
  const MetricValue mv = metric(r.predictions, r.references, task.metric);
  r.value = mv.value;
  r.undefined = mv.undefined;
  return r;
}

#define LOTTERY_INSTANTIATE_TRAINER(T)                                                          \
  template struct TrainState<T>;                                                                \
  template ad::Var<T> batch_loss<T>(const BoundModel<T>&, const Task&, std::span<const std::size_t>, \
                                    Rng&);                                                      \
  template double train_step<T>(TrainState<T>&, const Mask*, const Task&, const TrainConfig&,   \
                                std::span<const std::size_t>);                                  \
  template TrainTrace train<T>(TrainState<T>&, const Mask*, const Task&, const TrainConfig&,    \
                               const TrainOptions<T>&);                                         \
  template EvalResult evaluate<T>(const Model<T>&, const Mask*, const Task&);

LOTTERY_INSTANTIATE_TRAINER(float)
LOTTERY_INSTANTIATE_TRAINER(double)

}  // namespace lottery
