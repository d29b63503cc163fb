#include <benchmark/benchmark.h>

#include <numeric>

#include "lottery/experiments/drivers.hpp"
#include "lottery/experiments/suite.hpp"
#include "lottery/masking/pruning.hpp"
#include "lottery/training/checkpoint.hpp"
#include "lottery/training/trainer.hpp"

namespace lottery {
namespace {

const SuiteConfig& suite() {
  static const SuiteConfig s = toy_suite();
  return s;
}

const Task& task(const std::string& id) {
  static const HmmFamily family = build_family(suite().generator);
  static std::map<std::string, Task> tasks;
  auto it = tasks.find(id);
  if (it == tasks.end()) {
    it = tasks.emplace(id, make_task(family, suite().task_spec(id))).first;
  }
  return it->second;
}

template <typename T>
Model<T> toy_model(const std::string& id) {
  return attach_head(init_params<T>(suite().model, 1), task(id).head, 2);
}

TokenBatch toy_batch(std::size_t sequences) {
  Rng rng(3);
  std::vector<std::vector<std::uint32_t>> seqs(sequences);
  for (auto& s : seqs) {
    s.resize(suite().model.max_seq_len);
    for (auto& id : s) {
      id = static_cast<std::uint32_t>(rng.below(suite().model.vocab));
    }
  }
  return TokenBatch::pack(seqs, suite().model.max_seq_len);
}

template <typename T>
void BM_Forward(benchmark::State& state) {
  const Model<T> m = toy_model<T>("dominant-state");
  const TokenBatch batch = toy_batch(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(m, nullptr, batch));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward<float>)->Arg(1)->Arg(16);
BENCHMARK(BM_Forward<double>)->Arg(16);

// One AdamW step of the toy fine-tuning loop, forward and backward included.
template <typename T>
void BM_TrainStep(benchmark::State& state) {
  const std::string id = state.range(0) ? "mlm" : "dominant-state";
  const Task& t = task(id);
  TrainConfig c = suite().finetune;
  c.seed = 1;
  TrainState<T> s = TrainState<T>::start(toy_model<T>(id), c);
  const Mask mask = random_mask(suite().model, 0.6, 4);
  std::vector<std::size_t> indices(c.batch_size);
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_step(s, &mask, t, c, indices));
    if (s.step >= c.steps) {
      s.step = 0;
    }
  }
}
BENCHMARK(BM_TrainStep<float>)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainStep<double>)->Arg(0)->Unit(benchmark::kMillisecond);

void BM_Evaluate(benchmark::State& state) {
  const Model<float> m = toy_model<float>("same-chain");
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate(m, nullptr, task("same-chain")));
  }
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

void BM_GlobalMagnitudePrune(benchmark::State& state) {
  const Model<float> m = toy_model<float>("dominant-state");
  const Mask dense = Mask::dense(prunable_layout(suite().model));
  for (auto _ : state) {
    benchmark::DoNotOptimize(global_magnitude_prune(m, dense, 0.1));
  }
}
BENCHMARK(BM_GlobalMagnitudePrune);

void BM_PruneToSparsity(benchmark::State& state) {
  const Model<float> m = toy_model<float>("dominant-state");
  const Mask dense = Mask::dense(prunable_layout(suite().model));
  for (auto _ : state) {
    benchmark::DoNotOptimize(prune_to_sparsity(m, dense, 0.6));
  }
}
BENCHMARK(BM_PruneToSparsity);

void BM_RandomMask(benchmark::State& state) {
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(random_mask(suite().model, 0.6, ++seed));
  }
}
BENCHMARK(BM_RandomMask);

void BM_MaskCodec(benchmark::State& state) {
  const Mask m = random_mask(suite().model, 0.6, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(decode_mask(encode_mask(m)));
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(encode_mask(m).size()));
}
BENCHMARK(BM_MaskCodec);

void BM_CheckpointCodec(benchmark::State& state) {
  TrainConfig c = suite().finetune;
  const Checkpoint<float> ck{{}, TrainState<float>::start(toy_model<float>("dominant-state"), c)};
  const std::string bytes = encode_checkpoint(ck);
  for (auto _ : state) {
    benchmark::DoNotOptimize(decode_checkpoint<float>(encode_checkpoint(ck), suite().model));
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_CheckpointCodec);

void BM_OverlapStudy(benchmark::State& state) {
  std::vector<std::pair<std::string, Mask>> masks;
  for (std::uint64_t s = 1; s <= static_cast<std::uint64_t>(state.range(0)); ++s) {
    masks.emplace_back("m" + std::to_string(s), random_mask(suite().model, 0.6, s));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(overlap_study(masks));
  }
}
BENCHMARK(BM_OverlapStudy)->Arg(4)->Arg(8);

}  // namespace
}  // namespace lottery

BENCHMARK_MAIN();
