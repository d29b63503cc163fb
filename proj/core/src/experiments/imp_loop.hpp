#pragma once

#include <utility>
#include <vector>

#include "lottery/experiments/imp.hpp"
#include "lottery/masking/pruning.hpp"

namespace lottery::detail {

struct ImpChain {
  std::vector<ImpRound> rounds;
  std::vector<std::pair<double, Mask>> snapshots;
};

// The pruning loop shared by single-task and multi-task IMP. `ops` supplies
//   const Model<T>& model(const State&)
//   void prepare(State&, const Mask&, std::size_t round)   rewind/reset + mask
//   void train(State&, const Mask&)                        one round of A_t
// `state` enters holding the rewind point and leaves holding the last trained
// state.
template <typename T, typename State, typename Ops>
ImpChain run_imp_chain(State& state, const State& rewind, const ImpSpec& spec, Ops& ops) {
  ImpChain chain;
  const Mask dense = Mask::dense(prunable_layout(ops.model(rewind).config));
  for (double q : spec.snapshots) {
    if (pruned_count_for(q, dense.total()) == 0) {
      chain.snapshots.emplace_back(q, dense);
    }
  }
  Mask mask = dense;
  std::size_t round = 0;
  while (mask.zeros() < pruned_count_for(spec.target, mask.total())) {
    ++round;
    if (!spec.standard) {
      state = rewind;
    }
    // Standard pruning already trained the dense network to t before the
    // first prune; every later round continues for a further t steps.
    if (!spec.standard || round > 1) {
      ops.prepare(state, mask, round);
      ops.train(state, mask);
    }
    const Model<T>& trained = ops.model(state);
    Mask next = global_magnitude_prune(trained, mask, spec.prune_fraction);
    bool trimmed = false;
    if (next.zeros() > pruned_count_for(spec.target, next.total())) {
      next = prune_to_sparsity(trained, mask, spec.target);
      trimmed = true;
    }
    for (double q : spec.snapshots) {
      const std::size_t need = pruned_count_for(q, dense.total());
      if (need > mask.zeros() && need <= next.zeros()) {
        Mask snap = need == next.zeros() ? next : prune_to_sparsity(trained, mask, q);
        snap.meta.round = static_cast<std::int64_t>(round);
        chain.snapshots.emplace_back(q, std::move(snap));
      }
    }
    next.meta.round = static_cast<std::int64_t>(round);
    chain.rounds.push_back({round, next, trimmed});
    mask = std::move(next);
  }
  if (spec.standard) {
    ops.prepare(state, mask, round + 1);
    ops.train(state, mask);
  }
  return chain;
}

}  // namespace lottery::detail
