#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lottery/experiments/lab.hpp"
#include "lottery/experiments/stats.hpp"
#include "lottery/masking/pruning.hpp"

namespace lottery {

inline const std::vector<std::string> kClaimVariants = {"full", "imp", "random-mask", "random-reinit",
                                                        "shuffle-reinit"};
inline const std::vector<double> kRewindFractions = {0.0, 0.05, 0.1, 0.2, 0.5};

struct ClaimsSpec {
  std::vector<std::string> tasks;
  std::vector<double> sparsities;  // grid; IMP runs once per seed to the largest
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> variants = kClaimVariants;
  RandomScheme scheme = RandomScheme::global;
};

// Full model plus IMP, random-mask, random-reinit (theta0') and
// shuffle-reinit (theta0'') subnetworks at every grid sparsity. At sparsity 0
// the masks are dense, so imp and random-mask run the full-model cell.
template <typename T>
std::vector<RunRecord> claim_suite(Lab<T>& lab, const ClaimsSpec& spec);

// Claims cells at one target (the full model is always included); fractions
// other than {0} add a rewind sweep at that target.
template <typename T>
std::vector<RunRecord> imp_runs(Lab<T>& lab, const std::string& task, double target,
                                const std::vector<std::uint64_t>& seeds, const std::vector<std::string>& variants,
                                const std::vector<double>& fractions = {0.0});

// Prune-and-continue without rewinding; records the final subnetwork (theta_t).
template <typename T>
std::vector<RunRecord> standard_prune(Lab<T>& lab, const std::string& task, double target,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::string& experiment = "standard-prune");

// IMP rewound to round(f * t) for each fraction, from checkpoints of the
// dense run; every subnetwork is then trained for the full t steps from
// (m * theta_i, gamma_i). Adds the standard-pruning row.
template <typename T>
std::vector<RunRecord> rewind_sweep(Lab<T>& lab, const std::string& task, double sparsity,
                                    const std::vector<double>& fractions, const std::vector<std::uint64_t>& seeds);

struct TransferSpec {
  std::vector<std::string> sources;
  std::vector<std::string> targets;
  double sparsity = 0.6;
  std::vector<std::uint64_t> seeds;
  bool direct_row = true;  // one-shot magnitude prune of theta0
};

// Transfer(S, T) for every pair: the seed's IMP mask of S, weights theta0, a
// fresh head for T, trained and evaluated on T. Also the dense runs of every
// target, which the dark-cell verdicts compare against.
template <typename T>
std::vector<RunRecord> transfer_matrix(Lab<T>& lab, const TransferSpec& spec);

template <typename T>
std::vector<RunRecord> direct_prune_transfer(Lab<T>& lab, double sparsity, const std::vector<std::string>& targets,
                                             const std::vector<std::uint64_t>& seeds);

// Source masks and weights rewound to theta_i for each fraction, plus the
// standard-pruning mask with its final weights, transferred to each target.
template <typename T>
std::vector<RunRecord> rewound_source_transfer(Lab<T>& lab, const std::string& source,
                                               const std::vector<double>& fractions,
                                               const std::vector<std::string>& targets, double sparsity,
                                               const std::vector<std::uint64_t>& seeds);

// For each target with a winning sparsity established by claims records in
// the log, the MLM-analog task's IMP mask at that sparsity trained on the
// target.
template <typename T>
std::vector<RunRecord> universality_check(Lab<T>& lab, const std::string& mlm_task,
                                          const std::vector<std::string>& targets,
                                          const std::vector<std::uint64_t>& seeds,
                                          Criterion criterion = Criterion::one_stddev);

struct MultitaskSpec {
  std::vector<std::string> tasks;
  std::vector<std::string> targets;
  double sparsity = 0.6;
  std::vector<std::uint64_t> seeds;
};

// Source label of multi-task masks in records, e.g. "multitask:mlm+same-chain".
std::string multitask_label(const std::vector<std::string>& tasks);

template <typename T>
std::vector<RunRecord> multitask_transfer(Lab<T>& lab, const MultitaskSpec& spec);

struct DataSizeSpec {
  std::string source;
  std::vector<std::size_t> sizes;
  std::vector<std::string> targets;
  double sparsity = 0.6;
  std::vector<std::uint64_t> seeds;
};

// IMP on uniformly subsampled source training data, one mask per size and
// seed, each transferred to the targets.
template <typename T>
std::vector<RunRecord> dataset_size_study(Lab<T>& lab, const DataSizeSpec& spec);

struct OverlapMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;
};

// Pairwise Jaccard overlap of pruned sets. Masks must share a layout and an
// exact pruned count; otherwise ArgumentError.
OverlapMatrix overlap_study(const std::vector<std::pair<std::string, Mask>>& masks);

// IMP masks of each task at `sparsity` compared pairwise, one record per pair
// and seed.
template <typename T>
std::vector<RunRecord> overlap_experiment(Lab<T>& lab, const std::vector<std::string>& tasks, double sparsity,
                                          const std::vector<std::uint64_t>& seeds);

// Highest grid sparsity whose IMP cells pass winning_ticket_check against the
// full-model cells of the same experiment; 0 when none does.
std::map<std::string, double> winning_sparsities(const std::vector<RunRecord>& records,
                                                 const std::string& experiment, Criterion criterion);

}  // namespace lottery
