#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lottery/numerics/rng.hpp"
#include "lottery/tasks/corpus.hpp"
#include "lottery/tasks/metrics.hpp"
#include "lottery/transformer/config.hpp"

namespace lottery {

enum class TaskKind : std::uint8_t { mlm, single_class, pair_class, regression };
enum class TaskRule : std::uint8_t { mlm, dominant_state, same_chain, state_fraction };

std::string to_string(TaskKind kind);
std::string to_string(TaskRule rule);
TaskRule parse_rule(const std::string& text);
TaskKind kind_of(TaskRule rule);
MetricId default_metric(TaskRule rule);

struct Example {
  std::vector<std::uint32_t> tokens;  // begins with [CLS]
  double label = 0.0;                 // class id, real target, or unused for mlm
};

/// Derivation recipe for one task of the synthetic family.
struct TaskSpec {
  std::string id;
  TaskRule rule = TaskRule::dominant_state;
  std::size_t train_size = 512;
  std::size_t eval_size = 1024;
  std::size_t max_seq_len = 32;
  std::optional<MetricId> metric;  // defaults per rule
  std::size_t designated_state = 0;  // state-fraction target state
  double mask_rate = 0.15;
  std::uint64_t seed = 1;

  std::string canonical() const;
};

struct Task {
  std::string id;
  TaskRule rule = TaskRule::mlm;
  TaskKind kind = TaskKind::mlm;
  HeadSpec head = HeadSpec::mlm();
  MetricId metric = MetricId::masked_accuracy;
  std::size_t vocab_size = 0;
  std::size_t max_seq_len = 0;
  double mask_rate = 0.15;
  std::uint64_t eval_seed = 0;  // fixes the masked positions of mlm evaluation
  std::vector<Example> train;
  std::vector<Example> eval;
  std::string fingerprint_text;  // canonical description, hashed into run fingerprints
};

// Labels the pool and takes a class-balanced train/eval split from it in pool
// order. Throws DegeneracyError when the rule cannot produce two classes and
// DataError when the pool is too small.
Task derive_task(const Corpus& pool, const TaskSpec& spec);
// Samples a pool from the family (growing it until the split fits) and derives the task.
Task make_task(const HmmFamily& family, const TaskSpec& spec);

// Uniform sample of n training examples without replacement, in original
// order; the eval split is untouched.
Task subsample(const Task& task, std::size_t n, std::uint64_t seed);

struct MlmExample {
  std::vector<std::uint32_t> input;
  std::vector<std::size_t> positions;  // masked positions, ascending
  std::vector<std::uint32_t> targets;  // original ids at those positions
};

struct MlmMasking {
  std::vector<MlmExample> examples;
  std::size_t skipped = 0;  // sequences without a maskable position
};

// Replaces exactly round(rate * maskable) positions of each sequence with
// [MASK]; [CLS], [SEP] and [PAD] are never chosen.
MlmMasking make_mlm_batches(std::span<const std::vector<std::uint32_t>> sequences, double rate,
                            Rng& rng);
// Same for a single sequence; empty positions mean it was skipped.
MlmExample mask_sequence(const std::vector<std::uint32_t>& tokens, double rate, Rng& rng);

// Line format: split TAB label TAB space-separated ids.
void save_dataset(const std::filesystem::path& path, const Task& task);
std::string encode_dataset(const Task& task);
// Restores train/eval examples into `task` (other fields untouched).
void load_dataset(const std::filesystem::path& path, Task& task);

}  // namespace lottery
