#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lottery/io/fingerprint.hpp"
#include "lottery/training/trainer.hpp"

namespace lottery {

inline constexpr std::uint16_t kCheckpointFormatVersion = 1;

template <typename T>
struct Checkpoint {
  Digest fingerprint{};
  TrainState<T> state;
};

// Fingerprint of everything that determines a run's trajectory.
Digest run_fingerprint(const ModelConfig& model, const TrainConfig& train, const std::string& task_text,
                       Dtype dtype, const std::string& extra = "");

template <typename T>
std::string encode_checkpoint(const Checkpoint<T>& ckpt);
// The model config is not stored (head counts are not recoverable from
// shapes); it must be supplied and every tensor must match its layout. A
// fingerprint mismatch, wrong dtype, or any truncation throws LoadError, and
// nothing is returned in that case.
template <typename T>
Checkpoint<T> decode_checkpoint(const std::string& bytes, const ModelConfig& config,
                                const std::optional<Digest>& expected = std::nullopt);

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& ckpt);
template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                              const std::optional<Digest>& expected = std::nullopt);

/// Header and tensor table of a checkpoint, readable without a model config.
struct CheckpointInfo {
  std::uint16_t version = 0;
  Digest fingerprint{};
  std::uint64_t step = 0;
  struct Entry {
    std::string name;
    Shape shape;
    Dtype dtype = Dtype::f32;
  };
  std::vector<Entry> tensors;
  std::vector<std::string> rng_labels;
};

CheckpointInfo inspect_checkpoint(const std::string& bytes);

}  // namespace lottery
