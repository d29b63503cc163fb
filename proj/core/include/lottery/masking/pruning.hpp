#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "lottery/masking/mask.hpp"
#include "lottery/transformer/model.hpp"

namespace lottery {

// theta_i <- m_i * theta_i on prunable tensors; everything else is copied.
template <typename T>
Model<T> apply(const Mask& mask, const Model<T>& model);
template <typename T>
void apply_in_place(const Mask& mask, Model<T>& model);

// Round half away from zero of fraction * remaining.
std::size_t prune_count(double fraction, std::size_t remaining);

// Prunes exactly prune_count(fraction, ones(mask)) surviving weights of least
// |theta|, pooled across all prunable tensors. Ties go to the lexicographically
// smaller (tensor name, flat index). The result is nested in `mask`.
template <typename T>
Mask global_magnitude_prune(const Model<T>& model, const Mask& mask, double fraction);

// One magnitude step that leaves exactly ceil(target * total) weights pruned.
template <typename T>
Mask prune_to_sparsity(const Model<T>& model, const Mask& mask, double target);

// Number of pruned weights required for a target sparsity: ceil(target * total).
std::size_t pruned_count_for(double target, std::size_t total);

enum class RandomScheme : std::uint8_t { global, layerwise_matched };

// Global: a uniform random subset of pruned_count_for(sparsity, N) positions.
// Layerwise-matched: each tensor gets the reference's pruned count at random positions.
Mask random_mask(const ModelConfig& config, double sparsity, std::uint64_t seed,
                 RandomScheme scheme = RandomScheme::global, const Mask* reference = nullptr);

// Permutes the values of every prunable tensor within that tensor (theta0'').
template <typename T>
Model<T> shuffle_reinit(const Model<T>& model, std::uint64_t seed);

// Fresh init_params draw (theta0').
template <typename T>
Model<T> random_reinit(const ModelConfig& config, std::uint64_t seed);

// Jaccard similarity of the pruned index sets (1 when both are dense).
double overlap(const Mask& a, const Mask& b);
// Jaccard similarity of the surviving index sets (1 when both are empty).
double remaining_overlap(const Mask& a, const Mask& b);

// "LTMK" container; metadata follows the tensor table as an "LTMD" JSON trailer.
inline constexpr std::uint16_t kMaskFormatVersion = 1;
std::string encode_mask(const Mask& mask);
Mask decode_mask(const std::string& bytes);
void save_mask(const std::filesystem::path& path, const Mask& mask);
Mask load_mask(const std::filesystem::path& path);

}  // namespace lottery
