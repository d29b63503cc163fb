#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lottery/masking/mask.hpp"
#include "lottery/numerics/ops.hpp"
#include "lottery/numerics/rng.hpp"
#include "lottery/numerics/tensor.hpp"
#include "lottery/transformer/config.hpp"

namespace lottery {

template <typename T>
using TensorMap = std::map<std::string, Tensor<T>>;

/// Backbone parameters theta plus an optional task head gamma.
template <typename T>
struct Model {
  ModelConfig config;
  TensorMap<T> backbone;
  std::optional<HeadSpec> head_spec;
  TensorMap<T> head;

  const Tensor<T>& param(const std::string& name) const;
  Tensor<T>& param(const std::string& name);
  bool has_head() const noexcept { return head_spec.has_value(); }
  std::uint64_t backbone_size() const;
};

PrunableLayout prunable_layout(const ModelConfig& config);

// Truncated normal N(0, 0.02) clipped by rejection at +-2 sigma for weights,
// zero biases, unit gains. Draws from the "init" substream of `seed`.
template <typename T>
Model<T> init_params(const ModelConfig& config, std::uint64_t seed);

// Copy of `model` with a freshly initialized head (substream "head-init");
// backbone tensors are copied bit-exactly.
template <typename T>
[[nodiscard]] Model<T> attach_head(const Model<T>& model, const HeadSpec& head, std::uint64_t seed);

// Initializes one layout entry in place from `rng`.
template <typename T>
Tensor<T> init_tensor(const TensorLayout& layout, Rng& rng);

inline constexpr double kInitStd = 0.02;

/// Sequences packed row-wise with block-diagonal attention between them.
struct TokenBatch {
  std::vector<std::uint32_t> ids;
  std::vector<std::uint32_t> positions;
  std::vector<ad::Segment> segments;

  std::size_t rows() const noexcept { return ids.size(); }
  std::size_t sequences() const noexcept { return segments.size(); }
  // Row index of each sequence's first token.
  std::vector<std::size_t> first_rows() const;

  // Throws InputError when a sequence is empty or longer than max_seq_len.
  static TokenBatch pack(std::span<const std::vector<std::uint32_t>> sequences,
                         std::size_t max_seq_len);
};

/// Tape handles for every parameter; prunable weights are routed through the mask.
template <typename T>
struct BoundModel {
  const Model<T>* model = nullptr;
  std::map<std::string, ad::Var<T>> leaves;  // gradient-receiving handles
  std::map<std::string, ad::Var<T>> values;  // effective (masked) values used by forward

  ad::Var<T> operator[](const std::string& name) const;
};

// `mask` may be null (dense). The model and mask must outlive the tape.
template <typename T>
BoundModel<T> bind(ad::Tape<T>& tape, const Model<T>& model, const Mask* mask);

// Final hidden states [rows x d].
template <typename T>
ad::Var<T> encode(const BoundModel<T>& bound, const TokenBatch& batch);

// V-way logits at the selected rows.
template <typename T>
ad::Var<T> mlm_logits(const BoundModel<T>& bound, ad::Var<T> hidden,
                      std::span<const std::size_t> rows);

// k-way logits (classifier) or [sequences x 1] predictions (regressor) from
// the first-token state of each sequence.
template <typename T>
ad::Var<T> sequence_output(const BoundModel<T>& bound, ad::Var<T> hidden, const TokenBatch& batch);

// Gradient-free forward. MLM heads return logits for every row.
template <typename T>
Tensor<T> forward(const Model<T>& model, const Mask* mask, const TokenBatch& batch);

}  // namespace lottery
