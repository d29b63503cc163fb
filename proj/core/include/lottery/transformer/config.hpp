#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lottery/numerics/tensor.hpp"

namespace lottery {

struct ModelConfig {
  std::size_t num_blocks = 2;
  std::size_t hidden = 32;
  std::size_t heads = 2;
  std::size_t ffn = 0;  // 0 selects 4 * hidden
  std::size_t vocab = 64;
  std::size_t max_seq_len = 32;
  double norm_eps = 1e-12;

  std::size_t ffn_size() const noexcept { return ffn == 0 ? 4 * hidden : ffn; }
  // Throws ConfigError when hidden is not divisible by heads or a size is zero.
  void validate() const;
  // Stable text form used for fingerprints.
  std::string canonical() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// L=12, d=768, h=12, ffn=3072, V=30522, seq=512.
ModelConfig bert_base_config();
// L=2, d=32, h=2, V=64.
ModelConfig toy_config();

enum class HeadKind : std::uint8_t { mlm, classifier, regressor };

std::string to_string(HeadKind kind);
HeadKind parse_head_kind(const std::string& text);

// Classifier and regressor heads read the first-token ([CLS]-position) state.
struct HeadSpec {
  HeadKind kind = HeadKind::classifier;
  std::size_t classes = 2;  // classifier only

  static HeadSpec mlm() { return {HeadKind::mlm, 0}; }
  static HeadSpec classifier(std::size_t k) { return {HeadKind::classifier, k}; }
  static HeadSpec regressor() { return {HeadKind::regressor, 0}; }

  std::string canonical() const;
  friend bool operator==(const HeadSpec&, const HeadSpec&) = default;
};

enum class ParamRole : std::uint8_t { weight, bias, gain };

struct TensorLayout {
  std::string name;
  Shape shape;
  ParamRole role = ParamRole::weight;
  // All backbone weight matrices (embeddings included) are prunable; biases
  // and norm parameters are not.
  bool prunable = false;
};

// Backbone tensors in lexicographic name order; a function of the config alone.
std::vector<TensorLayout> backbone_layout(const ModelConfig& config);
std::vector<TensorLayout> head_layout(const ModelConfig& config, const HeadSpec& head);

// Closed-form backbone parameter count:
//   V d + S d + 2 d + L (4 (d^2 + d) + 2 d f + f + d + 4 d)
// (token + position embeddings, embedding norm, and per block four attention
// projections, two feed-forward projections, and two norms).
std::uint64_t count_params(const ModelConfig& config);
std::uint64_t count_head_params(const ModelConfig& config, const HeadSpec& head);

}  // namespace lottery
