#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace lottery {

// Ordered (name, flat length) list of the prunable tensors of a model.
using PrunableLayout = std::vector<std::pair<std::string, std::size_t>>;

struct MaskMetadata {
  std::string source_task;  // task whose training produced the mask ("" for none)
  std::string method;       // imp | standard | random-global | random-layerwise | direct | dense
  std::string producer;     // producing operation, e.g. "experiments.imp"
  std::string spec_hash;    // fingerprint of the producing experiment spec
  std::int64_t round = 0;   // pruning round that created the mask
};

/// Binary keep-mask over prunable tensors: 1 keeps a weight, 0 prunes it.
/// Entries are stored one per byte; files pack them into bits.
class Mask {
 public:
  Mask() = default;
  static Mask dense(const PrunableLayout& layout);

  bool contains(const std::string& name) const { return bits_.count(name) != 0; }
  const std::vector<std::uint8_t>& at(const std::string& name) const;
  std::vector<std::uint8_t>& at(const std::string& name);
  const std::map<std::string, std::vector<std::uint8_t>>& tensors() const noexcept { return bits_; }
  std::map<std::string, std::vector<std::uint8_t>>& tensors() noexcept { return bits_; }
  void set(const std::string& name, std::vector<std::uint8_t> bits) { bits_[name] = std::move(bits); }

  PrunableLayout layout() const;
  std::size_t total() const noexcept;
  std::size_t ones() const noexcept;
  std::size_t zeros() const noexcept { return total() - ones(); }
  // 1 - ones/total, recomputed on every call.
  double sparsity() const noexcept;

  // Throws ConfigError unless the mask covers exactly `layout`.
  void check_layout(const PrunableLayout& layout) const;

  MaskMetadata meta;

  friend bool operator==(const Mask& a, const Mask& b) { return a.bits_ == b.bits_; }

 private:
  std::map<std::string, std::vector<std::uint8_t>> bits_;
};

double sparsity(const Mask& mask);
// True iff ones(m_new) is a subset of ones(m_old).
bool is_subset(const Mask& m_new, const Mask& m_old);

}  // namespace lottery
