#include "lottery/masking/mask.hpp"

#include "lottery/errors.hpp"

namespace lottery {

Mask Mask::dense(const PrunableLayout& layout) {
  Mask m;
  for (const auto& [name, size] : layout) {
    m.bits_[name] = std::vector<std::uint8_t>(size, 1);
  }
  m.meta.method = "dense";
  return m;
}

const std::vector<std::uint8_t>& Mask::at(const std::string& name) const {
  auto it = bits_.find(name);
  if (it == bits_.end()) {
    throw ConfigError("mask has no tensor named '" + name + "'");
  }
  return it->second;
}

std::vector<std::uint8_t>& Mask::at(const std::string& name) {
  auto it = bits_.find(name);
  if (it == bits_.end()) {
    throw ConfigError("mask has no tensor named '" + name + "'");
  }
  return it->second;
}

PrunableLayout Mask::layout() const {
  PrunableLayout out;
  for (const auto& [name, bits] : bits_) {
    out.emplace_back(name, bits.size());
  }
  return out;
}

std::size_t Mask::total() const noexcept {
  std::size_t n = 0;
  for (const auto& [name, bits] : bits_) {
    n += bits.size();
  }
  return n;
}

std::size_t Mask::ones() const noexcept {
  std::size_t n = 0;
  for (const auto& [name, bits] : bits_) {
    for (std::uint8_t b : bits) {
      n += b != 0 ? 1 : 0;
    }
  }
  return n;
}

double Mask::sparsity() const noexcept {
  const std::size_t t = total();
  return t == 0 ? 0.0 : 1.0 - static_cast<double>(ones()) / static_cast<double>(t);
}

void Mask::check_layout(const PrunableLayout& layout) const {
  if (layout.size() != bits_.size()) {
    throw ConfigError("mask covers " + std::to_string(bits_.size()) + " tensors, model has " +
                      std::to_string(layout.size()) + " prunable tensors");
  }
  for (const auto& [name, size] : layout) {
    auto it = bits_.find(name);
    if (it == bits_.end()) {
      throw ConfigError("mask is missing prunable tensor '" + name + "'");
    }
    if (it->second.size() != size) {
      throw ConfigError("mask tensor '" + name + "' has " + std::to_string(it->second.size()) +
                        " entries, expected " + std::to_string(size));
    }
  }
}

double sparsity(const Mask& mask) {
  return mask.sparsity();
}

bool is_subset(const Mask& m_new, const Mask& m_old) {
  m_new.check_layout(m_old.layout());
  for (const auto& [name, bits] : m_new.tensors()) {
    const auto& old = m_old.at(name);
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i] != 0 && old[i] == 0) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace lottery
