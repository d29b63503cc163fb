#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "lottery/numerics/tensor.hpp"

namespace lottery {

// splitmix64 finalizer; also used to expand seeds into generator state.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Seed of the substream `label` under `master`: FNV-1a of the label folded into
// the master seed through mix64. Consumers that draw from different labels never
// perturb one another.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label) noexcept;

/// xoshiro256** generator. The full state is four 64-bit words (32 bytes), which
/// is what checkpoints store; no distribution keeps hidden cached values.
class Rng {
 public:
  using result_type = std::uint64_t;
  using State = std::array<std::uint64_t, 4>;
  static constexpr std::string_view kAlgorithm = "xoshiro256**";

  explicit Rng(std::uint64_t seed = 0) noexcept;
  static Rng substream(std::uint64_t master, std::string_view label) noexcept {
    return Rng(derive_seed(master, label));
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
  result_type operator()() noexcept { return next(); }

  std::uint64_t next() noexcept;
  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  // Unbiased integer on [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;
  // Box-Muller, one variate per call (the second is discarded so state stays 32 bytes).
  double normal(double mean = 0.0, double stddev = 1.0) noexcept;
  // Normal(mean, stddev) conditioned on |x - mean| <= bound * stddev, by rejection.
  double truncated_normal(double mean, double stddev, double bound) noexcept;

  std::vector<std::size_t> permutation(std::size_t n);
  // k distinct indices from [0, n), in random order. Throws if k > n.
  std::vector<std::size_t> choice(std::size_t n, std::size_t k);
  // Index drawn with probability proportional to weights (all non-negative).
  std::size_t categorical(std::span<const double> weights);

  template <typename V>
  void shuffle(std::span<V> values) noexcept {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  const State& state() const noexcept { return state_; }
  void set_state(const State& state) noexcept { state_ = state; }

  friend bool operator==(const Rng& a, const Rng& b) noexcept { return a.state_ == b.state_; }

 private:
  State state_{};
};

template <typename T>
Tensor<T> rng_normal(Rng& rng, const Shape& shape, double mean, double stddev);
template <typename T>
Tensor<T> rng_uniform(Rng& rng, const Shape& shape, double lo, double hi);

}  // namespace lottery
