#include "lottery/numerics/rng.hpp"

#include <cmath>
#include <numbers>

namespace lottery {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view label) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(mix64(master) ^ h);
}

Rng::Rng(std::uint64_t seed) noexcept {
  std::uint64_t s = seed;
  for (auto& word : state_) {
    s += 0x9e3779b97f4a7c15ULL;
    word = mix64(s - 0x9e3779b97f4a7c15ULL) ^ mix64(s);
  }
  if (state_ == State{}) {
    state_[0] = 1;
  }
}

std::uint64_t Rng::next() noexcept {
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform() noexcept {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) noexcept {
  // Lemire's multiply-shift with rejection of the biased low region.
  std::uint64_t x = next();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = next();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double Rng::normal(double mean, double stddev) noexcept {
  // 1 - uniform() lies in (0, 1], keeping log finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::truncated_normal(double mean, double stddev, double bound) noexcept {
  for (;;) {
    const double z = normal();
    if (std::abs(z) <= bound) {
      return mean + stddev * z;
    }
  }
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = i;
  }
  shuffle(std::span<std::size_t>(out));
  return out;
}

std::vector<std::size_t> Rng::choice(std::size_t n, std::size_t k) {
  if (k > n) {
    throw ArgumentError("choice: cannot draw " + std::to_string(k) + " of " + std::to_string(n));
  }
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) {
    pool[i] = i;
  }
  // Partial Fisher-Yates from the front.
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

std::size_t Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) {
      throw ArgumentError("categorical: weights must be non-negative");
    }
    total += w;
  }
  if (weights.empty() || total <= 0.0) {
    throw ArgumentError("categorical: weights must have positive sum");
  }
  const double r = uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (r < acc) {
      return i;
    }
  }
  // Rounding can leave r == total; return the last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) {
      return i;
    }
  }
  return weights.size() - 1;
}

template <typename T>
Tensor<T> rng_normal(Rng& rng, const Shape& shape, double mean, double stddev) {
  if (!(stddev >= 0.0)) {
    throw ArgumentError("rng_normal: stddev must be non-negative");
  }
  Tensor<T> out(shape);
  for (auto& v : out.data()) {
    v = static_cast<T>(rng.normal(mean, stddev));
  }
  return out;
}

template <typename T>
Tensor<T> rng_uniform(Rng& rng, const Shape& shape, double lo, double hi) {
  Tensor<T> out(shape);
  for (auto& v : out.data()) {
    v = static_cast<T>(rng.uniform(lo, hi));
  }
  return out;
}

template Tensor<float> rng_normal<float>(Rng&, const Shape&, double, double);
template Tensor<double> rng_normal<double>(Rng&, const Shape&, double, double);
template Tensor<float> rng_uniform<float>(Rng&, const Shape&, double, double);
template Tensor<double> rng_uniform<double>(Rng&, const Shape&, double, double);

}  // namespace lottery
