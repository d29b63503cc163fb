#include "lottery/masking/pruning.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "lottery/errors.hpp"
#include "lottery/io/binary.hpp"

namespace lottery {

template <typename T>
void apply_in_place(const Mask& mask, Model<T>& model) {
  mask.check_layout(prunable_layout(model.config));
  for (const auto& [name, bits] : mask.tensors()) {
    Tensor<T>& t = model.backbone.at(name);
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i] == 0) {
        t[i] = T{0};
      }
    }
  }
}

template <typename T>
Model<T> apply(const Mask& mask, const Model<T>& model) {
  Model<T> out = model;
  apply_in_place(mask, out);
  return out;
}

std::size_t prune_count(double fraction, std::size_t remaining) {
  return static_cast<std::size_t>(std::round(fraction * static_cast<double>(remaining)));
}

std::size_t pruned_count_for(double target, std::size_t total) {
  const double exact = target * static_cast<double>(total);
  // The epsilon keeps values such as 0.7 * 10000 from rounding up past the integer.
  return static_cast<std::size_t>(std::ceil(exact - 1e-9));
}

namespace {

struct Candidate {
  double magnitude;
  std::uint32_t tensor;  // rank of the name in lexicographic order
  std::uint32_t index;
};

bool candidate_less(const Candidate& a, const Candidate& b) {
  if (a.magnitude != b.magnitude) {
    return a.magnitude < b.magnitude;
  }
  if (a.tensor != b.tensor) {
    return a.tensor < b.tensor;
  }
  return a.index < b.index;
}

// Zeroes the k surviving entries with the smallest magnitude.
template <typename T>
Mask prune_smallest(const Model<T>& model, const Mask& mask, std::size_t k) {
  mask.check_layout(prunable_layout(model.config));
  std::vector<std::string> names;
  std::vector<Candidate> pool;
  pool.reserve(mask.ones());
  for (const auto& [name, bits] : mask.tensors()) {
    const Tensor<T>& t = model.backbone.at(name);
    const auto tensor_id = static_cast<std::uint32_t>(names.size());
    names.push_back(name);
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i] != 0) {
        pool.push_back({std::fabs(static_cast<double>(t[i])), tensor_id, static_cast<std::uint32_t>(i)});
      }
    }
  }
  Mask out = mask;
  if (k == 0) {
    return out;
  }
  if (k > pool.size()) {
    throw StateError("cannot prune " + std::to_string(k) + " of " + std::to_string(pool.size()) +
                     " remaining weights");
  }
  std::nth_element(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k - 1), pool.end(),
                   candidate_less);
  const Candidate pivot = pool[k - 1];
  for (const Candidate& c : pool) {
    if (!candidate_less(pivot, c)) {
      out.at(names[c.tensor])[c.index] = 0;
    }
  }
  return out;
}

}  // namespace

template <typename T>
Mask global_magnitude_prune(const Model<T>& model, const Mask& mask, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ArgumentError("prune fraction must lie in (0, 1), got " + std::to_string(fraction));
  }
  const std::size_t remaining = mask.ones();
  if (remaining == 0) {
    throw StateError("no surviving weights to prune");
  }
  return prune_smallest(model, mask, prune_count(fraction, remaining));
}

template <typename T>
Mask prune_to_sparsity(const Model<T>& model, const Mask& mask, double target) {
  if (!(target >= 0.0 && target < 1.0)) {
    throw ArgumentError("target sparsity must lie in [0, 1), got " + std::to_string(target));
  }
  const std::size_t total = mask.total();
  const std::size_t needed = pruned_count_for(target, total);
  const std::size_t zeros = mask.zeros();
  if (needed < zeros) {
    throw ArgumentError("target sparsity " + std::to_string(target) +
                        " is below the current sparsity " + std::to_string(mask.sparsity()));
  }
  return prune_smallest(model, mask, needed - zeros);
}

Mask random_mask(const ModelConfig& config, double sparsity, std::uint64_t seed,
                 RandomScheme scheme, const Mask* reference) {
  if (!(sparsity >= 0.0 && sparsity < 1.0)) {
    throw ArgumentError("random mask sparsity must lie in [0, 1), got " + std::to_string(sparsity));
  }
  const PrunableLayout layout = prunable_layout(config);
  Mask m = Mask::dense(layout);
  m.meta.method = scheme == RandomScheme::global ? "random-global" : "random-layerwise";
  Rng rng = Rng::substream(seed, "random-mask");
  if (scheme == RandomScheme::global) {
    std::vector<std::pair<std::string, std::size_t>> starts;
    std::size_t total = 0;
    for (const auto& [name, size] : layout) {
      starts.emplace_back(name, total);
      total += size;
    }
    std::vector<std::size_t> picks = rng.choice(total, pruned_count_for(sparsity, total));
    std::sort(picks.begin(), picks.end());
    std::size_t t = 0;
    for (std::size_t flat : picks) {
      while (t + 1 < starts.size() && starts[t + 1].second <= flat) {
        ++t;
      }
      m.at(starts[t].first)[flat - starts[t].second] = 0;
    }
    return m;
  }
  if (reference == nullptr) {
    throw ArgumentError("layerwise-matched random mask needs a reference mask");
  }
  reference->check_layout(layout);
  for (const auto& [name, size] : layout) {
    const auto& ref = reference->at(name);
    const auto zeros = static_cast<std::size_t>(std::count(ref.begin(), ref.end(), std::uint8_t{0}));
    auto& bits = m.at(name);
    for (std::size_t i : rng.choice(size, zeros)) {
      bits[i] = 0;
    }
  }
  return m;
}

template <typename T>
Model<T> shuffle_reinit(const Model<T>& model, std::uint64_t seed) {
  Model<T> out = model;
  Rng rng = Rng::substream(seed, "shuffle");
  for (const auto& [name, size] : prunable_layout(model.config)) {
    rng.shuffle(out.backbone.at(name).data());
  }
  return out;
}

template <typename T>
Model<T> random_reinit(const ModelConfig& config, std::uint64_t seed) {
  return init_params<T>(config, seed);
}

namespace {

struct SetCounts {
  std::size_t both = 0;
  std::size_t either = 0;
};

SetCounts count_sets(const Mask& a, const Mask& b, std::uint8_t member) {
  a.check_layout(b.layout());
  SetCounts c;
  for (const auto& [name, bits] : a.tensors()) {
    const auto& other = b.at(name);
    for (std::size_t i = 0; i < bits.size(); ++i) {
      const bool x = (bits[i] != 0) == (member != 0);
      const bool y = (other[i] != 0) == (member != 0);
      c.both += (x && y) ? 1 : 0;
      c.either += (x || y) ? 1 : 0;
    }
  }
  return c;
}

}  // namespace

double overlap(const Mask& a, const Mask& b) {
  const SetCounts c = count_sets(a, b, 0);
  return c.either == 0 ? 1.0 : static_cast<double>(c.both) / static_cast<double>(c.either);
}

double remaining_overlap(const Mask& a, const Mask& b) {
  const SetCounts c = count_sets(a, b, 1);
  return c.either == 0 ? 1.0 : static_cast<double>(c.both) / static_cast<double>(c.either);
}

std::string encode_mask(const Mask& mask) {
  io::ByteWriter w;
  w.bytes("LTMK");
  w.u16(kMaskFormatVersion);
  w.u32(static_cast<std::uint32_t>(mask.tensors().size()));
  for (const auto& [name, bits] : mask.tensors()) {
    w.short_string(name);
    w.u64(bits.size());
    std::string packed((bits.size() + 7) / 8, '\0');
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i] != 0) {
        packed[i / 8] = static_cast<char>(static_cast<unsigned char>(packed[i / 8]) | (1u << (i % 8)));
      }
    }
    w.bytes(packed);
  }
  nlohmann::json meta = {{"source_task", mask.meta.source_task},
                         {"method", mask.meta.method},
                         {"producer", mask.meta.producer},
                         {"spec_hash", mask.meta.spec_hash},
                         {"round", mask.meta.round}};
  const std::string text = meta.dump();
  w.bytes("LTMD");
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes(text);
  return w.take();
}

Mask decode_mask(const std::string& bytes) {
  io::ByteReader r(bytes);
  r.expect("LTMK", "mask magic");
  const std::size_t version_at = r.offset();
  const std::uint16_t version = r.u16();
  if (version != kMaskFormatVersion) {
    throw LoadError("unsupported mask format version " + std::to_string(version), version_at);
  }
  const std::uint32_t count = r.u32();
  Mask m;
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name = r.short_string("tensor name");
    const std::size_t length_at = r.offset();
    const std::uint64_t length = r.u64();
    if (length > r.remaining() * 8) {
      throw LoadError("tensor '" + name + "' claims " + std::to_string(length) +
                          " entries, more than the file holds",
                      length_at);
    }
    std::string_view packed = r.bytes((length + 7) / 8, "mask bits");
    std::vector<std::uint8_t> bits(length);
    for (std::size_t i = 0; i < length; ++i) {
      bits[i] = (static_cast<unsigned char>(packed[i / 8]) >> (i % 8)) & 1u;
    }
    if (m.contains(name)) {
      r.fail("duplicate tensor '" + name + "'");
    }
    m.set(name, std::move(bits));
  }
  if (!r.done()) {
    r.expect("LTMD", "metadata trailer");
    const std::uint32_t n = r.u32();
    const std::size_t json_at = r.offset();
    std::string_view text = r.bytes(n, "metadata");
    try {
      const auto meta = nlohmann::json::parse(text);
      m.meta.source_task = meta.value("source_task", "");
      m.meta.method = meta.value("method", "");
      m.meta.producer = meta.value("producer", "");
      m.meta.spec_hash = meta.value("spec_hash", "");
      m.meta.round = meta.value("round", std::int64_t{0});
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(std::string("bad mask metadata: ") + e.what(), json_at);
    }
    if (!r.done()) {
      r.fail("trailing bytes after mask metadata");
    }
  }
  return m;
}

void save_mask(const std::filesystem::path& path, const Mask& mask) {
  io::write_file_atomic(path, encode_mask(mask));
}

Mask load_mask(const std::filesystem::path& path) {
  return decode_mask(io::read_file(path));
}

#define LOTTERY_INSTANTIATE_PRUNING(T)                                       \
  template Model<T> apply<T>(const Mask&, const Model<T>&);                  \
  template void apply_in_place<T>(const Mask&, Model<T>&);                   \
  template Mask global_magnitude_prune<T>(const Model<T>&, const Mask&, double); \
  template Mask prune_to_sparsity<T>(const Model<T>&, const Mask&, double);  \
  template Model<T> shuffle_reinit<T>(const Model<T>&, std::uint64_t);       \
  template Model<T> random_reinit<T>(const ModelConfig&, std::uint64_t);

LOTTERY_INSTANTIATE_PRUNING(float)
LOTTERY_INSTANTIATE_PRUNING(double)

}  // namespace lottery
