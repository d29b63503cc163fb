#include "lottery/training/checkpoint.hpp"

#include <cstring>
#include <map>

#include "lottery/errors.hpp"
#include "lottery/io/binary.hpp"

namespace lottery {

Digest run_fingerprint(const ModelConfig& model, const TrainConfig& train, const std::string& task_text,
                       Dtype dtype, const std::string& extra) {
  return sha256(model.canonical() + train.canonical() + task_text + "dtype=" + to_string(dtype) + extra);
}

namespace {

constexpr const char* kBackbone = "backbone/";
constexpr const char* kHead = "head/";
constexpr const char* kMoment1 = "optimizer.m/";
constexpr const char* kMoment2 = "optimizer.v/";
constexpr const char* kUpdates = "optimizer/updates";

template <typename T>
void put_tensor(io::ByteWriter& w, const std::string& name, const Tensor<T>& t) {
  w.short_string(name);
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) {
    w.u32(static_cast<std::uint32_t>(d));
  }
  w.u8(static_cast<std::uint8_t>(dtype_of<T>()));
  w.raw(t.raw(), t.size() * sizeof(T));
}

struct RawTensor {
  Shape shape;
  Dtype dtype = Dtype::f32;
  std::string_view data;
  std::size_t offset = 0;
};

struct Parsed {
  std::uint16_t version = 0;
  Digest fingerprint{};
  std::uint64_t step = 0;
  std::vector<std::pair<std::string, RawTensor>> tensors;
  std::vector<std::pair<std::string, Rng::State>> rngs;
};

Parsed parse(const std::string& bytes) {
  io::ByteReader r(bytes);
  Parsed p;
  r.expect("LTCK", "checkpoint magic");
  const std::size_t version_at = r.offset();
  p.version = r.u16();
  if (p.version != kCheckpointFormatVersion) {
    throw LoadError("unsupported checkpoint format version " + std::to_string(p.version), version_at);
  }
  r.raw(p.fingerprint.data(), p.fingerprint.size(), "fingerprint");
  p.step = r.u64();
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t at = r.offset();
    std::string name = r.short_string("tensor name");
    RawTensor t;
    t.offset = at;
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) {
      throw LoadError("tensor '" + name + "' has invalid rank " + std::to_string(rank), at);
    }
    std::uint64_t elems = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = r.u32();
      if (dim == 0) {
        throw LoadError("tensor '" + name + "' has a zero dimension", at);
      }
      t.shape.push_back(dim);
      elems *= dim;
    }
    const std::size_t tag_at = r.offset();
    const std::uint8_t tag = r.u8();
    if (tag != static_cast<std::uint8_t>(Dtype::f32) && tag != static_cast<std::uint8_t>(Dtype::f64)) {
      throw LoadError("tensor '" + name + "' has unknown dtype tag " + std::to_string(tag), tag_at);
    }
    t.dtype = static_cast<Dtype>(tag);
    const std::uint64_t width = t.dtype == Dtype::f32 ? 4 : 8;
    if (elems > r.remaining() / width) {
      r.fail("truncated data of tensor '" + name + "'");
    }
    t.data = r.bytes(elems * width, "tensor data");
    p.tensors.emplace_back(std::move(name), std::move(t));
  }
  const std::uint32_t rngs = r.u32();
  for (std::uint32_t i = 0; i < rngs; ++i) {
    std::string label = r.short_string("rng label");
    Rng::State s{};
    for (auto& word : s) {
      word = r.u64();
    }
    p.rngs.emplace_back(std::move(label), s);
  }
  if (!r.done()) {
    r.fail("trailing bytes after checkpoint");
  }
  return p;
}

template <typename T>
Tensor<T> to_tensor(const std::string& name, const RawTensor& raw, const Shape& expected) {
  if (raw.dtype != dtype_of<T>()) {
    throw LoadError("tensor '" + name + "' is " + to_string(raw.dtype) + ", run uses " +
                        to_string(dtype_of<T>()),
                    raw.offset);
  }
  if (raw.shape != expected) {
    throw LoadError("tensor '" + name + "' has shape " + shape_string(raw.shape) + ", expected " +
                        shape_string(expected),
                    raw.offset);
  }
  Tensor<T> t(raw.shape);
  std::memcpy(t.raw(), raw.data.data(), raw.data.size());
  return t;
}

std::optional<HeadSpec> infer_head(const std::map<std::string, const RawTensor*>& head) {
  if (head.empty()) {
    return std::nullopt;
  }
  if (head.count("head.decoder.bias") != 0) {
    return HeadSpec::mlm();
  }
  if (auto it = head.find("head.classifier.weight"); it != head.end()) {
    if (it->second->shape.size() != 2) {
      throw LoadError("classifier weight must be a matrix", it->second->offset);
    }
    return HeadSpec::classifier(it->second->shape[1]);
  }
  if (head.count("head.regressor.weight") != 0) {
    return HeadSpec::regressor();
  }
  throw LoadError("head tensors match no known head kind", head.begin()->second->offset);
}

}  // namespace

template <typename T>
std::string encode_checkpoint(const Checkpoint<T>& ckpt) {
  const TrainState<T>& s = ckpt.state;
  io::ByteWriter w;
  w.bytes("LTCK");
  w.u16(kCheckpointFormatVersion);
  w.raw(ckpt.fingerprint.data(), ckpt.fingerprint.size());
  w.u64(s.step);
  const std::size_t count = s.model.backbone.size() + s.model.head.size() + s.optimizer.m.size() +
                            s.optimizer.v.size() + 1;
  w.u32(static_cast<std::uint32_t>(count));
  for (const auto& [name, t] : s.model.backbone) {
    put_tensor(w, kBackbone + name, t);
  }
  for (const auto& [name, t] : s.model.head) {
    put_tensor(w, kHead + name, t);
  }
  for (const auto& [name, t] : s.optimizer.m) {
    put_tensor(w, kMoment1 + name, t);
  }
  for (const auto& [name, t] : s.optimizer.v) {
    put_tensor(w, kMoment2 + name, t);
  }
  put_tensor(w, kUpdates, Tensor<double>::scalar(static_cast<double>(s.optimizer.step)));
  w.u32(2);
  for (const auto& [label, rng] : {std::pair<const char*, const Rng*>{kDataOrderStream, &s.data_rng},
                                   std::pair<const char*, const Rng*>{kMlmMaskingStream, &s.mlm_rng}}) {
    w.short_string(label);
    for (std::uint64_t word : rng->state()) {
      w.u64(word);
    }
  }
  return w.take();
}

template <typename T>
Checkpoint<T> decode_checkpoint(const std::string& bytes, const ModelConfig& config,
                                const std::optional<Digest>& expected) {
  const Parsed p = parse(bytes);
  if (expected && *expected != p.fingerprint) {
    throw LoadError("checkpoint fingerprint " + to_hex(p.fingerprint) + " does not match expected " +
                        to_hex(*expected),
                    4 + 2);
  }
  std::map<std::string, const RawTensor*> backbone;
  std::map<std::string, const RawTensor*> head;
  std::map<std::string, const RawTensor*> m1;
  std::map<std::string, const RawTensor*> m2;
  const RawTensor* updates = nullptr;
  for (const auto& [name, raw] : p.tensors) {
    auto strip = [&](const char* prefix, std::map<std::string, const RawTensor*>& into) {
      const std::string pre(prefix);
      if (name.rfind(pre, 0) != 0) {
        return false;
      }
      if (!into.emplace(name.substr(pre.size()), &raw).second) {
        throw LoadError("duplicate tensor '" + name + "'", raw.offset);
      }
      return true;
    };
    if (name == kUpdates) {
      updates = &raw;
    } else if (!strip(kBackbone, backbone) && !strip(kHead, head) && !strip(kMoment1, m1) &&
               !strip(kMoment2, m2)) {
      throw LoadError("unexpected tensor '" + name + "'", raw.offset);
    }
  }
  Checkpoint<T> c;
  c.fingerprint = p.fingerprint;
  TrainState<T>& s = c.state;
  s.step = p.step;
  s.model.config = config;
  s.model.head_spec = infer_head(head);
  std::vector<TensorLayout> layout = backbone_layout(config);
  if (backbone.size() != layout.size()) {
    throw LoadError("checkpoint has " + std::to_string(backbone.size()) + " backbone tensors, config needs " +
                        std::to_string(layout.size()),
                    0);
  }
  for (const auto& l : layout) {
    auto it = backbone.find(l.name);
    if (it == backbone.end()) {
      throw LoadError("checkpoint lacks backbone tensor '" + l.name + "'", 0);
    }
    s.model.backbone.emplace(l.name, to_tensor<T>(l.name, *it->second, l.shape));
  }
  if (s.model.head_spec) {
    const auto hl = head_layout(config, *s.model.head_spec);
    if (hl.size() != head.size()) {
      throw LoadError("checkpoint head tensors do not form a " + s.model.head_spec->canonical() + " head", 0);
    }
    for (const auto& l : hl) {
      auto it = head.find(l.name);
      if (it == head.end()) {
        throw LoadError("checkpoint lacks head tensor '" + l.name + "'", 0);
      }
      s.model.head.emplace(l.name, to_tensor<T>(l.name, *it->second, l.shape));
    }
  }
  for (auto* pair : {&m1, &m2}) {
    if (pair->size() != s.model.backbone.size() + s.model.head.size()) {
      throw LoadError("optimizer moments do not cover the model", 0);
    }
  }
  for (const auto& [name, raw] : m1) {
    s.optimizer.m.emplace(name, to_tensor<T>(name, *raw, s.model.param(name).shape()));
  }
  for (const auto& [name, raw] : m2) {
    s.optimizer.v.emplace(name, to_tensor<T>(name, *raw, s.model.param(name).shape()));
  }
  if (updates == nullptr) {
    throw LoadError("checkpoint lacks the optimizer update counter", 0);
  }
  s.optimizer.step =
      static_cast<std::uint64_t>(to_tensor<double>(kUpdates, *updates, Shape{1}).item());
  bool have_data = false;
  bool have_mlm = false;
  for (const auto& [label, state] : p.rngs) {
    if (label == kDataOrderStream) {
      s.data_rng.set_state(state);
      have_data = true;
    } else if (label == kMlmMaskingStream) {
      s.mlm_rng.set_state(state);
      have_mlm = true;
    }
  }
  if (!have_data || !have_mlm) {
    throw LoadError("checkpoint lacks an rng substream state", 0);
  }
  return c;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& ckpt) {
  io::write_file_atomic(path, encode_checkpoint(ckpt));
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                              const std::optional<Digest>& expected) {
  return decode_checkpoint<T>(io::read_file(path), config, expected);
}

CheckpointInfo inspect_checkpoint(const std::string& bytes) {
  const Parsed p = parse(bytes);
  CheckpointInfo info;
  info.version = p.version;
  info.fingerprint = p.fingerprint;
  info.step = p.step;
  for (const auto& [name, raw] : p.tensors) {
    info.tensors.push_back({name, raw.shape, raw.dtype});
  }
  for (const auto& [label, state] : p.rngs) {
    info.rng_labels.push_back(label);
  }
  return info;
}

#define LOTTERY_INSTANTIATE_CHECKPOINT(T)                                                        \
  template std::string encode_checkpoint<T>(const Checkpoint<T>&);                               \
  template Checkpoint<T> decode_checkpoint<T>(const std::string&, const ModelConfig&,            \
                                              const std::optional<Digest>&);                     \
  template void save_checkpoint<T>(const std::filesystem::path&, const Checkpoint<T>&);          \
  template Checkpoint<T> load_checkpoint<T>(const std::filesystem::path&, const ModelConfig&,    \
                                            const std::optional<Digest>&);

LOTTERY_INSTANTIATE_CHECKPOINT(float)
LOTTERY_INSTANTIATE_CHECKPOINT(double)

}  // namespace lottery
