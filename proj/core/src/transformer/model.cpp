#include "lottery/transformer/model.hpp"

#include "lottery/errors.hpp"

namespace lottery {

template <typename T>
const Tensor<T>& Model<T>::param(const std::string& name) const {
  if (auto it = backbone.find(name); it != backbone.end()) {
    return it->second;
  }
  if (auto it = head.find(name); it != head.end()) {
    return it->second;
  }
  throw ConfigError("model has no parameter named '" + name + "'");
}

template <typename T>
Tensor<T>& Model<T>::param(const std::string& name) {
  return const_cast<Tensor<T>&>(static_cast<const Model<T>&>(*this).param(name));
}

template <typename T>
std::uint64_t Model<T>::backbone_size() const {
  std::uint64_t n = 0;
  for (const auto& [name, t] : backbone) {
    n += t.size();
  }
  return n;
}

PrunableLayout prunable_layout(const ModelConfig& config) {
  PrunableLayout out;
  for (const auto& t : backbone_layout(config)) {
    if (t.prunable) {
      out.emplace_back(t.name, shape_size(t.shape));
    }
  }
  return out;
}

template <typename T>
Tensor<T> init_tensor(const TensorLayout& layout, Rng& rng) {
  Tensor<T> t(layout.shape);
  switch (layout.role) {
    case ParamRole::weight:
      for (T& v : t.data()) {
        v = static_cast<T>(rng.truncated_normal(0.0, kInitStd, 2.0));
      }
      break;
    case ParamRole::bias:
      break;
    case ParamRole::gain:
      t.fill(T{1});
      break;
  }
  return t;
}

template <typename T>
Model<T> init_params(const ModelConfig& config, std::uint64_t seed) {
  Model<T> m;
  m.config = config;
  Rng rng = Rng::substream(seed, "init");
  for (const auto& layout : backbone_layout(config)) {
    m.backbone.emplace(layout.name, init_tensor<T>(layout, rng));
  }
  return m;
}

template <typename T>
Model<T> attach_head(const Model<T>& model, const HeadSpec& head, std::uint64_t seed) {
  Model<T> m;
  m.config = model.config;
  m.backbone = model.backbone;
  m.head_spec = head;
  Rng rng = Rng::substream(seed, "head-init");
  for (const auto& layout : head_layout(model.config, head)) {
    m.head.emplace(layout.name, init_tensor<T>(layout, rng));
  }
  return m;
}

std::vector<std::size_t> TokenBatch::first_rows() const {
  std::vector<std::size_t> out;
  out.reserve(segments.size());
  for (const auto& s : segments) {
    out.push_back(s.offset);
  }
  return out;
}

TokenBatch TokenBatch::pack(std::span<const std::vector<std::uint32_t>> sequences,
                            std::size_t max_seq_len) {
  TokenBatch b;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const auto& seq = sequences[i];
    if (seq.empty()) {
      throw InputError("sequence " + std::to_string(i) + " is empty");
    }
    if (seq.size() > max_seq_len) {
      throw InputError("sequence " + std::to_string(i) + " has length " +
                       std::to_string(seq.size()) + ", maximum is " + std::to_string(max_seq_len));
    }
    b.segments.push_back({b.ids.size(), seq.size()});
    for (std::size_t p = 0; p < seq.size(); ++p) {
      b.ids.push_back(seq[p]);
      b.positions.push_back(static_cast<std::uint32_t>(p));
    }
  }
  return b;
}

template <typename T>
ad::Var<T> BoundModel<T>::operator[](const std::string& name) const {
  auto it = values.find(name);
  if (it == values.end()) {
    throw ConfigError("bound model has no parameter named '" + name + "'");
  }
  return it->second;
}

template <typename T>
BoundModel<T> bind(ad::Tape<T>& tape, const Model<T>& model, const Mask* mask) {
  BoundModel<T> b;
  b.model = &model;
  if (mask != nullptr) {
    mask->check_layout(prunable_layout(model.config));
  }
  for (const auto& [name, tensor] : model.backbone) {
    ad::Var<T> leaf = tape.leaf(tensor);
    b.leaves.emplace(name, leaf);
    ad::Var<T> value = leaf;
    if (mask != nullptr && mask->contains(name)) {
      value = ad::apply_mask(leaf, std::span<const std::uint8_t>(mask->at(name)));
    }
    b.values.emplace(name, value);
  }
  for (const auto& [name, tensor] : model.head) {
    ad::Var<T> leaf = tape.leaf(tensor);
    b.leaves.emplace(name, leaf);
    b.values.emplace(name, leaf);
  }
  return b;
}

namespace {

template <typename T>
ad::Var<T> linear(const BoundModel<T>& b, ad::Var<T> x, const std::string& prefix) {
  return ad::add_bias(ad::matmul(x, b[prefix + ".weight"]), b[prefix + ".bias"]);
}

template <typename T>
ad::Var<T> norm(const BoundModel<T>& b, ad::Var<T> x, const std::string& prefix) {
  return ad::layer_norm(x, b[prefix + ".gain"], b[prefix + ".bias"],
                        static_cast<T>(b.model->config.norm_eps));
}

}  // namespace

template <typename T>
ad::Var<T> encode(const BoundModel<T>& b, const TokenBatch& batch) {
  const ModelConfig& cfg = b.model->config;
  for (std::uint32_t p : batch.positions) {
    if (p >= cfg.max_seq_len) {
      throw InputError("position " + std::to_string(p) + " exceeds max_seq_len " +
                       std::to_string(cfg.max_seq_len));
    }
  }
  ad::Var<T> x = ad::add(ad::embedding_lookup(b["embeddings.token.weight"], std::span(batch.ids)),
                         ad::embedding_lookup(b["embeddings.position.weight"],
                                              std::span(batch.positions)));
  x = norm(b, x, "embeddings.norm");
  for (std::size_t i = 0; i < cfg.num_blocks; ++i) {
    const std::string p = "blocks." + std::to_string(i) + ".";
    ad::Var<T> q = linear(b, x, p + "attention.query");
    ad::Var<T> k = linear(b, x, p + "attention.key");
    ad::Var<T> v = linear(b, x, p + "attention.value");
    ad::Var<T> a = ad::self_attention(q, k, v, std::span(batch.segments), cfg.heads);
    x = norm(b, ad::add(x, linear(b, a, p + "attention.output")), p + "attention.norm");
    ad::Var<T> h = ad::gelu(linear(b, x, p + "ffn.up"));
    x = norm(b, ad::add(x, linear(b, h, p + "ffn.down")), p + "ffn.norm");
  }
  return x;
}

template <typename T>
ad::Var<T> mlm_logits(const BoundModel<T>& b, ad::Var<T> hidden, std::span<const std::size_t> rows) {
  if (!b.model->head_spec || b.model->head_spec->kind != HeadKind::mlm) {
    throw StateError("model has no mlm head");
  }
  ad::Var<T> x = ad::gather_rows(hidden, rows);
  x = ad::gelu(linear(b, x, "head.transform"));
  x = norm(b, x, "head.norm");
  return ad::add_bias(ad::matmul_transposed(x, b["embeddings.token.weight"]), b["head.decoder.bias"]);
}

template <typename T>
ad::Var<T> sequence_output(const BoundModel<T>& b, ad::Var<T> hidden, const TokenBatch& batch) {
  if (!b.model->head_spec) {
    throw StateError("model has no head attached");
  }
  const std::vector<std::size_t> rows = batch.first_rows();
  ad::Var<T> pooled = ad::gather_rows(hidden, std::span<const std::size_t>(rows));
  switch (b.model->head_spec->kind) {
    case HeadKind::classifier:
      return linear(b, pooled, "head.classifier");
    case HeadKind::regressor:
      return linear(b, pooled, "head.regressor");
    case HeadKind::mlm:
      break;
  }
  throw StateError("mlm head has no sequence output");
}

template <typename T>
Tensor<T> forward(const Model<T>& model, const Mask* mask, const TokenBatch& batch) {
  ad::Tape<T> tape(false);
  BoundModel<T> b = bind(tape, model, mask);
  ad::Var<T> hidden = encode(b, batch);
  if (!model.head_spec) {
    return hidden.value();
  }
  if (model.head_spec->kind == HeadKind::mlm) {
    std::vector<std::size_t> rows(batch.rows());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      rows[i] = i;
    }
    return mlm_logits(b, hidden, std::span<const std::size_t>(rows)).value();
  }
  return sequence_output(b, hidden, batch).value();
}

#define LOTTERY_INSTANTIATE_MODEL(T)                                                            \
  template struct Model<T>;                                                                     \
  template struct BoundModel<T>;                                                                \
  template Tensor<T> init_tensor<T>(const TensorLayout&, Rng&);                                 \
  template Model<T> init_params<T>(const ModelConfig&, std::uint64_t);                          \
  template Model<T> attach_head<T>(const Model<T>&, const HeadSpec&, std::uint64_t);            \
  template BoundModel<T> bind<T>(ad::Tape<T>&, const Model<T>&, const Mask*);                   \
  template ad::Var<T> encode<T>(const BoundModel<T>&, const TokenBatch&);                       \
  template ad::Var<T> mlm_logits<T>(const BoundModel<T>&, ad::Var<T>, std::span<const std::size_t>); \
  template ad::Var<T> sequence_output<T>(const BoundModel<T>&, ad::Var<T>, const TokenBatch&);  \
  template Tensor<T> forward<T>(const Model<T>&, const Mask*, const TokenBatch&);

LOTTERY_INSTANTIATE_MODEL(float)
LOTTERY_INSTANTIATE_MODEL(double)

}  // namespace lottery
