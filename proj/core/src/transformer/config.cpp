#include "lottery/transformer/config.hpp"

#include <algorithm>
#include <cstdio>

#include "lottery/errors.hpp"

namespace lottery {

void ModelConfig::validate() const {
  if (hidden == 0 || heads == 0 || vocab == 0 || max_seq_len == 0) {
    throw ConfigError("model sizes must be at least 1");
  }
  if (hidden % heads != 0) {
    throw ConfigError("hidden size " + std::to_string(hidden) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (!(norm_eps > 0.0)) {
    throw ConfigError("norm_eps must be positive");
  }
}

std::string ModelConfig::canonical() const {
  char eps[32];
  std::snprintf(eps, sizeof(eps), "%.17g", norm_eps);
  return "model{L=" + std::to_string(num_blocks) + ",d=" + std::to_string(hidden) +
         ",h=" + std::to_string(heads) + ",f=" + std::to_string(ffn_size()) +
         ",V=" + std::to_string(vocab) + ",S=" + std::to_string(max_seq_len) + ",eps=" + eps + "}";
}

ModelConfig bert_base_config() {
  ModelConfig c;
  c.num_blocks = 12;
  c.hidden = 768;
  c.heads = 12;
  c.ffn = 3072;
  c.vocab = 30522;
  c.max_seq_len = 512;
  return c;
}

ModelConfig toy_config() {
  return ModelConfig{};
}

std::string to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::mlm:
      return "mlm";
    case HeadKind::classifier:
      return "classifier";
    case HeadKind::regressor:
      return "regressor";
  }
  return "unknown";
}

HeadKind parse_head_kind(const std::string& text) {
  if (text == "mlm") {
    return HeadKind::mlm;
  }
  if (text == "classifier") {
    return HeadKind::classifier;
  }
  if (text == "regressor") {
    return HeadKind::regressor;
  }
  throw ArgumentError("unknown head kind '" + text + "'");
}

std::string HeadSpec::canonical() const {
  return kind == HeadKind::classifier ? "classifier(" + std::to_string(classes) + ")"
                                      : to_string(kind);
}

std::vector<TensorLayout> backbone_layout(const ModelConfig& config) {
  config.validate();
  const std::size_t d = config.hidden;
  const std::size_t f = config.ffn_size();
  std::vector<TensorLayout> out;
  auto weight = [&](std::string name, Shape shape) {
    out.push_back({std::move(name), std::move(shape), ParamRole::weight, true});
  };
  auto bias = [&](std::string name, std::size_t n) {
    out.push_back({std::move(name), Shape{n}, ParamRole::bias, false});
  };
  auto gain = [&](std::string name, std::size_t n) {
    out.push_back({std::move(name), Shape{n}, ParamRole::gain, false});
  };
  weight("embeddings.token.weight", {config.vocab, d});
  weight("embeddings.position.weight", {config.max_seq_len, d});
  gain("embeddings.norm.gain", d);
  bias("embeddings.norm.bias", d);
  for (std::size_t b = 0; b < config.num_blocks; ++b) {
    const std::string p = "blocks." + std::to_string(b) + ".";
    for (const char* proj : {"query", "key", "value", "output"}) {
      weight(p + "attention." + proj + ".weight", {d, d});
      bias(p + "attention." + proj + ".bias", d);
    }
    gain(p + "attention.norm.gain", d);
    bias(p + "attention.norm.bias", d);
    weight(p + "ffn.up.weight", {d, f});
    bias(p + "ffn.up.bias", f);
    weight(p + "ffn.down.weight", {f, d});
    bias(p + "ffn.down.bias", d);
    gain(p + "ffn.norm.gain", d);
    bias(p + "ffn.norm.bias", d);
  }
  std::sort(out.begin(), out.end(),
            [](const TensorLayout& a, const TensorLayout& b) { return a.name < b.name; });
  return out;
}

std::vector<TensorLayout> head_layout(const ModelConfig& config, const HeadSpec& head) {
  config.validate();
  const std::size_t d = config.hidden;
  std::vector<TensorLayout> out;
  switch (head.kind) {
    case HeadKind::mlm:
      // The decoder matrix is tied to the (masked) token embedding.
      out.push_back({"head.decoder.bias", Shape{config.vocab}, ParamRole::bias, false});
      out.push_back({"head.norm.bias", Shape{d}, ParamRole::bias, false});
      out.push_back({"head.norm.gain", Shape{d}, ParamRole::gain, false});
      out.push_back({"head.transform.bias", Shape{d}, ParamRole::bias, false});
      out.push_back({"head.transform.weight", Shape{d, d}, ParamRole::weight, false});
      break;
    case HeadKind::classifier:
      if (head.classes < 2) {
        throw ConfigError("classifier head needs at least 2 classes");
      }
      out.push_back({"head.classifier.bias", Shape{head.classes}, ParamRole::bias, false});
      out.push_back({"head.classifier.weight", Shape{d, head.classes}, ParamRole::weight, false});
      break;
    case HeadKind::regressor:
      out.push_back({"head.regressor.bias", Shape{1}, ParamRole::bias, false});
      out.push_back({"head.regressor.weight", Shape{d, 1}, ParamRole::weight, false});
      break;
  }
  return out;
}

std::uint64_t count_params(const ModelConfig& config) {
  config.validate();
  const std::uint64_t V = config.vocab;
  const std::uint64_t S = config.max_seq_len;
  const std::uint64_t d = config.hidden;
  const std::uint64_t f = config.ffn_size();
  const std::uint64_t L = config.num_blocks;
  return V * d + S * d + 2 * d + L * (4 * (d * d + d) + 2 * d * f + f + d + 4 * d);
}

std::uint64_t count_head_params(const ModelConfig& config, const HeadSpec& head) {
  std::uint64_t n = 0;
  for (const auto& t : head_layout(config, head)) {
    n += shape_size(t.shape);
  }
  return n;
}

}  // namespace lottery
