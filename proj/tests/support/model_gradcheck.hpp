#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "lottery/transformer/model.hpp"

namespace lottery::testing {

struct ModelGradcheckResult {
  std::size_t coordinates = 0;
  std::size_t failures = 0;
  double worst = 0.0;
  std::string worst_name;
};

// Random parameters at a scale where every nonlinearity is exercised (the
// 0.02 init keeps layer norms nearly linear), nonzero biases and gains.
inline Model<double> gradcheck_model(const ModelConfig& config, const HeadSpec& head,
                                     std::uint64_t seed) {
  Model<double> m = attach_head(init_params<double>(config, seed), head, seed + 1);
  Rng rng(seed + 2);
  auto perturb = [&](TensorMap<double>& map) {
    for (auto& [name, t] : map) {
      const bool gain = name.ends_with(".gain");
      for (double& v : t.data()) {
        v = gain ? 1.0 + 0.2 * rng.normal() : 0.5 * rng.normal();
      }
    }
  };
  perturb(m.backbone);
  perturb(m.head);
  return m;
}

// MLM loss at a few rows plus whatever the model's head produces.
inline ad::Var<double> gradcheck_loss(const BoundModel<double>& bound, const TokenBatch& batch,
                                      const std::vector<std::size_t>& rows,
                                      const std::vector<std::uint32_t>& targets) {
  ad::Var<double> hidden = encode(bound, batch);
  return ad::cross_entropy(mlm_logits(bound, hidden, std::span<const std::size_t>(rows)),
                           std::span<const std::uint32_t>(targets));
}

// Compares analytic gradients of a full-model MLM loss against fourth-order
// central differences at `samples` coordinates drawn uniformly over all
// parameters (backbone and head).
inline ModelGradcheckResult check_model_gradient(const ModelConfig& config, std::size_t samples,
                                                 double tolerance, std::uint64_t seed,
                                                 const Mask* mask = nullptr) {
  Model<double> model = gradcheck_model(config, HeadSpec::mlm(), seed);
  Rng rng(seed + 3);
  std::vector<std::vector<std::uint32_t>> seqs;
  for (std::size_t len : {config.max_seq_len, config.max_seq_len / 2 + 1, std::size_t{3}}) {
    std::vector<std::uint32_t> s(std::min(len, config.max_seq_len));
    for (auto& id : s) {
      id = static_cast<std::uint32_t>(rng.below(config.vocab));
    }
    seqs.push_back(std::move(s));
  }
  const TokenBatch batch = TokenBatch::pack(seqs, config.max_seq_len);
  std::vector<std::size_t> rows;
  std::vector<std::uint32_t> targets;
  for (std::size_t r = 0; r < batch.rows(); r += 2) {
    rows.push_back(r);
    targets.push_back(static_cast<std::uint32_t>(rng.below(config.vocab)));
  }

  TensorMap<double> analytic;
  {
    ad::Tape<double> tape;
    BoundModel<double> bound = bind(tape, model, mask);
    ad::Var<double> loss = gradcheck_loss(bound, batch, rows, targets);
    tape.backward(loss);
    for (const auto& [name, leaf] : bound.leaves) {
      analytic.emplace(name, leaf.grad());
    }
  }

  std::vector<std::pair<std::string, std::size_t>> coords;
  std::vector<std::string> names;
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& [name, g] : analytic) {
    names.push_back(name);
    offsets.push_back(total);
    total += g.size();
  }
  for (std::size_t flat : rng.choice(total, std::min(samples, total))) {
    std::size_t t = static_cast<std::size_t>(
        std::upper_bound(offsets.begin(), offsets.end(), flat) - offsets.begin() - 1);
    coords.emplace_back(names[t], flat - offsets[t]);
  }

  auto evaluate = [&]() {
    ad::Tape<double> tape(false);
    BoundModel<double> bound = bind(tape, model, mask);
    return gradcheck_loss(bound, batch, rows, targets).value().item();
  };

  ModelGradcheckResult result;
  for (const auto& [name, index] : coords) {
    double& coordinate = model.param(name)[index];
    const double numeric = central_difference(evaluate, coordinate);
    const double err = relative_error(analytic.at(name)[index], numeric);
    ++result.coordinates;
    if (err > tolerance) {
      ++result.failures;
    }
    if (err > result.worst) {
      result.worst = err;
      result.worst_name = name + "[" + std::to_string(index) + "]";
    }
  }
  return result;
}

}  // namespace lottery::testing
