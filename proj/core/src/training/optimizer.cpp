#include "lottery/training/optimizer.hpp"

#include <cmath>
#include <cstdio>

#include "lottery/errors.hpp"

namespace lottery {

void TrainConfig::validate() const {
  if (steps < 1) {
    throw ConfigError("train steps must be at least 1");
  }
  if (batch_size < 1) {
    throw ConfigError("batch size must be at least 1");
  }
  if (!(eps > 0.0)) {
    throw ConfigError("adam eps must be positive");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(lr >= 0.0) || !(weight_decay >= 0.0)) {
    throw ConfigError("learning rate and weight decay must be non-negative");
  }
}

std::string TrainConfig::canonical() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "train{lr=%.17g,t=%zu,bs=%zu,wd=%.17g,b1=%.17g,b2=%.17g,eps=%.17g,seed=%llu,reset=%d}",
                lr, steps, batch_size, weight_decay, beta1, beta2, eps,
                static_cast<unsigned long long>(seed), reset_optimizer_on_rewind ? 1 : 0);
  return buf;
}

double lr_at(const TrainConfig& config, std::size_t step) {
  if (step > config.steps) {
    throw ArgumentError("step " + std::to_string(step) + " exceeds t=" + std::to_string(config.steps));
  }
  return config.lr * (1.0 - static_cast<double>(step) / static_cast<double>(config.steps));
}

std::size_t rewind_step(const TrainConfig& config, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ArgumentError("rewind fraction must lie in [0, 1]");
  }
  return static_cast<std::size_t>(std::round(fraction * static_cast<double>(config.steps)));
}

template <typename T>
OptimizerState<T> OptimizerState<T>::zeros_like(const Model<T>& model) {
  OptimizerState<T> s;
  for (const auto* map : {&model.backbone, &model.head}) {
    for (const auto& [name, t] : *map) {
      s.m.emplace(name, Tensor<T>(t.shape()));
      s.v.emplace(name, Tensor<T>(t.shape()));
    }
  }
  return s;
}

bool applies_weight_decay(const std::string& name) {
  return name.ends_with(".weight");
}

template <typename T>
void adamw_step(Model<T>& model, const TensorMap<T>& grads, OptimizerState<T>& state, double lr,
                const TrainConfig& config) {
  for (const auto& [name, g] : grads) {
    for (T x : g.data()) {
      if (!std::isfinite(x)) {
        throw NumericError("non-finite gradient in tensor '" + name + "'");
      }
    }
  }
  const std::uint64_t k = state.step + 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(k));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(k));
  const double decay = 1.0 - lr * config.weight_decay;
  auto update = [&](TensorMap<T>& params) {
    for (auto& [name, theta] : params) {
      auto git = grads.find(name);
      if (git == grads.end()) {
        throw StateError("no gradient supplied for '" + name + "'");
      }
      const Tensor<T>& g = git->second;
      Tensor<T>& m = state.m.at(name);
      Tensor<T>& v = state.v.at(name);
      const bool wd = applies_weight_decay(name) && config.weight_decay != 0.0;
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double gi = static_cast<double>(g[i]);
        double th = static_cast<double>(theta[i]);
        if (wd) {
          th *= decay;
        }
        const double mi = config.beta1 * static_cast<double>(m[i]) + (1.0 - config.beta1) * gi;
        const double vi = config.beta2 * static_cast<double>(v[i]) + (1.0 - config.beta2) * gi * gi;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        if (mi != 0.0) {
          th -= lr * (mi / bc1) / (std::sqrt(vi / bc2) + config.eps);
        }
        theta[i] = static_cast<T>(th);
      }
    }
  };
  update(model.backbone);
  update(model.head);
  state.step = k;
}

template struct OptimizerState<float>;
template struct OptimizerState<double>;
template void adamw_step<float>(Model<float>&, const TensorMap<float>&, OptimizerState<float>&,
                                double, const TrainConfig&);
template void adamw_step<double>(Model<double>&, const TensorMap<double>&, OptimizerState<double>&,
                                 double, const TrainConfig&);

}  // namespace lottery
