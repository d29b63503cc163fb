#include "lottery/experiments/suite.hpp"

#include <set>

#include "lottery/errors.hpp"

namespace lottery {

void SuiteConfig::validate() const {
  model.validate();
  generator.validate();
  pretrain.validate();
  finetune.validate();
  if (generator.vocab != model.vocab) {
    throw ConfigError("generator vocab " + std::to_string(generator.vocab) + " differs from model vocab " +
                      std::to_string(model.vocab));
  }
  if (pretrain_task.rule != TaskRule::mlm) {
    throw ConfigError("the pre-training task must use the mlm rule");
  }
  std::set<std::string> ids;
  for (const auto& t : tasks) {
    if (t.id.empty()) {
      throw ConfigError("task ids must be non-empty");
    }
    if (!ids.insert(t.id).second) {
      throw ConfigError("duplicate task id '" + t.id + "'");
    }
    if (t.max_seq_len > model.max_seq_len) {
      throw ConfigError("task '" + t.id + "' sequences exceed the model's max_seq_len");
    }
  }
  if (pretrain_task.max_seq_len > model.max_seq_len) {
    throw ConfigError("pre-training sequences exceed the model's max_seq_len");
  }
}

std::string SuiteConfig::canonical() const {
  std::string out = "suite{" + model.canonical() + generator.canonical() + "pre:" + pretrain_task.canonical() +
                    pretrain.canonical() + "ft:" + finetune.canonical() + "init=" + std::to_string(init_seed) + ";";
  for (const auto& t : tasks) {
    out += t.canonical();
  }
  return out + "}";
}

const TaskSpec& SuiteConfig::task_spec(const std::string& id) const {
  for (const auto& t : tasks) {
    if (t.id == id) {
      return t;
    }
  }
  throw ConfigError("unknown task '" + id + "'");
}

std::vector<std::string> SuiteConfig::task_ids() const {
  std::vector<std::string> out;
  for (const auto& t : tasks) {
    out.push_back(t.id);
  }
  return out;
}

namespace {

TaskSpec task(const std::string& id, TaskRule rule, std::size_t train, std::size_t eval) {
  TaskSpec s;
  s.id = id;
  s.rule = rule;
  s.train_size = train;
  s.eval_size = eval;
  return s;
}

}  // namespace

SuiteConfig toy_suite() {
  SuiteConfig s;
  s.generator.shared_emissions = true;
  s.generator.emission_concentration = 0.05;
  s.generator.transition_concentration = 0.05;
  s.generator.self_transition = 0.5;
  s.pretrain_task = task("pretrain", TaskRule::mlm, 8000, 500);
  s.pretrain.lr = 3e-3;
  s.pretrain.steps = 2000;
  s.pretrain.batch_size = 32;
  s.finetune.lr = 1e-3;
  s.finetune.steps = 300;
  s.finetune.batch_size = 16;
  s.tasks = {task("mlm", TaskRule::mlm, 512, 2000), task("dominant-state", TaskRule::dominant_state, 512, 2000),
             task("same-chain", TaskRule::same_chain, 512, 2000),
             task("state-fraction", TaskRule::state_fraction, 512, 2000)};
  return s;
}

SuiteConfig ci_suite() {
  SuiteConfig s = toy_suite();
  s.model.num_blocks = 1;
  s.model.hidden = 16;
  s.pretrain_task.train_size = 1000;
  s.pretrain_task.eval_size = 100;
  s.pretrain.steps = 200;
  s.finetune.steps = 40;
  for (auto& t : s.tasks) {
    t.train_size = 128;
    t.eval_size = 200;
  }
  return s;
}

template <typename T>
Model<T> strip_head(const Model<T>& model) {
  Model<T> out;
  out.config = model.config;
  out.backbone = model.backbone;
  return out;
}

template <typename T>
Pretrained<T> pretrain(const SuiteConfig& suite, const HmmFamily& family) {
  suite.validate();
  const Task corpus = make_task(family, suite.pretrain_task);
  Pretrained<T> p;
  p.reinit = init_params<T>(suite.model, suite.init_seed);
  TrainConfig cfg = suite.pretrain;
  cfg.seed = suite.init_seed;
  TrainState<T> state =
      TrainState<T>::start(attach_head(p.reinit, corpus.head, derive_seed(suite.init_seed, "head:pretrain")), cfg);
  p.trace = train(state, nullptr, corpus, cfg);
  p.mlm_accuracy = evaluate(state.model, nullptr, corpus).value;
  p.theta0 = strip_head(state.model);
  return p;
}

template Model<float> strip_head<float>(const Model<float>&);
template Model<double> strip_head<double>(const Model<double>&);
template Pretrained<float> pretrain<float>(const SuiteConfig&, const HmmFamily&);
template Pretrained<double> pretrain<double>(const SuiteConfig&, const HmmFamily&);

}  // namespace lottery
