#pragma once

#include <string>
#include <vector>

#include "lottery/tasks/corpus.hpp"
#include "lottery/tasks/task.hpp"
#include "lottery/training/trainer.hpp"

namespace lottery {

/// Everything that defines the synthetic lab: model, generator, pre-training
/// and fine-tuning budgets, and the task list.
struct SuiteConfig {
  ModelConfig model;
  GeneratorSpec generator;
  TaskSpec pretrain_task;  // the MLM corpus theta0 is pre-trained on
  TrainConfig pretrain;
  TrainConfig finetune;    // A_t; its seed field is replaced per run
  std::vector<TaskSpec> tasks;
  std::uint64_t init_seed = 1;  // seed of the random init theta0 starts from

  void validate() const;
  std::string canonical() const;
  const TaskSpec& task_spec(const std::string& id) const;
  std::vector<std::string> task_ids() const;
};

// The frozen desk-scale fixture: L=2, d=32, V=64, 2000 MLM pre-training steps.
SuiteConfig toy_suite();
// Reduced fixture for smoke runs.
SuiteConfig ci_suite();

template <typename T>
struct Pretrained {
  Model<T> theta0;  // backbone after MLM pre-training, no head
  Model<T> reinit;  // theta0': the random init pre-training started from
  TrainTrace trace;
  double mlm_accuracy = 0.0;  // pre-training task, eval split
};

// MLM pre-training of init_params(model, init_seed) on the pre-training task.
template <typename T>
Pretrained<T> pretrain(const SuiteConfig& suite, const HmmFamily& family);

// Backbone of `model` with its head removed.
template <typename T>
Model<T> strip_head(const Model<T>& model);

}  // namespace lottery
