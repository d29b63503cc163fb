#pragma once

#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "lottery/experiments/imp.hpp"
#include "lottery/experiments/records.hpp"
#include "lottery/experiments/suite.hpp"
#include "lottery/training/checkpoint.hpp"

namespace lottery {

// Some runs of a stage failed; the others completed and their artifacts stay.
class PartialFailure : public Error {
 public:
  PartialFailure(std::size_t failed, std::size_t total, const std::string& first)
      : Error(std::to_string(failed) + " of " + std::to_string(total) + " runs failed; first: " + first),
        failed_(failed) {}
  std::size_t failed() const noexcept { return failed_; }

 private:
  std::size_t failed_;
};

// Runs jobs[0..n) on up to `workers` threads and returns after all of them
// finished. Failures are collected and rethrown as one PartialFailure.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job);

/// A cell to train and evaluate: the record skeleton (provenance fields), the
/// text its fingerprint hashes, and the work itself.
struct Cell {
  RunRecord record;
  std::string key;  // everything beyond the suite that determines the value
  std::function<EvalResult()> run;
};

/// Shared state of one output directory: the suite, its tasks, the
/// pre-trained backbone, the IMP artifact cache, and the record log.
template <typename T>
class Lab {
 public:
  Lab(SuiteConfig suite, std::filesystem::path out, std::size_t workers = 1);

  const SuiteConfig& suite() const noexcept { return suite_; }
  const HmmFamily& family() const noexcept { return family_; }
  const std::filesystem::path& out() const noexcept { return out_; }
  std::size_t workers() const noexcept { return workers_; }
  RecordLog& log() noexcept { return log_; }
  // Hex sha256 of the suite canonical form and dtype.
  const std::string& suite_fingerprint() const noexcept { return suite_fp_; }

  const Task& task(const std::string& id) const;
  // theta0 and theta0', loaded from out/pretrain when present and fresh.
  const Pretrained<T>& pretrained();

  // Fine-tuning config of run `seed`.
  TrainConfig finetune_config(std::uint64_t seed) const;
  // `backbone` with the seed's head for `task`.
  Model<T> with_head(const Model<T>& backbone, const std::string& task, std::uint64_t seed) const;

  // IMP of theta0 on `task` (seed-matched head and data order), persisted under
  // out/imp/<task>-<hash>/. `label` distinguishes datasets that share a task
  // id (e.g. subsamples); `data` overrides the task's data when given.
  // `rewind` starts the loop from a stored state at the rewind step instead
  // of training theta0 up to it.
  std::shared_ptr<const ImpResult<T>> imp(const std::string& task, const ImpSpec& spec,
                                          const Task* data = nullptr, const std::string& label = "",
                                          const TrainState<T>* rewind = nullptr);
  // Cache key of that IMP run; also the spec hash written into its masks.
  std::string imp_key(const std::string& task, const ImpSpec& spec, const Task* data = nullptr,
                      const std::string& label = "") const;
  // Dense fine-tuning states of `task` at the given steps, persisted under
  // out/dense/<task>-seed<k>/step-<i>.ltck.
  std::map<std::size_t, TrainState<T>> dense_checkpoints(const std::string& task, std::uint64_t seed,
                                                         const std::vector<std::size_t>& steps);
  // Writes `mask` under out/masks/ and returns the path relative to out().
  std::string save_mask_artifact(const std::string& name, const Mask& mask);
  static std::string mask_artifact_path(const std::string& name);

  // Runs each cell not already in the log with the same id and fingerprint.
  std::vector<RunRecord> run_cells(std::vector<Cell> cells);
  // Single-cell variant for use inside a running stage.
  RunRecord run_cell(Cell cell);

 private:
  std::string imp_dir_name(const std::string& task, const std::string& key) const;

  SuiteConfig suite_;
  std::filesystem::path out_;
  std::size_t workers_;
  HmmFamily family_;
  std::map<std::string, Task> tasks_;
  std::string suite_fp_;
  RecordLog log_;

  std::mutex mutex_;
  std::unique_ptr<Pretrained<T>> pretrained_;
  std::map<std::string, std::shared_future<std::shared_ptr<const ImpResult<T>>>> imp_cache_;
};

// Config digest used across artifacts: sha256 of `text`, hex.
std::string hex_digest(const std::string& text);

// Fingerprint every record of a suite carries (params["suite"]).
std::string suite_fingerprint(const SuiteConfig& suite, Dtype dtype);

}  // namespace lottery
