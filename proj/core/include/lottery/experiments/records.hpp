#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "lottery/tasks/metrics.hpp"

namespace lottery {

enum class WeightSource : std::uint8_t { theta0, theta_i, theta0_reinit, theta0_shuffled, theta_t };

// Short names: theta0, theta_i, theta0', theta0'', theta_t.
std::string to_string(WeightSource w);
WeightSource parse_weight_source(const std::string& text);

/// One trained-and-evaluated cell.
struct RunRecord {
  std::string id;          // unique key of the cell within its log
  std::string experiment;  // claims, transfer, rewind-sweep, ...
  std::string variant;     // full, imp, random-mask, ...
  std::string mask_task;   // task that produced the mask; empty for dense
  std::string mask_method; // imp, random-global, dense, ...
  WeightSource weights = WeightSource::theta0;
  std::string target;
  double sparsity = 0.0;
  std::uint64_t seed = 0;
  std::size_t rewind_step = 0;
  MetricId metric = MetricId::accuracy;
  double value = 0.0;
  bool undefined = false;
  double wall_seconds = 0.0;
  std::string fingerprint;  // hex digest of everything that determined the run
  std::map<std::string, std::string> params;
  std::map<std::string, std::string> artifacts;

  std::string to_json() const;
  static RunRecord from_json(const std::string& line);
};

/// Append-only JSON-lines log of records; safe to share between workers.
class RecordLog {
 public:
  explicit RecordLog(std::filesystem::path path);

  const std::filesystem::path& path() const noexcept { return path_; }
  // Record with this id and fingerprint, if the log already has one.
  std::optional<RunRecord> find(const std::string& id, const std::string& fingerprint) const;
  void append(const RunRecord& record);
  std::vector<RunRecord> records() const;

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, RunRecord> by_id_;
  std::vector<std::string> order_;
};

// Reads every record of a log file; a malformed line throws LoadError naming
// its byte offset.
std::vector<RunRecord> read_records(const std::filesystem::path& path);

}  // namespace lottery
