#include "lottery/experiments/records.hpp"

#include <fstream>
#include <json.hpp>

#include "lottery/errors.hpp"

namespace lottery {

using nlohmann::json;

std::string to_string(WeightSource w) {
  switch (w) {
    case WeightSource::theta0:
      return "theta0";
    case WeightSource::theta_i:
      return "theta_i";
    case WeightSource::theta0_reinit:
      return "theta0'";
    case WeightSource::theta0_shuffled:
      return "theta0''";
    case WeightSource::theta_t:
      return "theta_t";
  }
  return "unknown";
}

WeightSource parse_weight_source(const std::string& text) {
  for (WeightSource w : {WeightSource::theta0, WeightSource::theta_i, WeightSource::theta0_reinit,
                         WeightSource::theta0_shuffled, WeightSource::theta_t}) {
    if (to_string(w) == text) {
      return w;
    }
  }
  throw ArgumentError("unknown weight source '" + text + "'");
}

std::string RunRecord::to_json() const {
  json j;
  j["id"] = id;
  j["experiment"] = experiment;
  j["variant"] = variant;
  j["mask_source"] = {{"task", mask_task}, {"method", mask_method}};
  j["weight_source"] = to_string(weights);
  j["target"] = target;
  j["sparsity"] = sparsity;
  j["seed"] = seed;
  j["rewind_step"] = rewind_step;
  j["metric"] = lottery::to_string(metric);
  j["value"] = value;
  j["undefined"] = undefined;
  j["wall_seconds"] = wall_seconds;
  j["fingerprint"] = fingerprint;
  j["params"] = params;
  j["artifacts"] = artifacts;
  return j.dump();
}

RunRecord RunRecord::from_json(const std::string& line) {
  const json j = json::parse(line);
  RunRecord r;
  r.id = j.at("id").get<std::string>();
  r.experiment = j.at("experiment").get<std::string>();
  r.variant = j.at("variant").get<std::string>();
  r.mask_task = j.at("mask_source").at("task").get<std::string>();
  r.mask_method = j.at("mask_source").at("method").get<std::string>();
  r.weights = parse_weight_source(j.at("weight_source").get<std::string>());
  r.target = j.at("target").get<std::string>();
  r.sparsity = j.at("sparsity").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.rewind_step = j.at("rewind_step").get<std::size_t>();
  r.metric = parse_metric(j.at("metric").get<std::string>());
  r.value = j.at("value").get<double>();
  r.undefined = j.at("undefined").get<bool>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  r.fingerprint = j.at("fingerprint").get<std::string>();
  r.params = j.at("params").get<std::map<std::string, std::string>>();
  r.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
  return r;
}

std::vector<RunRecord> read_records(const std::filesystem::path& path) {
  std::vector<RunRecord> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    return out;
  }
  std::string line;
  std::uint64_t offset = 0;
  while (std::getline(in, line)) {
    const std::uint64_t at = offset;
    offset += line.size() + 1;
    if (line.empty()) {
      continue;
    }
    try {
      out.push_back(RunRecord::from_json(line));
    } catch (const std::exception& e) {
      throw LoadError("malformed record in " + path.string() + ": " + e.what(), at);
    }
  }
  return out;
}

RecordLog::RecordLog(std::filesystem::path path) : path_(std::move(path)) {
  for (auto& r : read_records(path_)) {
    if (by_id_.count(r.id) == 0) {
      order_.push_back(r.id);
    }
    by_id_[r.id] = std::move(r);
  }
}

std::optional<RunRecord> RecordLog::find(const std::string& id, const std::string& fingerprint) const {
  std::lock_guard lock(mutex_);
  auto it = by_id_.find(id);
  if (it == by_id_.end() || it->second.fingerprint != fingerprint) {
    return std::nullopt;
  }
  return it->second;
}

void RecordLog::append(const RunRecord& record) {
  std::lock_guard lock(mutex_);
  if (path_.has_parent_path()) {
    std::filesystem::create_directories(path_.parent_path());
  }
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) {
    throw StateError("cannot append to record log " + path_.string());
  }
  out << record.to_json() << '\n';
  out.flush();
  if (by_id_.count(record.id) == 0) {
    order_.push_back(record.id);
  }
  by_id_[record.id] = record;
}

std::vector<RunRecord> RecordLog::records() const {
  std::lock_guard lock(mutex_);
  std::vector<RunRecord> out;
  out.reserve(order_.size());
  for (const auto& id : order_) {
    out.push_back(by_id_.at(id));
  }
  return out;
}

}  // namespace lottery
