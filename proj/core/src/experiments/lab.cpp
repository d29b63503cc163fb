#include "lottery/experiments/lab.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <thread>

#include <json.hpp>

#include "lottery/errors.hpp"
#include "lottery/io/binary.hpp"
#include "lottery/masking/pruning.hpp"

namespace lottery {

using nlohmann::json;
using io::read_file;
using io::write_file_atomic;
namespace fs = std::filesystem;

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job) {
  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  std::size_t failed = 0;
  std::string first;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        job(i);
      } catch (const std::exception& e) {
        std::lock_guard lock(mutex);
        if (failed++ == 0) {
          first = e.what();
        }
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(workers, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < threads; ++k) {
      pool.emplace_back(worker);
    }
    for (auto& t : pool) {
      t.join();
    }
  }
  if (failed > 0) {
    throw PartialFailure(failed, n, first);
  }
}

std::string hex_digest(const std::string& text) {
  return to_hex(sha256(text));
}

std::string suite_fingerprint(const SuiteConfig& suite, Dtype dtype) {
  return hex_digest(suite.canonical() + "dtype=" + to_string(dtype));
}

namespace {

std::string file_safe(const std::string& text) {
  std::string out;
  for (char c : text) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '.' || c == '_';
    out += ok ? c : '_';
  }
  return out;
}

std::string sparsity_tag(double s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", s);
  return buf;
}

template <typename T>
Checkpoint<T> weights_checkpoint(const Model<T>& model, std::size_t step, const Digest& fp) {
  Checkpoint<T> c;
  c.fingerprint = fp;
  c.state = TrainState<T>::start(model, TrainConfig{});
  c.state.step = step;
  return c;
}

// Header fingerprint of an existing checkpoint file, if it can be read at all.
std::optional<Digest> header_fingerprint(const fs::path& path) {
  if (!fs::exists(path)) {
    return std::nullopt;
  }
  try {
    return inspect_checkpoint(read_file(path)).fingerprint;
  } catch (const LoadError&) {
    return std::nullopt;
  }
}

}  // namespace

template <typename T>
Lab<T>::Lab(SuiteConfig suite, fs::path out, std::size_t workers)
    : suite_(std::move(suite)),
      out_(std::move(out)),
      workers_(std::max<std::size_t>(1, workers)),
      family_((suite_.validate(), build_family(suite_.generator))),
      suite_fp_(lottery::suite_fingerprint(suite_, dtype_of<T>())),
      log_(out_ / "records.jsonl") {
  for (const auto& spec : suite_.tasks) {
    tasks_.emplace(spec.id, make_task(family_, spec));
  }
}

template <typename T>
const Task& Lab<T>::task(const std::string& id) const {
  auto it = tasks_.find(id);
  if (it == tasks_.end()) {
    throw ConfigError("unknown task '" + id + "'");
  }
  return it->second;
}

template <typename T>
const Pretrained<T>& Lab<T>::pretrained() {
  std::lock_guard lock(mutex_);
  if (pretrained_) {
    return *pretrained_;
  }
  const Digest fp = run_fingerprint(suite_.model, suite_.pretrain,
                                    suite_.pretrain_task.canonical() + suite_.generator.canonical(),
                                    dtype_of<T>(), "pretrain:init=" + std::to_string(suite_.init_seed));
  const fs::path dir = out_ / "pretrain";
  const fs::path theta0_path = dir / "theta0.ltck";
  const fs::path reinit_path = dir / "reinit.ltck";
  auto p = std::make_unique<Pretrained<T>>();
  if (header_fingerprint(theta0_path) == fp && header_fingerprint(reinit_path) == fp) {
    p->theta0 = load_checkpoint<T>(theta0_path, suite_.model, fp).state.model;
    p->reinit = load_checkpoint<T>(reinit_path, suite_.model, fp).state.model;
    if (fs::exists(dir / "trace.json")) {
      p->mlm_accuracy = json::parse(read_file(dir / "trace.json")).value("mlm_accuracy", 0.0);
    }
  } else {
    *p = pretrain<T>(suite_, family_);
    fs::create_directories(dir);
    save_checkpoint(theta0_path, weights_checkpoint(p->theta0, suite_.pretrain.steps, fp));
    save_checkpoint(reinit_path, weights_checkpoint(p->reinit, 0, fp));
    json trace;
    trace["fingerprint"] = to_hex(fp);
    trace["loss"] = json::array();
    for (const auto& point : p->trace.loss) {
      if (point.step % 50 == 0 || point.step + 1 == suite_.pretrain.steps) {
        trace["loss"].push_back({point.step, point.value});
      }
    }
    trace["mlm_accuracy"] = p->mlm_accuracy;
    write_file_atomic(dir / "trace.json", trace.dump(1));
  }
  pretrained_ = std::move(p);
  return *pretrained_;
}

template <typename T>
TrainConfig Lab<T>::finetune_config(std::uint64_t seed) const {
  TrainConfig c = suite_.finetune;
  c.seed = seed;
  return c;
}

template <typename T>
Model<T> Lab<T>::with_head(const Model<T>& backbone, const std::string& task_id, std::uint64_t seed) const {
  return attach_head(strip_head(backbone), task(task_id).head, head_seed(seed, task_id));
}

template <typename T>
std::string Lab<T>::imp_dir_name(const std::string& task_id, const std::string& key) const {
  return file_safe(task_id) + "-" + key.substr(0, 12);
}

template <typename T>
std::string Lab<T>::imp_key(const std::string& task_id, const ImpSpec& spec, const Task* data,
                            const std::string& label) const {
  const Task& t = data != nullptr ? *data : task(task_id);
  return hex_digest(suite_fp_ + "|imp|" + task_id + "|" + label + "|" + t.fingerprint_text + "|" +
                    spec.canonical() + finetune_config(spec.seed).canonical());
}

template <typename T>
std::shared_ptr<const ImpResult<T>> Lab<T>::imp(const std::string& task_id, const ImpSpec& spec,
                                                const Task* data, const std::string& label,
                                                const TrainState<T>* rewind) {
  const Task& t = data != nullptr ? *data : task(task_id);
  const TrainConfig cfg = finetune_config(spec.seed);
  const std::string key = imp_key(task_id, spec, data, label);
  std::promise<std::shared_ptr<const ImpResult<T>>> promise;
  std::shared_future<std::shared_ptr<const ImpResult<T>>> pending;
  {
    std::lock_guard lock(mutex_);
    if (auto it = imp_cache_.find(key); it != imp_cache_.end()) {
      pending = it->second;
    } else {
      imp_cache_.emplace(key, promise.get_future().share());
    }
  }
  if (pending.valid()) {
    return pending.get();
  }
  try {
    const fs::path dir = out_ / "imp" / imp_dir_name(task_id + (label.empty() ? "" : "-" + label), key);
    const fs::path done = dir / "done.json";
    const Digest fp = sha256(key);
    auto result = std::make_shared<ImpResult<T>>();
    bool loaded = false;
    if (fs::exists(done)) {
      const json j = json::parse(read_file(done));
      if (j.value("key", "") == key) {
        for (const auto& r : j.at("rounds")) {
          const std::size_t k = r.at("round").get<std::size_t>();
          result->rounds.push_back(
              {k, load_mask(dir / ("round-" + std::to_string(k) + ".ltmk")), r.at("trimmed").get<bool>()});
        }
        for (const auto& s : j.at("snapshots")) {
          const double q = s.get<double>();
          result->snapshots.emplace_back(q, load_mask(dir / ("snap-" + sparsity_tag(q) + ".ltmk")));
        }
        const ModelConfig& mc = suite_.model;
        result->rewind = load_checkpoint<T>(dir / "rewind.ltck", mc, fp).state;
        result->final_weights = load_checkpoint<T>(dir / "final.ltck", mc, fp).state.model;
        loaded = true;
      }
    }
    if (!loaded) {
      if (rewind != nullptr) {
        *result = imp_from(*rewind, t, cfg, spec);
      } else {
        *result = lottery::imp(with_head(pretrained().theta0, task_id, spec.seed), t, cfg, spec);
      }
      fs::create_directories(dir);
      auto label_mask = [&](Mask& m) {
        m.meta.source_task = task_id;
        m.meta.method = spec.standard ? "standard" : "imp";
        m.meta.producer = spec.standard ? "experiments.standard_prune" : "experiments.imp";
        m.meta.spec_hash = key;
      };
      json j;
      j["key"] = key;
      j["task"] = task_id;
      j["label"] = label;
      j["spec"] = spec.canonical();
      j["rounds"] = json::array();
      for (auto& r : result->rounds) {
        label_mask(r.mask);
        save_mask(dir / ("round-" + std::to_string(r.round) + ".ltmk"), r.mask);
        j["rounds"].push_back({{"round", r.round}, {"trimmed", r.trimmed}, {"sparsity", r.mask.sparsity()}});
      }
      j["snapshots"] = json::array();
      for (auto& [q, m] : result->snapshots) {
        label_mask(m);
        save_mask(dir / ("snap-" + sparsity_tag(q) + ".ltmk"), m);
        j["snapshots"].push_back(q);
      }
      save_checkpoint(dir / "rewind.ltck", Checkpoint<T>{fp, result->rewind});
      save_checkpoint(dir / "final.ltck", weights_checkpoint(result->final_weights, cfg.steps, fp));
      write_file_atomic(done, j.dump(1));
    }
    std::shared_ptr<const ImpResult<T>> shared = result;
    promise.set_value(shared);
    return shared;
  } catch (...) {
    promise.set_exception(std::current_exception());
    std::lock_guard lock(mutex_);
    imp_cache_.erase(key);
    throw;
  }
}

template <typename T>
std::map<std::size_t, TrainState<T>> Lab<T>::dense_checkpoints(const std::string& task_id, std::uint64_t seed,
                                                               const std::vector<std::size_t>& steps) {
  const TrainConfig cfg = finetune_config(seed);
  const Task& t = task(task_id);
  const Digest fp = run_fingerprint(suite_.model, cfg, t.fingerprint_text, dtype_of<T>(), "dense:" + suite_fp_);
  const fs::path dir = out_ / "dense" / (file_safe(task_id) + "-seed" + std::to_string(seed) + "-" +
                                         to_hex(fp).substr(0, 12));
  auto path_of = [&](std::size_t step) { return dir / ("step-" + std::to_string(step) + ".ltck"); };
  std::map<std::size_t, TrainState<T>> out;
  bool complete = true;
  for (std::size_t s : steps) {
    if (s > cfg.steps) {
      throw ArgumentError("checkpoint step " + std::to_string(s) + " exceeds t");
    }
    complete = complete && header_fingerprint(path_of(s)) == fp;
  }
  if (!complete) {
    TrainState<T> state = TrainState<T>::start(with_head(pretrained().theta0, task_id, seed), cfg);
    TrainOptions<T> opts;
    opts.checkpoint_steps = steps;
    fs::create_directories(dir);
    opts.on_checkpoint = [&](const TrainState<T>& s) { save_checkpoint(path_of(s.step), Checkpoint<T>{fp, s}); };
    train(state, nullptr, t, cfg, opts);
    if (cfg.steps == 0) {
      for (std::size_t s : steps) {
        save_checkpoint(path_of(s), Checkpoint<T>{fp, state});
      }
    }
  }
  for (std::size_t s : steps) {
    if (!fs::exists(path_of(s))) {
      throw StateError("missing dense checkpoint at step " + std::to_string(s) + " for '" + task_id + "'");
    }
    out.emplace(s, load_checkpoint<T>(path_of(s), suite_.model, fp).state);
  }
  return out;
}

template <typename T>
std::string Lab<T>::mask_artifact_path(const std::string& name) {
  return (fs::path("masks") / (file_safe(name) + ".ltmk")).string();
}

template <typename T>
std::string Lab<T>::save_mask_artifact(const std::string& name, const Mask& mask) {
  const std::string rel = mask_artifact_path(name);
  fs::create_directories((out_ / rel).parent_path());
  save_mask(out_ / rel, mask);
  return rel;
}

template <typename T>
RunRecord Lab<T>::run_cell(Cell cell) {
  RunRecord r = std::move(cell.record);
  r.fingerprint = hex_digest(suite_fp_ + "|" + cell.key);
  if (auto done = log_.find(r.id, r.fingerprint)) {
    return *done;
  }
  const auto t0 = std::chrono::steady_clock::now();
  const EvalResult eval = cell.run();
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.value = eval.value;
  r.undefined = eval.undefined;
  r.params["suite"] = suite_fp_;
  r.params["key"] = cell.key;
  const fs::path rel = fs::path("predictions") / (file_safe(r.id) + ".tsv");
  std::string text = "prediction\treference\n";
  char buf[64];
  for (std::size_t i = 0; i < eval.predictions.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g\t%.17g\n", eval.predictions[i], eval.references[i]);
    text += buf;
  }
  fs::create_directories((out_ / rel).parent_path());
  write_file_atomic(out_ / rel, text);
  r.artifacts["predictions"] = rel.string();
  log_.append(r);
  return r;
}

template <typename T>
std::vector<RunRecord> Lab<T>::run_cells(std::vector<Cell> cells) {
  std::vector<RunRecord> out(cells.size());
  parallel_for(cells.size(), workers_, [&](std::size_t i) { out[i] = run_cell(std::move(cells[i])); });
  return out;
}

template class Lab<float>;
template class Lab<double>;

}  // namespace lottery
