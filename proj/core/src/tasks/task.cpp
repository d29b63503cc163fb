#include "lottery/tasks/task.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lottery/errors.hpp"
#include "lottery/io/binary.hpp"

namespace lottery {

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::mlm:
      return "mlm";
    case TaskKind::single_class:
      return "single-class";
    case TaskKind::pair_class:
      return "pair-class";
    case TaskKind::regression:
      return "regression";
  }
  return "unknown";
}

std::string to_string(TaskRule rule) {
  switch (rule) {
    case TaskRule::mlm:
      return "mlm";
    case TaskRule::dominant_state:
      return "dominant-state";
    case TaskRule::same_chain:
      return "same-chain";
    case TaskRule::state_fraction:
      return "state-fraction";
  }
  return "unknown";
}

TaskRule parse_rule(const std::string& text) {
  for (TaskRule r : {TaskRule::mlm, TaskRule::dominant_state, TaskRule::same_chain,
                     TaskRule::state_fraction}) {
    if (to_string(r) == text) {
      return r;
    }
  }
  throw ArgumentError("unknown task rule '" + text + "'");
}

TaskKind kind_of(TaskRule rule) {
  switch (rule) {
    case TaskRule::mlm:
      return TaskKind::mlm;
    case TaskRule::dominant_state:
      return TaskKind::single_class;
    case TaskRule::same_chain:
      return TaskKind::pair_class;
    case TaskRule::state_fraction:
      return TaskKind::regression;
  }
  return TaskKind::mlm;
}

MetricId default_metric(TaskRule rule) {
  switch (rule) {
    case TaskRule::mlm:
      return MetricId::masked_accuracy;
    case TaskRule::dominant_state:
    case TaskRule::same_chain:
      return MetricId::accuracy;
    case TaskRule::state_fraction:
      return MetricId::pearson;
  }
  return MetricId::accuracy;
}

std::string TaskSpec::canonical() const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", mask_rate);
  return "task{id=" + id + ",rule=" + to_string(rule) + ",train=" + std::to_string(train_size) +
         ",eval=" + std::to_string(eval_size) + ",seq=" + std::to_string(max_seq_len) +
         ",metric=" + to_string(metric.value_or(default_metric(rule))) +
         ",state=" + std::to_string(designated_state) + ",rate=" + buf +
         ",seed=" + std::to_string(seed) + "}";
}

namespace {

bool compatible_metric(TaskKind kind, std::size_t classes, MetricId metric) {
  switch (kind) {
    case TaskKind::mlm:
      return metric == MetricId::masked_accuracy;
    case TaskKind::single_class:
    case TaskKind::pair_class:
      return metric == MetricId::accuracy || metric == MetricId::mcc ||
             (metric == MetricId::f1 && classes == 2);
    case TaskKind::regression:
      return metric == MetricId::pearson || metric == MetricId::spearman;
  }
  return false;
}

Example single(const GeneratedSequence& s, std::size_t max_seq_len, std::size_t* kept) {
  const std::size_t n = std::min(s.tokens.size(), max_seq_len - 1);
  Example e;
  e.tokens.reserve(n + 1);
  e.tokens.push_back(kCls);
  e.tokens.insert(e.tokens.end(), s.tokens.begin(), s.tokens.begin() + static_cast<std::ptrdiff_t>(n));
  *kept = n;
  return e;
}

// Most frequent hidden state among the first n positions; ties go to the smaller id.
std::size_t dominant_state(const GeneratedSequence& s, std::size_t n, std::size_t k) {
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    ++counts[s.states[i]];
  }
  return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

void derive_single(const Corpus& pool, const TaskSpec& spec, Task& task) {
  const std::size_t k = pool.spec.states;
  if (spec.rule == TaskRule::dominant_state && k < 2) {
    throw DegeneracyError("dominant-state needs at least 2 hidden states; K=1 yields a single class");
  }
  if (spec.rule == TaskRule::state_fraction && spec.designated_state >= k) {
    throw ArgumentError("designated state " + std::to_string(spec.designated_state) +
                        " outside K=" + std::to_string(k));
  }
  const std::size_t need[2] = {spec.train_size, spec.eval_size};
  std::vector<Example>* dest[2] = {&task.train, &task.eval};
  std::size_t split = 0;
  std::vector<std::size_t> per_class(k, 0);
  for (const auto& s : pool.sequences) {
    if (split == 2) {
      break;
    }
    std::size_t kept = 0;
    Example e = single(s, spec.max_seq_len, &kept);
    if (spec.rule == TaskRule::mlm) {
      dest[split]->push_back(std::move(e));
    } else if (spec.rule == TaskRule::state_fraction) {
      std::size_t hits = 0;
      for (std::size_t i = 0; i < kept; ++i) {
        hits += s.states[i] == spec.designated_state ? 1 : 0;
      }
      e.label = static_cast<double>(hits) / static_cast<double>(kept);
      dest[split]->push_back(std::move(e));
    } else {
      const std::size_t label = dominant_state(s, kept, k);
      // Each class gets floor(n/K) slots, the first n mod K one more; surplus draws are rejected.
      const std::size_t quota = need[split] / k + (label < need[split] % k ? 1 : 0);
      if (per_class[label] >= quota) {
        continue;
      }
      ++per_class[label];
      e.label = static_cast<double>(label);
      dest[split]->push_back(std::move(e));
    }
    if (dest[split]->size() == need[split]) {
      ++split;
      std::fill(per_class.begin(), per_class.end(), 0);
    }
  }
  if (split < 2) {
    throw DataError("pool of " + std::to_string(pool.sequences.size()) +
                    " sequences is too small for task '" + spec.id + "'");
  }
}

void derive_pairs(const Corpus& pool, const TaskSpec& spec, Task& task) {
  if (pool.spec.chains < 2) {
    throw DegeneracyError("same-chain pairs need at least 2 chains; one chain makes every label positive");
  }
  const std::size_t total = spec.train_size + spec.eval_size;
  if (pool.sequences.size() < total) {
    throw DataError("pool of " + std::to_string(pool.sequences.size()) +
                    " sequences is too small for task '" + spec.id + "'");
  }
  const std::size_t half = (spec.max_seq_len - 2) / 2;
  if (half == 0) {
    throw ConfigError("max_seq_len too short for pair inputs");
  }
  Rng rng = Rng::substream(spec.seed, "pairs:" + spec.id);
  // The train split pairs within pool[0, train), eval within pool[train, total).
  const std::size_t bounds[3] = {0, spec.train_size, total};
  for (int split = 0; split < 2; ++split) {
    const std::size_t lo = bounds[split];
    const std::size_t hi = bounds[split + 1];
    std::vector<std::vector<std::size_t>> by_chain(pool.spec.chains);
    for (std::size_t i = lo; i < hi; ++i) {
      by_chain[pool.sequences[i].chain].push_back(i);
    }
    std::vector<Example>& dest = split == 0 ? task.train : task.eval;
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& a = pool.sequences[i];
      const bool same = ((i - lo) % 2) == 0;
      std::vector<std::size_t> candidates;
      for (std::size_t c = 0; c < by_chain.size(); ++c) {
        if ((c == a.chain) != same) {
          continue;
        }
        for (std::size_t j : by_chain[c]) {
          if (j != i) {
            candidates.push_back(j);
          }
        }
      }
      if (candidates.empty()) {
        throw DataError("no partner sequence available for pair " + std::to_string(i));
      }
      const auto& b = pool.sequences[candidates[rng.below(candidates.size())]];
      Example e;
      e.tokens.push_back(kCls);
      const std::size_t na = std::min(a.tokens.size(), half);
      const std::size_t nb = std::min(b.tokens.size(), half);
      e.tokens.insert(e.tokens.end(), a.tokens.begin(), a.tokens.begin() + static_cast<std::ptrdiff_t>(na));
      e.tokens.push_back(kSep);
      e.tokens.insert(e.tokens.end(), b.tokens.begin(), b.tokens.begin() + static_cast<std::ptrdiff_t>(nb));
      e.label = same ? 1.0 : 0.0;
      dest.push_back(std::move(e));
    }
  }
}

}  // namespace

Task derive_task(const Corpus& pool, const TaskSpec& spec) {
  if (spec.train_size == 0 || spec.eval_size < 2) {
    throw ArgumentError("task '" + spec.id + "' needs a non-empty train split and at least 2 eval examples");
  }
  if (spec.max_seq_len < 2) {
    throw ArgumentError("max_seq_len must be at least 2");
  }
  if (!(spec.mask_rate > 0.0 && spec.mask_rate < 1.0)) {
    throw ArgumentError("mask_rate must lie in (0, 1)");
  }
  Task task;
  task.id = spec.id;
  task.rule = spec.rule;
  task.kind = kind_of(spec.rule);
  task.metric = spec.metric.value_or(default_metric(spec.rule));
  switch (task.kind) {
    case TaskKind::mlm:
      task.head = HeadSpec::mlm();
      break;
    case TaskKind::single_class:
      task.head = HeadSpec::classifier(pool.spec.states);
      break;
    case TaskKind::pair_class:
      task.head = HeadSpec::classifier(2);
      break;
    case TaskKind::regression:
      task.head = HeadSpec::regressor();
      break;
  }
  if (!compatible_metric(task.kind, task.head.classes, task.metric)) {
    throw ArgumentError("metric " + to_string(task.metric) + " does not fit a " +
                        to_string(task.kind) + " task with " + std::to_string(task.head.classes) +
                        " classes");
  }
  task.vocab_size = pool.spec.vocab;
  task.max_seq_len = spec.max_seq_len;
  task.mask_rate = spec.mask_rate;
  task.eval_seed = derive_seed(spec.seed, "mlm-eval:" + spec.id);
  task.fingerprint_text = spec.canonical() + pool.spec.canonical();
  if (spec.rule == TaskRule::same_chain) {
    derive_pairs(pool, spec, task);
  } else {
    derive_single(pool, spec, task);
  }
  return task;
}

Task make_task(const HmmFamily& family, const TaskSpec& spec) {
  std::size_t pool = spec.train_size + spec.eval_size;
  for (int attempt = 0; attempt < 6; ++attempt) {
    const Corpus corpus =
        gen_corpus(family, pool, "task:" + spec.id + ":" + std::to_string(spec.seed) + ":" +
                                     std::to_string(attempt));
    try {
      return derive_task(corpus, spec);
    } catch (const DataError&) {
      pool *= 2;
    }
  }
  throw DataError("could not draw a balanced split for task '" + spec.id + "'");
}

Task subsample(const Task& task, std::size_t n, std::uint64_t seed) {
  if (n > task.train.size()) {
    throw ArgumentError("cannot subsample " + std::to_string(n) + " of " +
                        std::to_string(task.train.size()) + " training examples");
  }
  if (n == 0) {
    throw ArgumentError("subsample size must be at least 1");
  }
  Rng rng = Rng::substream(seed, "subsample:" + task.id);
  std::vector<std::size_t> picks = rng.choice(task.train.size(), n);
  std::sort(picks.begin(), picks.end());
  Task out = task;
  out.train.clear();
  for (std::size_t i : picks) {
    out.train.push_back(task.train[i]);
  }
  out.fingerprint_text += "subsample{n=" + std::to_string(n) + ",seed=" + std::to_string(seed) + "}";
  return out;
}

MlmExample mask_sequence(const std::vector<std::uint32_t>& tokens, double rate, Rng& rng) {
  MlmExample ex;
  ex.input = tokens;
  std::vector<std::size_t> maskable;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!is_special(tokens[i])) {
      maskable.push_back(i);
    }
  }
  if (maskable.empty()) {
    return ex;
  }
  const auto count = static_cast<std::size_t>(std::round(rate * static_cast<double>(maskable.size())));
  std::vector<std::size_t> picks = rng.choice(maskable.size(), count);
  std::sort(picks.begin(), picks.end());
  for (std::size_t p : picks) {
    const std::size_t pos = maskable[p];
    ex.positions.push_back(pos);
    ex.targets.push_back(tokens[pos]);
    ex.input[pos] = kMask;
  }
  return ex;
}

MlmMasking make_mlm_batches(std::span<const std::vector<std::uint32_t>> sequences, double rate,
                            Rng& rng) {
  if (!(rate > 0.0 && rate < 1.0)) {
    throw ArgumentError("mask_rate must lie in (0, 1)");
  }
  MlmMasking out;
  for (const auto& s : sequences) {
    MlmExample ex = mask_sequence(s, rate, rng);
    if (ex.positions.empty()) {
      ++out.skipped;
      continue;
    }
    out.examples.push_back(std::move(ex));
  }
  return out;
}

std::string encode_dataset(const Task& task) {
  std::string out;
  char label[64];
  auto emit = [&](const char* split, const std::vector<Example>& examples) {
    for (const auto& e : examples) {
      std::snprintf(label, sizeof(label), "%.17g", e.label);
      out += split;
      out += '\t';
      out += label;
      out += '\t';
      for (std::size_t i = 0; i < e.tokens.size(); ++i) {
        if (i > 0) {
          out += ' ';
        }
        out += std::to_string(e.tokens[i]);
      }
      out += '\n';
    }
  };
  emit("train", task.train);
  emit("eval", task.eval);
  return out;
}

void save_dataset(const std::filesystem::path& path, const Task& task) {
  io::write_file_atomic(path, encode_dataset(task));
}

void load_dataset(const std::filesystem::path& path, Task& task) {
  std::ifstream in(path);
  if (!in) {
    throw IngestionError("cannot read dataset '" + path.string() + "'");
  }
  task.train.clear();
  task.eval.clear();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw IngestionError(path.string() + ":" + std::to_string(lineno) + ": expected 3 tab-separated fields");
    }
    const std::string split = line.substr(0, t1);
    Example e;
    try {
      e.label = std::stod(line.substr(t1 + 1, t2 - t1 - 1));
    } catch (const std::exception&) {
      throw IngestionError(path.string() + ":" + std::to_string(lineno) + ": bad label");
    }
    std::istringstream ids(line.substr(t2 + 1));
    unsigned long id = 0;
    while (ids >> id) {
      e.tokens.push_back(static_cast<std::uint32_t>(id));
    }
    if (split == "train") {
      task.train.push_back(std::move(e));
    } else if (split == "eval") {
      task.eval.push_back(std::move(e));
    } else {
      throw IngestionError(path.string() + ":" + std::to_string(lineno) + ": unknown split '" + split + "'");
    }
  }
}

}  // namespace lottery
