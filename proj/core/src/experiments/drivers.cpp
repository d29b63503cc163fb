#include "lottery/experiments/drivers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "lottery/errors.hpp"
#include "lottery/experiments/multitask.hpp"
#include "lottery/io/binary.hpp"

namespace lottery {

namespace {

std::string fmt(double s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", s);
  return buf;
}

std::string cell_id(const std::string& experiment, const std::string& variant, const std::string& mask_task,
                    const std::string& target, double sparsity, std::uint64_t seed, const std::string& extra = "") {
  std::string id = experiment + "/" + variant + "/";
  if (!mask_task.empty()) {
    id += mask_task + "->";
  }
  id += target + "/s" + fmt(sparsity) + "/seed" + std::to_string(seed);
  if (!extra.empty()) {
    id += "/" + extra;
  }
  return id;
}

template <typename T>
RunRecord skeleton(const Lab<T>& lab, const std::string& experiment, const std::string& variant,
                   const std::string& mask_task, const std::string& mask_method, WeightSource weights,
                   const std::string& target, double sparsity, std::uint64_t seed, std::size_t rewind_step = 0,
                   const std::string& extra = "") {
  RunRecord r;
  r.id = cell_id(experiment, variant, mask_task, target, sparsity, seed, extra);
  r.experiment = experiment;
  r.variant = variant;
  r.mask_task = mask_task;
  r.mask_method = mask_method;
  r.weights = weights;
  r.target = target;
  r.sparsity = sparsity;
  r.seed = seed;
  r.rewind_step = rewind_step;
  r.metric = lab.task(target).metric;
  return r;
}

template <typename T>
std::string train_key(const Lab<T>& lab, const std::string& target, std::uint64_t seed) {
  return lab.task(target).fingerprint_text + "|" + lab.finetune_config(seed).canonical();
}

// Trains `backbone` (any head is replaced by the seed's head for `target`)
// under `mask` on the target and evaluates it. The mask is written next to
// the record so its provenance stays inspectable.
template <typename T>
Cell finetune_cell(Lab<T>& lab, RunRecord record, std::string key, Model<T> backbone, Mask mask) {
  Cell c;
  c.key = std::move(key) + "|" + train_key(lab, record.target, record.seed);
  const std::string target = record.target;
  const std::uint64_t seed = record.seed;
  const std::string id = record.id;
  c.record = std::move(record);
  c.record.artifacts["mask"] = Lab<T>::mask_artifact_path(id);
  Lab<T>* lp = &lab;
  c.run = [lp, target, seed, id, backbone = std::move(backbone), mask = std::move(mask)]() {
    lp->save_mask_artifact(id, mask);
    const Model<T> start = lp->with_head(backbone, target, seed);
    return finetune(start, &mask, lp->task(target), lp->finetune_config(seed)).eval;
  };
  return c;
}

Mask labeled(Mask m, const std::string& source, const std::string& method, const std::string& producer,
             const std::string& hash) {
  m.meta.source_task = source;
  m.meta.method = method;
  m.meta.producer = producer;
  m.meta.spec_hash = hash;
  return m;
}

void check_seeds(const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) {
    throw ArgumentError("at least one seed is required");
  }
  std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
  if (unique.size() != seeds.size()) {
    throw ArgumentError("seeds must be distinct");
  }
}

void check_sparsity(double s) {
  if (!(s >= 0.0 && s < 1.0)) {
    throw ArgumentError("sparsity must lie in [0, 1)");
  }
}

template <typename T>
Mask dense_mask(const Lab<T>& lab) {
  return labeled(Mask::dense(prunable_layout(lab.suite().model)), "", "dense", "experiments.dense", "dense");
}

struct ImpJob {
  std::string task;
  ImpSpec spec;
};

template <typename T>
std::vector<std::shared_ptr<const ImpResult<T>>> run_imp_stage(Lab<T>& lab, const std::vector<ImpJob>& jobs) {
  std::vector<std::shared_ptr<const ImpResult<T>>> out(jobs.size());
  parallel_for(jobs.size(), lab.workers(),
               [&](std::size_t i) { out[i] = lab.imp(jobs[i].task, jobs[i].spec); });
  return out;
}

template <typename T>
std::vector<RunRecord> run(Lab<T>& lab, std::vector<Cell> cells) {
  return lab.run_cells(std::move(cells));
}

double max_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

}  // namespace

std::string multitask_label(const std::vector<std::string>& tasks) {
  std::string out = "multitask:";
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    out += (i ? "+" : "") + tasks[i];
  }
  return out;
}

// Dense full-model cell shared by every driver that needs the baseline.
template <typename T>
static Cell full_cell(Lab<T>& lab, const std::string& experiment, const std::string& task, std::uint64_t seed) {
  RunRecord r = skeleton(lab, experiment, "full", "", "dense", WeightSource::theta0, task, 0.0, seed);
  return finetune_cell(lab, std::move(r), "full", lab.pretrained().theta0, dense_mask(lab));
}

template <typename T>
std::vector<RunRecord> claim_suite(Lab<T>& lab, const ClaimsSpec& spec) {
  check_seeds(spec.seeds);
  if (spec.sparsities.empty()) {
    throw ArgumentError("the sparsity grid is empty");
  }
  for (double s : spec.sparsities) {
    check_sparsity(s);
  }
  for (const auto& v : spec.variants) {
    if (std::find(kClaimVariants.begin(), kClaimVariants.end(), v) == kClaimVariants.end()) {
      throw ArgumentError("unknown claims variant '" + v + "'");
    }
  }
  const double top = max_of(spec.sparsities);
  const bool needs_imp = top > 0.0;
  std::vector<ImpJob> jobs;
  if (needs_imp) {
    for (const auto& task : spec.tasks) {
      for (auto seed : spec.seeds) {
        ImpSpec is;
        is.target = top;
        is.snapshots = spec.sparsities;
        is.seed = seed;
        jobs.push_back({task, is});
      }
    }
  }
  const Pretrained<T>& pre = lab.pretrained();
  const auto imps = run_imp_stage(lab, jobs);
  auto wants = [&](const std::string& v) {
    return std::find(spec.variants.begin(), spec.variants.end(), v) != spec.variants.end();
  };
  std::vector<Cell> cells;
  std::size_t job = 0;
  for (const auto& task : spec.tasks) {
    for (auto seed : spec.seeds) {
      const ImpResult<T>* r = needs_imp ? imps[job].get() : nullptr;
      const std::string hash = needs_imp ? lab.imp_key(task, jobs[job].spec) : "";
      ++job;
      if (wants("full")) {
        cells.push_back(full_cell(lab, "claims", task, seed));
      }
      for (double s : spec.sparsities) {
        const Mask m_imp = s == 0.0 ? dense_mask(lab) : r->snapshot(s);
        const std::string ih = "imp:" + hash + ":" + fmt(s);
        if (wants("imp")) {
          // At s = 0 this is the same cell as the full model.
          cells.push_back(finetune_cell(
              lab, skeleton(lab, "claims", "imp", task, s == 0.0 ? "dense" : "imp", WeightSource::theta0, task, s, seed),
              s == 0.0 ? std::string("full") : ih, pre.theta0, m_imp));
        }
        if (wants("random-mask")) {
          const std::uint64_t ms = derive_seed(seed, "random-mask:" + task);
          Mask m = s == 0.0 ? dense_mask(lab)
                            : labeled(random_mask(lab.suite().model, s, ms, spec.scheme, &m_imp), "",
                                      spec.scheme == RandomScheme::global ? "random-global" : "random-layerwise",
                                      "experiments.random_mask", hex_digest("random:" + std::to_string(ms) + fmt(s)));
          const std::string method = m.meta.method;
          const std::string key = s == 0.0 ? std::string("full") : "random:" + m.meta.spec_hash;
          cells.push_back(finetune_cell(
              lab, skeleton(lab, "claims", "random-mask", "", method, WeightSource::theta0, task, s, seed), key,
              pre.theta0, std::move(m)));
        }
        if (wants("random-reinit")) {
          cells.push_back(finetune_cell(lab,
                                        skeleton(lab, "claims", "random-reinit", task, m_imp.meta.method,
                                                 WeightSource::theta0_reinit, task, s, seed),
                                        "reinit|" + ih, pre.reinit, m_imp));
        }
        if (wants("shuffle-reinit")) {
          const std::uint64_t ss = derive_seed(seed, "shuffle-reinit");
          cells.push_back(finetune_cell(lab,
                                        skeleton(lab, "claims", "shuffle-reinit", task, m_imp.meta.method,
                                                 WeightSource::theta0_shuffled, task, s, seed),
                                        "shuffle:" + std::to_string(ss) + "|" + ih,
                                        shuffle_reinit(pre.theta0, ss), m_imp));
        }
      }
    }
  }
  return run(lab, std::move(cells));
}

template <typename T>
std::vector<RunRecord> imp_runs(Lab<T>& lab, const std::string& task, double target,
                                const std::vector<std::uint64_t>& seeds, const std::vector<std::string>& variants,
                                const std::vector<double>& fractions) {
  check_seeds(seeds);
  if (!(target > 0.0 && target < 1.0)) {
    throw ArgumentError("IMP target sparsity must lie in (0, 1)");
  }
  ClaimsSpec cs;
  cs.tasks = {task};
  cs.sparsities = {target};
  cs.seeds = seeds;
  cs.variants = variants;
  if (std::find(cs.variants.begin(), cs.variants.end(), "full") == cs.variants.end()) {
    cs.variants.insert(cs.variants.begin(), "full");
  }
  std::vector<RunRecord> out = claim_suite(lab, cs);
  if (!(fractions.size() == 1 && fractions[0] == 0.0) && !fractions.empty()) {
    for (auto& r : rewind_sweep(lab, task, target, fractions, seeds)) {
      out.push_back(std::move(r));
    }
  }
  return out;
}

template <typename T>
std::vector<RunRecord> standard_prune(Lab<T>& lab, const std::string& task, double target,
                                      const std::vector<std::uint64_t>& seeds, const std::string& experiment) {
  check_seeds(seeds);
  std::vector<ImpJob> jobs;
  for (auto seed : seeds) {
    ImpSpec is;
    is.target = target;
    is.seed = seed;
    is.standard = true;
    jobs.push_back({task, is});
  }
  const auto imps = run_imp_stage(lab, jobs);
  std::vector<Cell> cells;
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    Cell c;
    c.record = skeleton(lab, experiment, "standard", task, "standard", WeightSource::theta_t, task, target,
                        seeds[k], lab.finetune_config(seeds[k]).steps);
    c.key = "standard:" + lab.imp_key(task, jobs[k].spec) + "|" + train_key(lab, task, seeds[k]);
    c.record.artifacts["mask"] = Lab<T>::mask_artifact_path(c.record.id);
    auto result = imps[k];
    Lab<T>* lp = &lab;
    const std::string id = c.record.id;
    c.run = [lp, result, task, id]() {
      lp->save_mask_artifact(id, result->final_mask());
      return evaluate(result->final_weights, &result->final_mask(), lp->task(task));
    };
    cells.push_back(std::move(c));
  }
  return run(lab, std::move(cells));
}

namespace {

std::vector<std::size_t> rewind_steps_for(const TrainConfig& cfg, const std::vector<double>& fractions) {
  std::vector<std::size_t> steps;
  for (double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) {
      throw ArgumentError("rewind fractions must lie in [0, 1]");
    }
    const std::size_t i = rewind_step(cfg, f);
    if (!steps.empty() && i <= steps.back()) {
      throw ArgumentError("rewind fractions must give strictly increasing steps");
    }
    steps.push_back(i);
  }
  return steps;
}

}  // namespace

template <typename T>
std::vector<RunRecord> rewind_sweep(Lab<T>& lab, const std::string& task, double sparsity,
                                    const std::vector<double>& fractions, const std::vector<std::uint64_t>& seeds) {
  check_seeds(seeds);
  if (!(sparsity > 0.0 && sparsity < 1.0)) {
    throw ArgumentError("rewind sweep sparsity must lie in (0, 1)");
  }
  const std::vector<std::size_t> steps = rewind_steps_for(lab.suite().finetune, fractions);
  struct Job {
    std::uint64_t seed;
    double fraction;
    std::size_t step;
    ImpSpec spec;
    std::shared_ptr<const ImpResult<T>> result;
  };
  std::vector<Job> jobs;
  for (auto seed : seeds) {
    for (std::size_t k = 0; k < fractions.size(); ++k) {
      ImpSpec is;
      is.rewind_step = steps[k];
      is.target = sparsity;
      is.seed = seed;
      jobs.push_back({seed, fractions[k], steps[k], is, nullptr});
    }
  }
  lab.pretrained();
  parallel_for(seeds.size(), lab.workers(), [&](std::size_t si) {
    const auto states = lab.dense_checkpoints(task, seeds[si], steps);
    for (auto& j : jobs) {
      if (j.seed == seeds[si]) {
        auto it = states.find(j.step);
        if (it == states.end()) {
          throw StateError("missing checkpoint at step " + std::to_string(j.step));
        }
        j.result = lab.imp(task, j.spec, nullptr, "", &it->second);
      }
    }
  });
  std::vector<Cell> cells;
  for (const auto& j : jobs) {
    const WeightSource w = j.step == 0 ? WeightSource::theta0 : WeightSource::theta_i;
    RunRecord r = skeleton(lab, "rewind-sweep", "rewind", task, "imp", w, task, sparsity, j.seed, j.step,
                           "f" + fmt(j.fraction));
    r.params["rewind_fraction"] = fmt(j.fraction);
    // Full t steps from (m * theta_i, gamma_i); fraction 0 is the winning-ticket cell.
    const std::string key = j.step == 0 ? "imp:" + lab.imp_key(task, j.spec) + ":" + fmt(sparsity)
                                        : "rewind:" + lab.imp_key(task, j.spec);
    Cell c = finetune_cell(lab, std::move(r), key, j.result->rewind.model, j.result->final_mask());
    if (j.step > 0) {
      // The rewound head gamma_i is part of the starting point.
      Lab<T>* lp = &lab;
      auto result = j.result;
      const std::string id = c.record.id;
      const std::uint64_t seed = j.seed;
      c.run = [lp, result, task, id, seed]() {
        lp->save_mask_artifact(id, result->final_mask());
        return finetune(result->rewind.model, &result->final_mask(), lp->task(task), lp->finetune_config(seed))
            .eval;
      };
    }
    cells.push_back(std::move(c));
  }
  std::vector<RunRecord> out = run(lab, std::move(cells));
  for (auto& r : standard_prune(lab, task, sparsity, seeds, "rewind-sweep")) {
    out.push_back(std::move(r));
  }
  return out;
}

template <typename T>
std::vector<RunRecord> transfer_matrix(Lab<T>& lab, const TransferSpec& spec) {
  check_seeds(spec.seeds);
  if (!(spec.sparsity > 0.0 && spec.sparsity < 1.0)) {
    throw ArgumentError("transfer sparsity must lie in (0, 1)");
  }
  if (spec.sources.empty() || spec.targets.empty()) {
    throw ArgumentError("transfer needs at least one source and one target");
  }
  for (const auto& t : spec.targets) {
    lab.task(t);
  }
  std::vector<ImpJob> jobs;
  for (const auto& s : spec.sources) {
    for (auto seed : spec.seeds) {
      ImpSpec is;
      is.target = spec.sparsity;
      is.seed = seed;
      jobs.push_back({s, is});
    }
  }
  const Pretrained<T>& pre = lab.pretrained();
  const auto imps = run_imp_stage(lab, jobs);
  std::vector<Cell> cells;
  for (const auto& t : spec.targets) {
    for (auto seed : spec.seeds) {
      cells.push_back(full_cell(lab, "transfer", t, seed));
    }
  }
  std::size_t job = 0;
  for (const auto& s : spec.sources) {
    for (auto seed : spec.seeds) {
      const Mask& m = imps[job]->final_mask();
      const std::string key = "imp:" + lab.imp_key(s, jobs[job].spec) + ":" + fmt(spec.sparsity);
      ++job;
      for (const auto& t : spec.targets) {
        cells.push_back(finetune_cell(
            lab, skeleton(lab, "transfer", "transfer", s, "imp", WeightSource::theta0, t, spec.sparsity, seed), key,
            pre.theta0, m));
      }
    }
  }
  std::vector<RunRecord> out = run(lab, std::move(cells));
  if (spec.direct_row) {
    for (auto& r : direct_prune_transfer(lab, spec.sparsity, spec.targets, spec.seeds)) {
      out.push_back(std::move(r));
    }
  }
  return out;
}

template <typename T>
std::vector<RunRecord> direct_prune_transfer(Lab<T>& lab, double sparsity, const std::vector<std::string>& targets,
                                             const std::vector<std::uint64_t>& seeds) {
  check_seeds(seeds);
  check_sparsity(sparsity);
  const Pretrained<T>& pre = lab.pretrained();
  const Mask dense = Mask::dense(prunable_layout(lab.suite().model));
  const std::string hash = hex_digest(lab.suite_fingerprint() + "|direct|" + fmt(sparsity));
  const Mask m = labeled(prune_to_sparsity(pre.theta0, dense, sparsity), "", sparsity == 0.0 ? "dense" : "direct",
                         "experiments.direct_prune", hash);
  std::vector<Cell> cells;
  for (const auto& t : targets) {
    for (auto seed : seeds) {
      const std::string key = sparsity == 0.0 ? std::string("full") : "direct:" + hash;
      cells.push_back(finetune_cell(
          lab, skeleton(lab, "transfer", "direct", "", m.meta.method, WeightSource::theta0, t, sparsity, seed), key,
          pre.theta0, m));
    }
  }
  return run(lab, std::move(cells));
}

template <typename T>
std::vector<RunRecord> rewound_source_transfer(Lab<T>& lab, const std::string& source,
                                               const std::vector<double>& fractions,
                                               const std::vector<std::string>& targets, double sparsity,
                                               const std::vector<std::uint64_t>& seeds) {
  check_seeds(seeds);
  const std::vector<std::size_t> steps = rewind_steps_for(lab.suite().finetune, fractions);
  struct Job {
    std::uint64_t seed;
    std::string row;
    double fraction;
    ImpSpec spec;
    std::shared_ptr<const ImpResult<T>> result;
  };
  std::vector<Job> jobs;
  for (auto seed : seeds) {
    for (std::size_t k = 0; k < fractions.size(); ++k) {
      ImpSpec is;
      is.rewind_step = steps[k];
      is.target = sparsity;
      is.seed = seed;
      jobs.push_back({seed, "rewind " + fmt(fractions[k]), fractions[k], is, nullptr});
    }
    ImpSpec st;
    st.target = sparsity;
    st.seed = seed;
    st.standard = true;
    jobs.push_back({seed, "final", 1.0, st, nullptr});
  }
  lab.pretrained();
  parallel_for(seeds.size(), lab.workers(), [&](std::size_t si) {
    const auto states = lab.dense_checkpoints(source, seeds[si], steps);
    for (auto& j : jobs) {
      if (j.seed != seeds[si]) {
        continue;
      }
      if (j.spec.standard) {
        j.result = lab.imp(source, j.spec);
      } else {
        j.result = lab.imp(source, j.spec, nullptr, "", &states.at(j.spec.rewind_step));
      }
    }
  });
  std::vector<Cell> cells;
  for (const auto& j : jobs) {
    const bool standard = j.spec.standard;
    const WeightSource w =
        standard ? WeightSource::theta_t : (j.spec.rewind_step == 0 ? WeightSource::theta0 : WeightSource::theta_i);
    const Model<T>& weights = standard ? j.result->final_weights : j.result->rewind.model;
    for (const auto& t : targets) {
      RunRecord r = skeleton(lab, "rewound-transfer", standard ? "standard" : "rewind", source,
                             standard ? "standard" : "imp", w, t, sparsity, j.seed,
                             standard ? lab.suite().finetune.steps : j.spec.rewind_step,
                             standard ? "final" : "f" + fmt(j.fraction));
      r.params["row"] = standard ? "final" : fmt(j.fraction);
      const std::string key =
          j.spec.rewind_step == 0 && !standard
              ? "imp:" + lab.imp_key(source, j.spec) + ":" + fmt(sparsity)
              : std::string(standard ? "standard-transfer:" : "rewound-transfer:") + lab.imp_key(source, j.spec);
      cells.push_back(finetune_cell(lab, std::move(r), key, weights, j.result->final_mask()));
    }
  }
  return run(lab, std::move(cells));
}

std::map<std::string, double> winning_sparsities(const std::vector<RunRecord>& records,
                                                 const std::string& experiment, Criterion criterion) {
  std::map<std::string, std::vector<double>> full;
  std::map<std::string, std::map<double, std::vector<double>>> sub;
  for (const auto& r : records) {
    if (r.experiment != experiment) {
      continue;
    }
    if (r.variant == "full") {
      full[r.target].push_back(r.value);
    } else if (r.variant == "imp" && r.mask_task == r.target) {
      sub[r.target][r.sparsity].push_back(r.value);
    }
  }
  std::map<std::string, double> out;
  for (const auto& [task, values] : full) {
    double best = 0.0;
    if (values.size() >= (criterion == Criterion::one_stddev ? 2u : 1u)) {
      for (const auto& [s, v] : sub[task]) {
        if (s > best && winning_ticket_check(v, values, criterion).winning) {
          best = s;
        }
      }
    }
    out[task] = best;
  }
  return out;
}

template <typename T>
std::vector<RunRecord> universality_check(Lab<T>& lab, const std::string& mlm_task,
                                          const std::vector<std::string>& targets,
                                          const std::vector<std::uint64_t>& seeds, Criterion criterion) {
  check_seeds(seeds);
  const auto winning = winning_sparsities(lab.log().records(), "claims", criterion);
  std::vector<double> levels;
  for (const auto& t : targets) {
    auto it = winning.find(t);
    if (it == winning.end()) {
      throw StateError("no claims records establish a winning sparsity for '" + t + "'");
    }
    if (it->second > 0.0 && std::find(levels.begin(), levels.end(), it->second) == levels.end()) {
      levels.push_back(it->second);
    }
  }
  std::sort(levels.begin(), levels.end());
  std::vector<ImpJob> jobs;
  if (!levels.empty()) {
    for (auto seed : seeds) {
      ImpSpec is;
      is.target = levels.back();
      is.snapshots = levels;
      is.seed = seed;
      jobs.push_back({mlm_task, is});
    }
  }
  const Pretrained<T>& pre = lab.pretrained();
  const auto imps = run_imp_stage(lab, jobs);
  std::vector<Cell> cells;
  for (const auto& t : targets) {
    const double s = winning.at(t);
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      RunRecord r = skeleton(lab, "universality", "mlm-transfer", s == 0.0 ? "" : mlm_task, s == 0.0 ? "dense" : "imp",
                             WeightSource::theta0, t, s, seeds[k]);
      r.params["criterion"] = to_string(criterion);
      if (s == 0.0) {
        cells.push_back(finetune_cell(lab, std::move(r), "full", pre.theta0, dense_mask(lab)));
      } else {
        const std::string key = "imp:" + lab.imp_key(mlm_task, jobs[k].spec) + ":" + fmt(s);
        cells.push_back(finetune_cell(lab, std::move(r), key, pre.theta0, imps[k]->snapshot(s)));
      }
    }
  }
  return run(lab, std::move(cells));
}

template <typename T>
std::vector<RunRecord> multitask_transfer(Lab<T>& lab, const MultitaskSpec& spec) {
  check_seeds(spec.seeds);
  if (spec.tasks.size() < 2) {
    throw ArgumentError("multi-task IMP needs at least two tasks");
  }
  if (!(spec.sparsity > 0.0 && spec.sparsity < 1.0)) {
    throw ArgumentError("multi-task sparsity must lie in (0, 1)");
  }
  std::vector<const Task*> tasks;
  std::string text;
  for (const auto& id : spec.tasks) {
    tasks.push_back(&lab.task(id));
    text += tasks.back()->fingerprint_text + "|";
  }
  const std::string label = multitask_label(spec.tasks);
  const Pretrained<T>& pre = lab.pretrained();
  std::vector<Mask> masks(spec.seeds.size());
  std::vector<std::string> hashes(spec.seeds.size());
  parallel_for(spec.seeds.size(), lab.workers(), [&](std::size_t k) {
    ImpSpec is;
    is.target = spec.sparsity;
    is.seed = spec.seeds[k];
    const TrainConfig cfg = lab.finetune_config(is.seed);
    hashes[k] = hex_digest(lab.suite_fingerprint() + "|multitask|" + text + is.canonical() + cfg.canonical());
    const auto path = lab.out() / "multitask" / (hashes[k].substr(0, 12) + ".ltmk");
    if (std::filesystem::exists(path)) {
      masks[k] = load_mask(path);
      if (masks[k].meta.spec_hash == hashes[k]) {
        return;
      }
    }
    const MultitaskImpResult r = multitask_imp(pre.theta0, std::span<const Task* const>(tasks), cfg, is);
    masks[k] = labeled(r.final_mask(), label, "imp", "experiments.multitask_imp", hashes[k]);
    std::filesystem::create_directories(path.parent_path());
    save_mask(path, masks[k]);
  });
  std::vector<Cell> cells;
  for (std::size_t k = 0; k < spec.seeds.size(); ++k) {
    for (const auto& t : spec.targets) {
      cells.push_back(finetune_cell(lab,
                                    skeleton(lab, "multitask", "transfer", label, "imp", WeightSource::theta0, t,
                                             spec.sparsity, spec.seeds[k]),
                                    "multitask:" + hashes[k], pre.theta0, masks[k]));
    }
  }
  return run(lab, std::move(cells));
}

template <typename T>
std::vector<RunRecord> dataset_size_study(Lab<T>& lab, const DataSizeSpec& spec) {
  check_seeds(spec.seeds);
  const Task& source = lab.task(spec.source);
  struct Job {
    std::size_t size;
    std::uint64_t seed;
    Task data;
    ImpSpec imp;
    std::string label;
    std::shared_ptr<const ImpResult<T>> result;
  };
  std::vector<Job> jobs;
  for (std::size_t n : spec.sizes) {
    for (auto seed : spec.seeds) {
      ImpSpec is;
      is.target = spec.sparsity;
      is.seed = seed;
      jobs.push_back({n, seed, subsample(source, n, derive_seed(seed, "datasize")), is, "n" + std::to_string(n),
                      nullptr});
    }
  }
  lab.pretrained();
  parallel_for(jobs.size(), lab.workers(), [&](std::size_t k) {
    jobs[k].result = lab.imp(spec.source, jobs[k].imp, &jobs[k].data, jobs[k].label);
  });
  const Pretrained<T>& pre = lab.pretrained();
  std::vector<Cell> cells;
  for (const auto& j : jobs) {
    const std::string key = "imp:" + lab.imp_key(spec.source, j.imp, &j.data, j.label) + ":" + fmt(spec.sparsity);
    for (const auto& t : spec.targets) {
      RunRecord r = skeleton(lab, "datasize", "transfer", spec.source, "imp", WeightSource::theta0, t, spec.sparsity,
                             j.seed, 0, j.label);
      r.params["train_size"] = std::to_string(j.size);
      cells.push_back(finetune_cell(lab, std::move(r), key, pre.theta0, j.result->final_mask()));
    }
  }
  return run(lab, std::move(cells));
}

OverlapMatrix overlap_study(const std::vector<std::pair<std::string, Mask>>& masks) {
  OverlapMatrix m;
  if (masks.empty()) {
    return m;
  }
  const PrunableLayout layout = masks.front().second.layout();
  const std::size_t zeros = masks.front().second.zeros();
  for (const auto& [name, mask] : masks) {
    if (mask.layout() != layout) {
      throw ArgumentError("mask '" + name + "' has a different layout");
    }
    if (mask.zeros() != zeros) {
      throw ArgumentError("mask '" + name + "' has sparsity " + std::to_string(mask.sparsity()) +
                          "; overlap needs masks of equal sparsity");
    }
    m.names.push_back(name);
  }
  const std::size_t n = masks.size();
  m.values.assign(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = overlap(masks[i].second, masks[j].second);
      m.values[i][j] = v;
      m.values[j][i] = v;
    }
  }
  return m;
}

template <typename T>
std::vector<RunRecord> overlap_experiment(Lab<T>& lab, const std::vector<std::string>& tasks, double sparsity,
                                          const std::vector<std::uint64_t>& seeds) {
  check_seeds(seeds);
  if (!(sparsity > 0.0 && sparsity < 1.0)) {
    throw ArgumentError("overlap sparsity must lie in (0, 1)");
  }
  std::vector<ImpJob> jobs;
  for (auto seed : seeds) {
    for (const auto& t : tasks) {
      ImpSpec is;
      is.target = sparsity;
      is.seed = seed;
      jobs.push_back({t, is});
    }
  }
  lab.pretrained();
  const auto imps = run_imp_stage(lab, jobs);
  std::vector<Cell> cells;
  for (std::size_t si = 0; si < seeds.size(); ++si) {
    std::vector<std::pair<std::string, Mask>> masks;
    std::vector<std::string> keys;
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      const std::size_t j = si * tasks.size() + k;
      masks.emplace_back(tasks[k], imps[j]->final_mask());
      keys.push_back(lab.imp_key(tasks[k], jobs[j].spec));
    }
    const OverlapMatrix om = overlap_study(masks);
    for (std::size_t a = 0; a < tasks.size(); ++a) {
      for (std::size_t b = 0; b < tasks.size(); ++b) {
        Cell c;
        c.record = skeleton(lab, "overlap", "overlap", tasks[a], "imp", WeightSource::theta0, tasks[b], sparsity,
                            seeds[si]);
        c.record.metric = MetricId::accuracy;
        c.key = "overlap:" + keys[a] + "|" + keys[b];
        const double v = om.values[a][b];
        c.run = [v]() {
          EvalResult e;
          e.value = v;
          return e;
        };
        cells.push_back(std::move(c));
      }
    }
  }
  return lab.run_cells(std::move(cells));
}

#define LOTTERY_INSTANTIATE_DRIVERS(T)                                                                      \
  template std::vector<RunRecord> claim_suite<T>(Lab<T>&, const ClaimsSpec&);                               \
  template std::vector<RunRecord> imp_runs<T>(Lab<T>&, const std::string&, double,                          \
                                              const std::vector<std::uint64_t>&,                            \
                                              const std::vector<std::string>&, const std::vector<double>&); \
  template std::vector<RunRecord> standard_prune<T>(Lab<T>&, const std::string&, double,                    \
                                                    const std::vector<std::uint64_t>&, const std::string&); \
  template std::vector<RunRecord> rewind_sweep<T>(Lab<T>&, const std::string&, double,                      \
                                                  const std::vector<double>&,                               \
                                                  const std::vector<std::uint64_t>&);                       \
  template std::vector<RunRecord> transfer_matrix<T>(Lab<T>&, const TransferSpec&);                         \
  template std::vector<RunRecord> direct_prune_transfer<T>(Lab<T>&, double, const std::vector<std::string>&, \
                                                           const std::vector<std::uint64_t>&);              \
  template std::vector<RunRecord> rewound_source_transfer<T>(                                               \
      Lab<T>&, const std::string&, const std::vector<double>&, const std::vector<std::string>&, double,     \
      const std::vector<std::uint64_t>&);                                                                   \
  template std::vector<RunRecord> universality_check<T>(Lab<T>&, const std::string&,                        \
                                                        const std::vector<std::string>&,                    \
                                                        const std::vector<std::uint64_t>&, Criterion);      \
  template std::vector<RunRecord> multitask_transfer<T>(Lab<T>&, const MultitaskSpec&);                     \
  template std::vector<RunRecord> dataset_size_study<T>(Lab<T>&, const DataSizeSpec&);                      \
  template std::vector<RunRecord> overlap_experiment<T>(Lab<T>&, const std::vector<std::string>&, double,   \
                                                        const std::vector<std::uint64_t>&);

LOTTERY_INSTANTIATE_DRIVERS(float)
LOTTERY_INSTANTIATE_DRIVERS(double)

}  // namespace lottery
