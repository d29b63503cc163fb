#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "lottery/errors.hpp"
#include "lottery/experiments/drivers.hpp"
#include "lottery/experiments/imp.hpp"
#include "lottery/experiments/lab.hpp"
#include "lottery/experiments/multitask.hpp"
#include "lottery/experiments/records.hpp"
#include "lottery/experiments/stats.hpp"
#include "lottery/io/binary.hpp"
#include "lottery/masking/pruning.hpp"

namespace lottery {
namespace {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- statistics

TEST(WinningCheck, FullWithinOneStddevAndBelowSubnetworkWinsBothWays) {
  // Full BERT on MNLI at 82.4 +- 0.5 against the IMP subnetwork's 82.6.
  Summary full{5, 82.4, 0.5, 82.4, 83.0};
  Summary sub{5, 82.6, 0.2, 82.6, 82.8};
  const Verdict v = winning_verdict(sub, full, Criterion::one_stddev);
  EXPECT_TRUE(v.winning);
  EXPECT_TRUE(v.one_stddev);
  EXPECT_TRUE(v.strict);
  EXPECT_NEAR(v.margin, 0.2, 1e-12);
  EXPECT_TRUE(winning_verdict(sub, full, Criterion::strict).winning);
}

TEST(WinningCheck, ExactlyOneStddevBelowWinsOnlyUnderOneStddev) {
  Summary full{4, 0.75, 0.25, 0.75, 1.0};
  Summary sub{4, 0.5, 0.1, 0.5, 0.6};
  const Verdict loose = winning_verdict(sub, full, Criterion::one_stddev);
  const Verdict strict = winning_verdict(sub, full, Criterion::strict);
  EXPECT_TRUE(loose.winning);
  EXPECT_FALSE(strict.winning);
  EXPECT_TRUE(strict.one_stddev);
  EXPECT_FALSE(strict.strict);
}

TEST(WinningCheck, OneStddevNeedsTwoFullRuns) {
  const std::vector<double> one = {0.5};
  const std::vector<double> two = {0.5, 0.6};
  EXPECT_THROW(winning_ticket_check(two, one, Criterion::one_stddev), ArgumentError);
  EXPECT_NO_THROW(winning_ticket_check(two, one, Criterion::strict));
  EXPECT_THROW(winning_ticket_check({}, two, Criterion::strict), ArgumentError);
}

TEST(WinningCheck, VerdictsMatchRecomputationFromDumpedCsv) {
  Rng rng(17);
  std::string csv = "trial,group,value\n";
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t nf = 2 + rng.below(5);
    const std::size_t ns = 1 + rng.below(5);
    for (std::size_t k = 0; k < nf; ++k) {
      char line[96];
      std::snprintf(line, sizeof line, "%d,full,%.17g\n", trial, 0.6 + 0.05 * rng.normal());
      csv += line;
    }
    for (std::size_t k = 0; k < ns; ++k) {
      char line[96];
      std::snprintf(line, sizeof line, "%d,sub,%.17g\n", trial, 0.58 + 0.05 * rng.normal());
      csv += line;
    }
  }
  std::map<int, std::vector<double>> full, sub;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto a = line.find(','), b = line.find(',', a + 1);
    const int trial = std::stoi(line.substr(0, a));
    (line.substr(a + 1, b - a - 1) == "full" ? full : sub)[trial].push_back(std::stod(line.substr(b + 1)));
  }
  for (const auto& [trial, f] : full) {
    const auto& s = sub[trial];
    auto mean = [](const std::vector<double>& v) {
      double acc = 0.0;
      for (double x : v) acc += x;
      return acc / static_cast<double>(v.size());
    };
    double ss = 0.0;
    for (double x : f) ss += (x - mean(f)) * (x - mean(f));
    const double sd = std::sqrt(ss / static_cast<double>(f.size() - 1));
    for (auto c : {Criterion::one_stddev, Criterion::strict}) {
      const Verdict v = winning_ticket_check(s, f, c);
      EXPECT_NEAR(v.full.mean, mean(f), 1e-12);
      EXPECT_NEAR(v.full.std, sd, 1e-12);
      EXPECT_NEAR(v.sub.mean, mean(s), 1e-12);
      const bool expected = c == Criterion::strict ? mean(s) >= mean(f) : mean(s) >= mean(f) - sd;
      // Verdicts sitting within rounding of the threshold are not informative.
      if (std::abs(mean(s) - (c == Criterion::strict ? mean(f) : mean(f) - sd)) > 1e-12) {
        EXPECT_EQ(v.winning, expected) << "trial " << trial;
      }
    }
  }
}

TEST(Summary, MedianBestAndSampleStd) {
  const std::vector<double> even = {3.0, 1.0, 2.0, 5.0};
  const Summary s = summarize(even);
  EXPECT_EQ(s.n, 4u);
  EXPECT_DOUBLE_EQ(s.mean, 2.75);
  EXPECT_DOUBLE_EQ(s.median, 2.5);
  EXPECT_DOUBLE_EQ(s.best, 5.0);
  EXPECT_NEAR(s.std, std::sqrt((0.0625 + 3.0625 + 0.5625 + 5.0625) / 3.0), 1e-15);
  const std::vector<double> one = {0.4};
  EXPECT_EQ(summarize(one).std, 0.0);
  EXPECT_EQ(summarize(one).median, 0.4);
}

// ---------------------------------------------------------------- records

RunRecord sample_record() {
  RunRecord r;
  r.id = "claims/imp/dominant-state->dominant-state/s0.6000/seed3";
  r.experiment = "claims";
  r.variant = "imp";
  r.mask_task = "dominant-state";
  r.mask_method = "imp";
  r.weights = WeightSource::theta0_reinit;
  r.target = "dominant-state";
  r.sparsity = 0.6;
  r.seed = 3;
  r.rewind_step = 15;
  r.metric = MetricId::mcc;
  r.value = 0.1 + 0.2;
  r.wall_seconds = 1.0 / 3.0;
  r.fingerprint = std::string(64, 'a');
  r.params = {{"suite", "abc"}, {"note", "quote \" and \\ backslash"}};
  r.artifacts = {{"mask", "masks/x.ltmk"}};
  return r;
}

TEST(RunRecord, JsonRoundTripIsExact) {
  const RunRecord r = sample_record();
  const RunRecord back = RunRecord::from_json(r.to_json());
  EXPECT_EQ(back.id, r.id);
  EXPECT_EQ(back.experiment, r.experiment);
  EXPECT_EQ(back.variant, r.variant);
  EXPECT_EQ(back.mask_task, r.mask_task);
  EXPECT_EQ(back.mask_method, r.mask_method);
  EXPECT_EQ(back.weights, r.weights);
  EXPECT_EQ(back.target, r.target);
  EXPECT_EQ(back.sparsity, r.sparsity);
  EXPECT_EQ(back.seed, r.seed);
  EXPECT_EQ(back.rewind_step, r.rewind_step);
  EXPECT_EQ(back.metric, r.metric);
  EXPECT_EQ(std::memcmp(&back.value, &r.value, sizeof(double)), 0);
  EXPECT_EQ(back.wall_seconds, r.wall_seconds);
  EXPECT_EQ(back.fingerprint, r.fingerprint);
  EXPECT_EQ(back.params, r.params);
  EXPECT_EQ(back.artifacts, r.artifacts);
  EXPECT_EQ(back.to_json(), r.to_json());
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("lottery-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(RecordLog, MalformedLineNamesItsOffset) {
  const fs::path dir = fresh_dir("records");
  const std::string good = sample_record().to_json() + "\n";
  io::write_file_atomic(dir / "log.jsonl", good + "{\"id\": 3,\n");
  try {
    read_records(dir / "log.jsonl");
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_EQ(e.offset(), good.size());
  }
}

TEST(RecordLog, AppendedRecordsSurviveReopening) {
  const fs::path dir = fresh_dir("records-reopen");
  RunRecord r = sample_record();
  {
    RecordLog log(dir / "log.jsonl");
    log.append(r);
  }
  RecordLog again(dir / "log.jsonl");
  ASSERT_TRUE(again.find(r.id, r.fingerprint).has_value());
  EXPECT_FALSE(again.find(r.id, std::string(64, 'b')).has_value());
  EXPECT_EQ(again.records().size(), 1u);
}

// ---------------------------------------------------------------- IMP

ModelConfig tiny_config() {
  ModelConfig c;
  c.num_blocks = 1;
  c.hidden = 16;
  c.heads = 2;
  c.vocab = 64;
  c.max_seq_len = 32;
  return c;
}

const HmmFamily& family() {
  static const HmmFamily f = build_family(GeneratorSpec{});
  return f;
}

const Task& task(TaskRule rule) {
  static std::map<TaskRule, Task> cache;
  auto it = cache.find(rule);
  if (it == cache.end()) {
    TaskSpec s;
    s.id = to_string(rule);
    s.rule = rule;
    s.train_size = 64;
    s.eval_size = 64;
    it = cache.emplace(rule, make_task(family(), s)).first;
  }
  return it->second;
}

TrainConfig short_train() {
  TrainConfig t;
  t.lr = 3e-3;
  t.steps = 10;
  t.batch_size = 8;
  t.seed = 5;
  return t;
}

Model<double> start_for(const Task& t, std::uint64_t seed = 5) {
  return attach_head(init_params<double>(tiny_config(), 11), t.head, head_seed(seed, t.id));
}

std::size_t prunable_total() {
  std::size_t n = 0;
  for (const auto& [name, size] : prunable_layout(tiny_config())) {
    n += size;
  }
  return n;
}

bool same_values(const TensorMap<double>& a, const TensorMap<double>& b) {
  for (const auto& [name, t] : a) {
    const auto& u = b.at(name);
    if (t.size() != u.size() || std::memcmp(t.raw(), u.raw(), t.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return a.size() == b.size();
}

const ImpResult<double>& imp60() {
  static const ImpResult<double> r = [] {
    ImpSpec spec;
    spec.target = 0.6;
    spec.seed = 5;
    spec.snapshots = {0.2, 0.45};
    return imp(start_for(task(TaskRule::dominant_state)), task(TaskRule::dominant_state), short_train(), spec);
  }();
  return r;
}

TEST(Imp, RoundSparsitiesFollowTheGeometricSchedule) {
  const auto& r = imp60();
  const double n = static_cast<double>(prunable_total());
  // 0.9^8 = 0.4305 > 0.4 and 0.9^9 < 0.4, so the ninth round is the trimmed one.
  ASSERT_EQ(r.rounds.size(), 9u);
  for (std::size_t k = 1; k <= r.rounds.size(); ++k) {
    const auto& round = r.rounds[k - 1];
    EXPECT_EQ(round.round, k);
    EXPECT_EQ(round.mask.meta.round, static_cast<std::int64_t>(k));
    if (round.trimmed) {
      continue;
    }
    const double expected = 1.0 - std::pow(0.9, static_cast<double>(k));
    EXPECT_NEAR(round.mask.sparsity(), expected, static_cast<double>(k) / n) << "round " << k;
  }
  EXPECT_FALSE(r.rounds[6].trimmed);
  EXPECT_NEAR(r.rounds[6].mask.sparsity(), 0.5217031, 7.0 / n);
  EXPECT_TRUE(r.rounds.back().trimmed);
  EXPECT_EQ(r.final_mask().zeros(), pruned_count_for(0.6, prunable_total()));
}

TEST(Imp, MaskChainIsNested) {
  const auto& r = imp60();
  for (std::size_t a = 0; a < r.rounds.size(); ++a) {
    for (std::size_t b = a; b < r.rounds.size(); ++b) {
      EXPECT_TRUE(is_subset(r.rounds[b].mask, r.rounds[a].mask)) << a << " " << b;
    }
  }
}

TEST(Imp, SnapshotsLandOnExactCountsInsideTheChain) {
  const auto& r = imp60();
  const std::size_t n = prunable_total();
  for (double s : {0.2, 0.45}) {
    const Mask& m = r.snapshot(s);
    EXPECT_EQ(m.zeros(), pruned_count_for(s, n));
    EXPECT_TRUE(is_subset(r.final_mask(), m));
  }
  EXPECT_THROW(r.snapshot(0.3), StateError);
}

TEST(Imp, TargetBelowOneRoundTakesOnePartialRound) {
  ImpSpec spec;
  spec.target = 0.05;
  spec.seed = 5;
  const auto r = imp(start_for(task(TaskRule::same_chain)), task(TaskRule::same_chain), short_train(), spec);
  ASSERT_EQ(r.rounds.size(), 1u);
  EXPECT_TRUE(r.rounds[0].trimmed);
  EXPECT_EQ(r.final_mask().zeros(), pruned_count_for(0.05, prunable_total()));
}

TEST(Imp, EveryRoundStartsFromTheRewindCheckpoint) {
  ImpSpec spec;
  spec.target = 0.3;
  spec.seed = 5;
  spec.rewind_step = 3;
  std::vector<Model<double>> starts;
  std::vector<Mask> masks;
  std::vector<std::size_t> steps;
  const auto r = imp<double>(start_for(task(TaskRule::dominant_state)), task(TaskRule::dominant_state), short_train(),
                             spec, [&](const ImpEvent<double>& e) {
                               starts.push_back(e.state->model);
                               masks.push_back(*e.mask);
                               steps.push_back(e.state->step);
                             });
  ASSERT_EQ(starts.size(), r.rounds.size());
  for (std::size_t k = 0; k < starts.size(); ++k) {
    EXPECT_EQ(steps[k], 3u);
    const Model<double> expected = apply(masks[k], r.rewind.model);
    EXPECT_TRUE(same_values(starts[k].backbone, expected.backbone)) << "round " << k + 1;
    EXPECT_TRUE(same_values(starts[k].head, expected.head)) << "round " << k + 1;
  }
}

TEST(StandardPrune, ContinuesFromTrainedWeightsWithANestedChain) {
  ImpSpec spec;
  spec.target = 0.3;
  spec.seed = 5;
  spec.standard = true;
  std::vector<Model<double>> starts;
  const auto r = imp<double>(start_for(task(TaskRule::dominant_state)), task(TaskRule::dominant_state), short_train(),
                             spec, [&](const ImpEvent<double>& e) { starts.push_back(e.state->model); });
  for (std::size_t k = 1; k < r.rounds.size(); ++k) {
    EXPECT_TRUE(is_subset(r.rounds[k].mask, r.rounds[k - 1].mask));
  }
  ASSERT_GE(starts.size(), 2u);
  for (std::size_t k = 1; k < starts.size(); ++k) {
    EXPECT_FALSE(same_values(starts[k].backbone, apply(r.rounds[k - 1].mask, r.rewind.model).backbone));
  }
  EXPECT_FALSE(same_values(r.final_weights.backbone, r.rewind.model.backbone));
  EXPECT_EQ(r.final_mask().zeros(), pruned_count_for(0.3, prunable_total()));
}

// ---------------------------------------------------------------- multi-task

TEST(Multitask, MixingFrequenciesTrackTrainSizes) {
  const std::vector<std::size_t> sizes = {100, 300, 600};
  const std::size_t steps = 10000;
  const auto draws = mixing_schedule(sizes, steps, 23);
  ASSERT_EQ(draws.size(), steps);
  std::vector<double> counts(3, 0.0);
  for (auto d : draws) {
    ASSERT_LT(d, 3u);
    counts[d] += 1.0;
  }
  for (std::size_t k = 0; k < 3; ++k) {
    const double p = static_cast<double>(sizes[k]) / 1000.0;
    const double sigma = std::sqrt(steps * p * (1.0 - p));
    EXPECT_LE(std::abs(counts[k] - steps * p), 3.0 * sigma) << "task " << k;
  }
  EXPECT_EQ(mixing_schedule(sizes, steps, 23), draws);
}

TEST(Multitask, SingleTaskDegeneratesToImp) {
  const Task& t = task(TaskRule::dominant_state);
  const TrainConfig cfg = short_train();
  ImpSpec spec;
  spec.target = 0.3;
  spec.seed = cfg.seed;
  const Model<double> backbone = init_params<double>(tiny_config(), 11);
  const std::vector<const Task*> tasks = {&t};
  const auto multi = multitask_imp(backbone, std::span<const Task* const>(tasks), cfg, spec);
  const auto single = imp(attach_head(backbone, t.head, head_seed(cfg.seed, t.id)), t, cfg, spec);
  ASSERT_EQ(multi.rounds.size(), single.rounds.size());
  for (std::size_t k = 0; k < multi.rounds.size(); ++k) {
    EXPECT_TRUE(multi.rounds[k].mask == single.rounds[k].mask) << "round " << k + 1;
  }
}

TEST(Multitask, VocabMismatchIsAConfigError) {
  Task other = task(TaskRule::same_chain);
  other.vocab_size = 32;
  const std::vector<const Task*> tasks = {&task(TaskRule::dominant_state), &other};
  ImpSpec spec;
  spec.target = 0.2;
  EXPECT_THROW(multitask_imp(init_params<double>(tiny_config(), 11), std::span<const Task* const>(tasks),
                             short_train(), spec),
               ConfigError);
}

// ---------------------------------------------------------------- overlap

Mask random_pruned(const PrunableLayout& layout, std::size_t zeros, std::uint64_t seed) {
  std::size_t total = 0;
  for (const auto& [n, s] : layout) total += s;
  Rng rng(seed);
  const auto pick = rng.choice(total, zeros);
  std::vector<std::uint8_t> flat(total, 1);
  for (auto i : pick) flat[i] = 0;
  Mask m = Mask::dense(layout);
  std::size_t offset = 0;
  for (const auto& [name, size] : layout) {
    m.set(name, std::vector<std::uint8_t>(flat.begin() + offset, flat.begin() + offset + size));
    offset += size;
  }
  return m;
}

TEST(Overlap, MatrixEqualsSetOracle) {
  const PrunableLayout layout = {{"a.weight", 60000}, {"b.weight", 40000}};
  std::vector<std::pair<std::string, Mask>> masks;
  for (std::uint64_t s = 1; s <= 4; ++s) {
    masks.emplace_back("m" + std::to_string(s), random_pruned(layout, 30000, s));
  }
  const OverlapMatrix m = overlap_study(masks);
  ASSERT_EQ(m.values.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(m.names[i], masks[i].first);
    EXPECT_EQ(m.values[i][i], 1.0);
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_EQ(m.values[i][j], m.values[j][i]);
      std::set<std::pair<std::string, std::size_t>> a, b;
      for (const auto& [name, bits] : masks[i].second.tensors()) {
        for (std::size_t k = 0; k < bits.size(); ++k) {
          if (bits[k] == 0) a.insert({name, k});
        }
      }
      for (const auto& [name, bits] : masks[j].second.tensors()) {
        for (std::size_t k = 0; k < bits.size(); ++k) {
          if (bits[k] == 0) b.insert({name, k});
        }
      }
      std::size_t inter = 0;
      for (const auto& x : a) inter += b.count(x);
      const double expected = static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
      EXPECT_EQ(m.values[i][j], expected) << i << "," << j;
    }
  }
}

TEST(Overlap, RejectsMasksOfDifferentSparsity) {
  const PrunableLayout layout = {{"w", 100}};
  std::vector<std::pair<std::string, Mask>> masks = {{"a", random_pruned(layout, 30, 1)},
                                                      {"b", random_pruned(layout, 31, 2)}};
  EXPECT_THROW(overlap_study(masks), ArgumentError);
  masks[1].second = random_pruned({{"v", 100}}, 30, 2);
  EXPECT_THROW(overlap_study(masks), ArgumentError);
}

// ---------------------------------------------------------------- drivers

SuiteConfig mini_suite() {
  SuiteConfig s = ci_suite();
  s.pretrain.steps = 60;
  s.pretrain_task.train_size = 300;
  s.pretrain_task.eval_size = 60;
  s.finetune.steps = 24;
  for (auto& t : s.tasks) {
    t.train_size = 96;
    t.eval_size = 64;
  }
  return s;
}

class LabTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { dir_ = new fs::path(fresh_dir("lab")); }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
  }
  static Lab<float>& lab() {
    static Lab<float> l(mini_suite(), *dir_, 1);
    return l;
  }
  static const std::vector<RunRecord>& claims() {
    static const std::vector<RunRecord> r =
        claim_suite(lab(), ClaimsSpec{{"dominant-state"}, {0.0, 0.3}, {1, 2}, kClaimVariants, RandomScheme::global});
    return r;
  }
  static const RunRecord& find(const std::vector<RunRecord>& rs, const std::string& variant, double sparsity,
                               std::uint64_t seed, const std::string& mask_task = "") {
    for (const auto& r : rs) {
      if (r.variant == variant && r.sparsity == sparsity && r.seed == seed &&
          (mask_task.empty() || r.mask_task == mask_task)) {
        return r;
      }
    }
    throw StateError("no record " + variant);
  }
  static fs::path* dir_;
};

fs::path* LabTest::dir_ = nullptr;

TEST_F(LabTest, SparsityZeroVariantsShareTheFullCell) {
  for (std::uint64_t seed : {1, 2}) {
    const RunRecord& full = find(claims(), "full", 0.0, seed);
    for (const char* v : {"imp", "random-mask"}) {
      const RunRecord& r = find(claims(), v, 0.0, seed);
      EXPECT_EQ(r.fingerprint, full.fingerprint) << v;
      EXPECT_EQ(r.value, full.value) << v;
    }
  }
}

TEST_F(LabTest, VariantProvenanceIsPopulatedAndDistinct) {
  std::set<std::pair<std::string, std::string>> seen;
  for (const char* v : {"imp", "random-mask", "random-reinit", "shuffle-reinit"}) {
    const RunRecord& r = find(claims(), v, 0.3, 1);
    EXPECT_FALSE(r.mask_method.empty());
    EXPECT_FALSE(r.target.empty());
    EXPECT_FALSE(r.fingerprint.empty());
    EXPECT_EQ(r.params.count("suite"), 1u);
    ASSERT_EQ(r.artifacts.count("mask"), 1u);
    EXPECT_TRUE(fs::exists(lab().out() / r.artifacts.at("mask")));
    seen.insert({r.mask_method, to_string(r.weights)});
  }
  EXPECT_EQ(seen.size(), 4u);
}

TEST_F(LabTest, RerunSkipsCompletedCells) {
  claims();
  const std::string before = io::read_file(lab().log().path());
  const auto again =
      claim_suite(lab(), ClaimsSpec{{"dominant-state"}, {0.0, 0.3}, {1, 2}, kClaimVariants, RandomScheme::global});
  EXPECT_EQ(io::read_file(lab().log().path()), before);
  ASSERT_EQ(again.size(), claims().size());
  for (std::size_t k = 0; k < again.size(); ++k) {
    EXPECT_EQ(again[k].id, claims()[k].id);
    EXPECT_EQ(again[k].value, claims()[k].value);
  }
  // A second lab over the same directory reads the pre-trained backbone back.
  Lab<float> other(mini_suite(), lab().out(), 1);
  const auto reread =
      claim_suite(other, ClaimsSpec{{"dominant-state"}, {0.0, 0.3}, {1, 2}, kClaimVariants, RandomScheme::global});
  EXPECT_EQ(io::read_file(lab().log().path()), before);
  EXPECT_EQ(reread.size(), claims().size());
}

TEST_F(LabTest, RewindFractionZeroIsTheWinningTicketCell) {
  const auto sweep = rewind_sweep(lab(), "dominant-state", 0.3, {0.0, 0.25}, {1, 2});
  std::size_t standard = 0;
  for (const auto& r : sweep) {
    standard += r.variant == "standard";
  }
  EXPECT_EQ(standard, 2u);
  for (std::uint64_t seed : {1, 2}) {
    const RunRecord* f0 = nullptr;
    const RunRecord* f25 = nullptr;
    for (const auto& r : sweep) {
      if (r.variant == "rewind" && r.seed == seed) {
        (r.rewind_step == 0 ? f0 : f25) = &r;
      }
    }
    ASSERT_NE(f0, nullptr);
    ASSERT_NE(f25, nullptr);
    EXPECT_EQ(f0->weights, WeightSource::theta0);
    EXPECT_EQ(f0->value, find(claims(), "imp", 0.3, seed).value);
    EXPECT_EQ(f25->rewind_step, 6u);
    EXPECT_EQ(f25->weights, WeightSource::theta_i);
  }
  // round(0.01 * 24) == round(0.02 * 24) == 0.
  EXPECT_THROW(rewind_sweep(lab(), "dominant-state", 0.3, {0.01, 0.02}, {1}), ArgumentError);
}

TEST_F(LabTest, TransferDiagonalAndDirectRow) {
  const auto records = transfer_matrix(lab(), TransferSpec{{"dominant-state", "mlm"}, {"dominant-state"}, 0.3, {1, 2}, true});
  for (std::uint64_t seed : {1, 2}) {
    const RunRecord& self = find(records, "transfer", 0.3, seed, "dominant-state");
    EXPECT_EQ(self.value, find(claims(), "imp", 0.3, seed).value);
    const RunRecord& direct = find(records, "direct", 0.3, seed);
    const Mask stored = load_mask(lab().out() / direct.artifacts.at("mask"));
    const auto& theta0 = lab().pretrained().theta0;
    const Mask expected = prune_to_sparsity(theta0, Mask::dense(prunable_layout(theta0.config)), 0.3);
    EXPECT_TRUE(stored == expected);
    EXPECT_EQ(stored.meta.method, "direct");
  }
}

TEST_F(LabTest, FullSizeSubsampleMatchesTheSourceRow) {
  const auto transfer = transfer_matrix(lab(), TransferSpec{{"dominant-state"}, {"same-chain"}, 0.3, {1}, false});
  const std::size_t n = lab().task("dominant-state").train.size();
  const auto sized = dataset_size_study(lab(), DataSizeSpec{"dominant-state", {n}, {"same-chain"}, 0.3, {1}});
  ASSERT_EQ(sized.size(), 1u);
  EXPECT_EQ(sized[0].params.at("train_size"), std::to_string(n));
  EXPECT_EQ(sized[0].value, find(transfer, "transfer", 0.3, 1, "dominant-state").value);
}

}  // namespace
}  // namespace lottery
