#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "lottery/errors.hpp"
#include "lottery/tasks/corpus.hpp"
#include "lottery/tasks/metrics.hpp"
#include "lottery/tasks/task.hpp"

namespace lottery {
namespace {

using Values = std::vector<double>;

MetricValue run(MetricValue (*fn)(std::span<const double>, std::span<const double>), const Values& a,
                const Values& b) {
  return fn(std::span<const double>(a), std::span<const double>(b));
}

// Definitional Pearson: sum of centered products over the product of norms.
double oracle_pearson(const Values& x, const Values& y) {
  long double mx = 0;
  long double my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  long double sxy = 0;
  long double sxx = 0;
  long double syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

// Rank by counting: 1 + #smaller + (#equal - 1) / 2.
Values oracle_ranks(const Values& x) {
  Values r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0;
    double equal = 0;
    for (double v : x) {
      less += v < x[i] ? 1 : 0;
      equal += v == x[i] ? 1 : 0;
    }
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

const Values kX = {2.5, -1.0, 3.75, 0.5, 8.0, 4.25, -2.5, 1.0, 6.5, 3.0};
const Values kY = {1.2, 0.4, 2.9, 1.1, 5.5, 2.0, -0.7, 1.1, 4.8, 3.3};

TEST(Metrics, PerfectPredictions) {
  const Values labels = {0, 1, 1, 0, 1, 0, 0, 1};
  EXPECT_DOUBLE_EQ(run(accuracy, labels, labels).value, 1.0);
  EXPECT_DOUBLE_EQ(run(matthews, labels, labels).value, 1.0);
  EXPECT_DOUBLE_EQ(run(f1_binary, labels, labels).value, 1.0);
  EXPECT_DOUBLE_EQ(run(pearson, kX, kX).value, 1.0);
  EXPECT_DOUBLE_EQ(run(spearman, kX, kX).value, 1.0);
}

TEST(Metrics, BalancedConfusionHasZeroMcc) {
  // TP, TN, FP, FN once each.
  const Values pred = {1, 0, 1, 0};
  const Values ref = {1, 0, 0, 1};
  const MetricValue m = run(matthews, pred, ref);
  EXPECT_DOUBLE_EQ(m.value, 0.0);
  EXPECT_FALSE(m.undefined);
  EXPECT_DOUBLE_EQ(run(f1_binary, pred, ref).value, 0.5);
  EXPECT_DOUBLE_EQ(run(accuracy, pred, ref).value, 0.5);
}

TEST(Metrics, MulticlassMccMatchesConfusionFormula) {
  const Values pred = {0, 1, 2, 2, 1, 0, 2, 1, 0, 0};
  const Values ref = {0, 1, 2, 1, 1, 2, 2, 0, 0, 1};
  // c = correct, s = total, p_k / t_k = predicted / true counts per class.
  const double c = 6;
  const double s = 10;
  const double p[3] = {4, 3, 3};
  const double t[3] = {3, 4, 3};
  double pt = 0;
  double pp = 0;
  double tt = 0;
  for (int k = 0; k < 3; ++k) {
    pt += p[k] * t[k];
    pp += p[k] * p[k];
    tt += t[k] * t[k];
  }
  const double expect = (c * s - pt) / std::sqrt((s * s - pp) * (s * s - tt));
  EXPECT_NEAR(run(matthews, pred, ref).value, expect, 1e-15);
}

TEST(Metrics, PearsonAndSpearmanMatchDefinitionalOracle) {
  EXPECT_NEAR(run(pearson, kX, kY).value, oracle_pearson(kX, kY), 1e-12);
  // kY has a tie (1.1 twice), so average ranks matter.
  EXPECT_NEAR(run(spearman, kX, kY).value, oracle_pearson(oracle_ranks(kX), oracle_ranks(kY)), 1e-12);
}

TEST(Metrics, PearsonAffineInvariance) {
  const double base = run(pearson, kX, kY).value;
  Values ax;
  Values ay;
  for (double v : kX) {
    ax.push_back(3.5 * v - 11.0);
  }
  for (double v : kY) {
    ay.push_back(0.25 * v + 7.0);
  }
  EXPECT_NEAR(run(pearson, ax, kY).value, base, 1e-12);
  EXPECT_NEAR(run(pearson, kX, ay).value, base, 1e-12);
  EXPECT_NEAR(run(pearson, ax, ay).value, base, 1e-12);
}

TEST(Metrics, SpearmanMonotoneInvariance) {
  const double base = run(spearman, kX, kY).value;
  Values mx;
  for (double v : kX) {
    mx.push_back(std::exp(v) + v * v * v);
  }
  EXPECT_DOUBLE_EQ(run(spearman, mx, kY).value, base);
}

TEST(Metrics, UndefinedDenominatorsReturnFlaggedZero) {
  const Values flat = {2, 2, 2, 2};
  const Values other = {1, 2, 3, 4};
  MetricValue p = run(pearson, flat, other);
  EXPECT_EQ(p.value, 0.0);
  EXPECT_TRUE(p.undefined);
  const Values ones = {1, 1, 1, 1};
  const Values mixed = {1, 0, 1, 0};
  MetricValue m = run(matthews, ones, mixed);
  EXPECT_EQ(m.value, 0.0);
  EXPECT_TRUE(m.undefined);
  const Values zeros = {0, 0, 0, 0};
  MetricValue f = run(f1_binary, zeros, zeros);
  EXPECT_EQ(f.value, 0.0);
  EXPECT_TRUE(f.undefined);
}

TEST(Metrics, ArgumentErrors) {
  const Values a = {0, 1, 1};
  const Values b = {0, 1};
  const Values one = {1};
  EXPECT_THROW(metric(a, b, MetricId::accuracy), ArgumentError);
  EXPECT_THROW(metric(one, one, MetricId::pearson), ArgumentError);
  EXPECT_THROW(parse_metric("bleu"), ArgumentError);
  EXPECT_EQ(parse_metric(to_string(MetricId::masked_accuracy)), MetricId::masked_accuracy);
}

TEST(Metrics, RangesOnRandomFixtures) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    Values p(12);
    Values r(12);
    Values x(12);
    Values y(12);
    for (std::size_t i = 0; i < 12; ++i) {
      p[i] = static_cast<double>(rng.below(3));
      r[i] = static_cast<double>(rng.below(3));
      x[i] = rng.normal();
      y[i] = std::floor(rng.normal() * 2.0);
    }
    for (double v : {run(matthews, p, r).value, run(pearson, x, y).value, run(spearman, x, y).value}) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
    for (double v : {run(accuracy, p, r).value, run(f1_binary, p, r).value}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Metrics, ShuffledPredictionsFallToChanceOnBalancedLabels) {
  const std::size_t n = 4000;
  Values ref(n);
  for (std::size_t i = 0; i < n; ++i) {
    ref[i] = static_cast<double>(i % 2);
  }
  Values pred = ref;
  Rng rng(17);
  rng.shuffle(std::span<double>(pred));
  const double acc = run(accuracy, pred, ref).value;
  EXPECT_LE(std::abs(acc - 0.5), 3.0 * std::sqrt(0.25 / n));
}

GeneratorSpec tiny_spec() {
  GeneratorSpec s;
  s.states = 3;
  s.vocab = kReserved + 8;
  s.chains = 1;
  s.min_length = 50;
  s.max_length = 50;
  s.transition_concentration = 1.0;
  s.emission_concentration = 1.0;
  s.seed = 11;
  return s;
}

TEST(Corpus, FamilyRowsAreDistributions) {
  const HmmFamily f = build_family(GeneratorSpec{});
  ASSERT_EQ(f.chains.size(), 4u);
  for (const auto& h : f.chains) {
    auto check = [](const std::vector<double>& row) {
      double sum = 0;
      for (double v : row) {
        EXPECT_GE(v, 0.0);
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
    };
    check(h.initial);
    for (const auto& r : h.transition) {
      check(r);
    }
    for (const auto& r : h.emission) {
      check(r);
      EXPECT_EQ(r.size(), 64u - kReserved);
    }
  }
}

TEST(Corpus, SameSeedSameCorpus) {
  const Corpus a = gen_corpus(GeneratorSpec{}, 50);
  const Corpus b = gen_corpus(GeneratorSpec{}, 50);
  ASSERT_EQ(a.sequences.size(), 50u);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(a.sequences[i].tokens, b.sequences[i].tokens);
    EXPECT_EQ(a.sequences[i].states, b.sequences[i].states);
    EXPECT_EQ(a.sequences[i].chain, b.sequences[i].chain);
  }
  const Corpus c = gen_corpus(GeneratorSpec{}, 50, "other");
  EXPECT_NE(a.sequences[0].tokens, c.sequences[0].tokens);
  EXPECT_THROW(gen_corpus(GeneratorSpec{}, 0), ArgumentError);
}

TEST(Corpus, SingleStateIsIidFromOneEmissionRow) {
  GeneratorSpec s = tiny_spec();
  s.states = 1;
  const HmmFamily f = build_family(s);
  const Corpus c = gen_corpus(f, 400);
  std::vector<double> counts(s.vocab - kReserved, 0.0);
  double total = 0;
  for (const auto& seq : c.sequences) {
    for (std::size_t t = 0; t < seq.tokens.size(); ++t) {
      EXPECT_EQ(seq.states[t], 0u);
      counts[seq.tokens[t] - kReserved] += 1;
      total += 1;
    }
  }
  for (std::size_t v = 0; v < counts.size(); ++v) {
    const double p = f.chains[0].emission[0][v];
    EXPECT_LE(std::abs(counts[v] - total * p), 3.0 * std::sqrt(total * p * (1 - p)) + 1e-9) << v;
  }
}

TEST(Corpus, BigramFrequenciesMatchStationaryHmm) {
  const GeneratorSpec s = tiny_spec();
  HmmFamily f = build_family(s);
  Hmm& h = f.chains[0];
  const std::vector<double> pi = f.stationary(0);
  // Starting at the stationary law makes every position stationary.
  h.initial = pi;
  const std::size_t n = 2000;  // 2000 x 50 = 10^5 tokens
  const Corpus c = gen_corpus(f, n);
  const std::size_t m = s.vocab - kReserved;
  std::vector<double> expect(m * m, 0.0);
  for (std::size_t i = 0; i < s.states; ++i) {
    for (std::size_t j = 0; j < s.states; ++j) {
      for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = 0; b < m; ++b) {
          expect[a * m + b] += pi[i] * h.emission[i][a] * h.transition[i][j] * h.emission[j][b];
        }
      }
    }
  }
  // Sequences are independent, so per-sequence counts give the variance.
  std::vector<double> sum(m * m, 0.0);
  std::vector<double> sumsq(m * m, 0.0);
  double pairs = 0;
  for (const auto& seq : c.sequences) {
    std::vector<double> local(m * m, 0.0);
    for (std::size_t t = 0; t + 1 < seq.tokens.size(); ++t) {
      local[(seq.tokens[t] - kReserved) * m + (seq.tokens[t + 1] - kReserved)] += 1;
    }
    pairs += static_cast<double>(seq.tokens.size() - 1);
    for (std::size_t k = 0; k < m * m; ++k) {
      sum[k] += local[k];
      sumsq[k] += local[k] * local[k];
    }
  }
  for (std::size_t k = 0; k < m * m; ++k) {
    const double mean = sum[k] / n;
    const double var = sumsq[k] / n - mean * mean;
    const double sigma = std::sqrt(var * n);
    EXPECT_LE(std::abs(sum[k] - expect[k] * pairs), 3.0 * sigma + 1e-9) << "bigram " << k;
  }
}

TEST(Corpus, VocabRoundTrip) {
  const Vocab v = Vocab::synthetic(20);
  EXPECT_EQ(v.size(), 20u);
  for (std::uint32_t id = 0; id < v.size(); ++id) {
    EXPECT_EQ(v.id(v.token(id)), id);
  }
  EXPECT_EQ(v.id("nope"), kUnk);
  EXPECT_THROW(v.token(20), IndexError);
  EXPECT_THROW(Vocab(std::vector<std::string>{"a", "a"}), IngestionError);
}

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  const auto dir = std::filesystem::temp_directory_path() / "lottery_tasks_test";
  std::filesystem::create_directories(dir);
  const auto p = dir / name;
  std::ofstream(p) << content;
  return p;
}

TEST(TextCorpus, IngestsAndRecounts) {
  const std::string text =
      "the cat sat on the mat\n"
      "\n"
      "a dog   sat\ton the cat\n"
      "   \n"
      "zebra the the\n";
  const auto corpus = temp_file("corpus.txt", text);
  const auto vocab = temp_file("vocab.txt", "the\ncat\nsat\non\nmat\na\ndog\n");
  const TextCorpus tc = load_text_corpus(corpus, vocab, 64);
  EXPECT_EQ(tc.skipped_empty, 2u);
  EXPECT_EQ(tc.sequences.size(), 3u);
  EXPECT_EQ(tc.unknown_tokens, 1u);
  EXPECT_EQ(tc.truncated, 0u);
  // Recount by scanning characters, independently of the stream tokenizer.
  std::map<std::string, std::size_t> words;
  std::string cur;
  for (char ch : text + "\n") {
    if (ch == ' ' || ch == '\t' || ch == '\n') {
      if (!cur.empty()) {
        ++words[tc.vocab.contains(cur) ? cur : "[UNK]"];
      }
      cur.clear();
    } else {
      cur += ch;
    }
  }
  std::map<std::string, std::size_t> loaded;
  for (const auto& seq : tc.sequences) {
    EXPECT_EQ(seq.front(), kCls);
    for (std::size_t i = 1; i < seq.size(); ++i) {
      ++loaded[tc.vocab.token(seq[i])];
    }
  }
  EXPECT_EQ(loaded, words);
}

TEST(TextCorpus, TruncatesAndRejectsBadInput) {
  const auto corpus = temp_file("long.txt", "a a a a a a a a\nb\n");
  const auto vocab = temp_file("vocab2.txt", "a\nb\n");
  const TextCorpus tc = load_text_corpus(corpus, vocab, 4);
  EXPECT_EQ(tc.truncated, 1u);
  EXPECT_EQ(tc.sequences[0].size(), 4u);
  EXPECT_EQ(tc.sequences[1].size(), 2u);
  const auto empty = temp_file("empty_vocab.txt", "\n\n");
  EXPECT_THROW(load_text_corpus(corpus, empty, 8), IngestionError);
  EXPECT_THROW(load_text_corpus("/nonexistent/corpus.txt", vocab, 8), IngestionError);
}

TaskSpec spec_for(TaskRule rule, std::size_t train = 200, std::size_t eval = 200) {
  TaskSpec s;
  s.id = to_string(rule);
  s.rule = rule;
  s.train_size = train;
  s.eval_size = eval;
  return s;
}

TEST(Tasks, DominantStateIsBalancedAndWellFormed) {
  const HmmFamily f = build_family(GeneratorSpec{});
  const Task t = make_task(f, spec_for(TaskRule::dominant_state, 300, 500));
  EXPECT_EQ(t.kind, TaskKind::single_class);
  EXPECT_EQ(t.head, HeadSpec::classifier(8));
  ASSERT_EQ(t.train.size(), 300u);
  ASSERT_EQ(t.eval.size(), 500u);
  for (const auto* split : {&t.train, &t.eval}) {
    std::vector<double> per_class(8, 0.0);
    for (const auto& e : *split) {
      ASSERT_FALSE(e.tokens.empty());
      EXPECT_EQ(e.tokens.front(), kCls);
      EXPECT_LE(e.tokens.size(), t.max_seq_len);
      for (auto id : e.tokens) {
        EXPECT_LT(id, t.vocab_size);
      }
      per_class.at(static_cast<std::size_t>(e.label)) += 1;
    }
    for (double c : per_class) {
      EXPECT_LE(std::abs(c / split->size() - 1.0 / 8), 0.05);
    }
  }
  TaskSpec f1 = spec_for(TaskRule::dominant_state);
  f1.metric = MetricId::f1;
  EXPECT_THROW(make_task(f, f1), ArgumentError);
}

TEST(Tasks, DerivationIsDeterministic) {
  const HmmFamily f = build_family(GeneratorSpec{});
  for (TaskRule r : {TaskRule::mlm, TaskRule::dominant_state, TaskRule::same_chain, TaskRule::state_fraction}) {
    const Task a = make_task(f, spec_for(r));
    const Task b = make_task(f, spec_for(r));
    EXPECT_EQ(encode_dataset(a), encode_dataset(b)) << to_string(r);
  }
}

TEST(Tasks, SingleStateRejectsDominantState) {
  GeneratorSpec g;
  g.states = 1;
  const Corpus c = gen_corpus(g, 100);
  EXPECT_THROW(derive_task(c, spec_for(TaskRule::dominant_state, 10, 10)), DegeneracyError);
}

TEST(Tasks, SingleChainRejectsSameChainPairs) {
  GeneratorSpec g;
  g.chains = 1;
  const Corpus c = gen_corpus(g, 100);
  EXPECT_THROW(derive_task(c, spec_for(TaskRule::same_chain, 10, 10)), DegeneracyError);
}

TEST(Tasks, PairInputsHaveOneSeparatorAndBalancedLabels) {
  const HmmFamily f = build_family(GeneratorSpec{});
  const Task t = make_task(f, spec_for(TaskRule::same_chain, 200, 300));
  EXPECT_EQ(t.kind, TaskKind::pair_class);
  for (const auto* split : {&t.train, &t.eval}) {
    double pos = 0;
    for (const auto& e : *split) {
      EXPECT_EQ(e.tokens.front(), kCls);
      EXPECT_EQ(std::count(e.tokens.begin(), e.tokens.end(), kSep), 1);
      EXPECT_LE(e.tokens.size(), t.max_seq_len);
      pos += e.label;
    }
    EXPECT_LE(std::abs(pos / split->size() - 0.5), 0.05);
  }
}

TEST(Tasks, StateFractionLabelsAreFractions) {
  const HmmFamily f = build_family(GeneratorSpec{});
  const Task t = make_task(f, spec_for(TaskRule::state_fraction));
  EXPECT_EQ(t.head, HeadSpec::regressor());
  EXPECT_EQ(t.metric, MetricId::pearson);
  for (const auto& e : t.train) {
    EXPECT_GE(e.label, 0.0);
    EXPECT_LE(e.label, 1.0);
    const double scaled = e.label * static_cast<double>(e.tokens.size() - 1);
    EXPECT_NEAR(scaled, std::round(scaled), 1e-9);
  }
  TaskSpec bad = spec_for(TaskRule::state_fraction);
  bad.designated_state = 8;
  EXPECT_THROW(make_task(f, bad), ArgumentError);
}

TEST(Tasks, IncompatibleMetricAndSmallPool) {
  const Corpus c = gen_corpus(GeneratorSpec{}, 30);
  TaskSpec s = spec_for(TaskRule::state_fraction, 10, 10);
  s.metric = MetricId::accuracy;
  EXPECT_THROW(derive_task(c, s), ArgumentError);
  EXPECT_THROW(derive_task(c, spec_for(TaskRule::dominant_state, 100, 100)), DataError);
}

// Softmax regression on the true state frequencies of each (truncated) sequence.
TEST(Tasks, LinearProbeOnStateFrequenciesLearnsDominantState) {
  const HmmFamily f = build_family(GeneratorSpec{});
  const std::size_t k = 8;
  const std::size_t kept = 31;  // max_seq_len - 1
  const Corpus pool = gen_corpus(f, 4000, "probe");
  std::vector<std::vector<double>> feats;
  std::vector<std::size_t> labels;
  for (const auto& s : pool.sequences) {
    const std::size_t n = std::min(s.states.size(), kept);
    std::vector<double> freq(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      freq[s.states[i]] += 1.0 / static_cast<double>(n);
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c) {
      best = freq[c] > freq[best] ? c : best;
    }
    feats.push_back(freq);
    labels.push_back(best);
  }
  const std::size_t split = 2000;
  std::vector<std::vector<double>> w(k, std::vector<double>(k + 1, 0.0));
  auto scores = [&](const std::vector<double>& x) {
    std::vector<double> z(k);
    for (std::size_t c = 0; c < k; ++c) {
      z[c] = w[c][k];
      for (std::size_t j = 0; j < k; ++j) {
        z[c] += w[c][j] * x[j];
      }
    }
    return z;
  };
  for (int epoch = 0; epoch < 1500; ++epoch) {
    std::vector<std::vector<double>> g(k, std::vector<double>(k + 1, 0.0));
    for (std::size_t i = 0; i < split; ++i) {
      std::vector<double> z = scores(feats[i]);
      const double mx = *std::max_element(z.begin(), z.end());
      double sum = 0;
      for (double& v : z) {
        v = std::exp(v - mx);
        sum += v;
      }
      for (std::size_t c = 0; c < k; ++c) {
        const double err = z[c] / sum - (labels[i] == c ? 1.0 : 0.0);
        for (std::size_t j = 0; j < k; ++j) {
          g[c][j] += err * feats[i][j];
        }
        g[c][k] += err;
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t j = 0; j <= k; ++j) {
        w[c][j] -= 20.0 * g[c][j] / split;
      }
    }
  }
  double correct = 0;
  for (std::size_t i = split; i < feats.size(); ++i) {
    const std::vector<double> z = scores(feats[i]);
    correct += static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin()) == labels[i] ? 1 : 0;
  }
  EXPECT_GE(correct / static_cast<double>(feats.size() - split), 0.95);
}

TEST(Mlm, SingleMaskableTokenIsMasked) {
  Rng rng(1);
  const MlmExample ex = mask_sequence({kCls, 9}, 0.5, rng);
  ASSERT_EQ(ex.positions.size(), 1u);
  EXPECT_EQ(ex.positions[0], 1u);
  EXPECT_EQ(ex.targets[0], 9u);
  EXPECT_EQ(ex.input[1], kMask);
  Rng rng2(1);
  EXPECT_TRUE(mask_sequence({kCls, 9}, 0.15, rng2).positions.empty());
}

TEST(Mlm, CountsSpecialsAndLossPositions) {
  const HmmFamily f = build_family(GeneratorSpec{});
  const Task t = make_task(f, spec_for(TaskRule::same_chain, 300, 10));
  std::vector<std::vector<std::uint32_t>> seqs;
  for (const auto& e : t.train) {
    seqs.push_back(e.tokens);
  }
  seqs.push_back({kCls, kSep});
  Rng rng(3);
  const MlmMasking m = make_mlm_batches(seqs, 0.15, rng);
  EXPECT_EQ(m.skipped, 1u);
  ASSERT_EQ(m.examples.size(), t.train.size());
  for (std::size_t i = 0; i < m.examples.size(); ++i) {
    const auto& ex = m.examples[i];
    const auto& orig = seqs[i];
    std::size_t maskable = 0;
    for (auto id : orig) {
      maskable += is_special(id) ? 0 : 1;
    }
    EXPECT_LE(std::abs(static_cast<double>(ex.positions.size()) - 0.15 * maskable), 1.0);
    std::set<std::size_t> masked;
    for (std::size_t p = 0; p < ex.input.size(); ++p) {
      if (ex.input[p] == kMask) {
        masked.insert(p);
        EXPECT_FALSE(is_special(orig[p]));
      } else {
        EXPECT_EQ(ex.input[p], orig[p]);
      }
    }
    EXPECT_EQ(masked, std::set<std::size_t>(ex.positions.begin(), ex.positions.end()));
    for (std::size_t k = 0; k < ex.positions.size(); ++k) {
      EXPECT_EQ(ex.targets[k], orig[ex.positions[k]]);
    }
  }
  EXPECT_THROW(make_mlm_batches(seqs, 0.0, rng), ArgumentError);
  EXPECT_THROW(make_mlm_batches(seqs, 1.0, rng), ArgumentError);
}

TEST(Subsample, FullSizeIsPermutationAndOneIsSingle) {
  const HmmFamily f = build_family(GeneratorSpec{});
  const Task t = make_task(f, spec_for(TaskRule::dominant_state));
  const Task full = subsample(t, t.train.size(), 4);
  EXPECT_EQ(encode_dataset(full), encode_dataset(t));
  const Task one = subsample(t, 1, 4);
  EXPECT_EQ(one.train.size(), 1u);
  EXPECT_EQ(one.eval.size(), t.eval.size());
  EXPECT_THROW(subsample(t, t.train.size() + 1, 4), ArgumentError);
  EXPECT_NE(one.fingerprint_text, t.fingerprint_text);
}

TEST(Subsample, ClassBalanceWithinHypergeometricBounds) {
  const HmmFamily f = build_family(GeneratorSpec{});
  const Task t = make_task(f, spec_for(TaskRule::dominant_state, 512, 10));
  const double big_n = 512;
  const double big_k = 64;  // examples per class
  const double n = 100;
  const double mean = n * big_k / big_n;
  const double sd = std::sqrt(n * (big_k / big_n) * (1 - big_k / big_n) * (big_n - n) / (big_n - 1));
  // Mean count per class over many independent draws, against the standard error of that mean.
  const std::size_t draws = 20000;
  std::vector<double> total(8, 0.0);
  for (std::uint64_t seed = 1; seed <= draws; ++seed) {
    const Task s = subsample(t, 100, seed);
    for (const auto& e : s.train) {
      total.at(static_cast<std::size_t>(e.label)) += 1;
    }
  }
  for (double c : total) {
    EXPECT_LE(std::abs(c / draws - mean), 3 * sd / std::sqrt(static_cast<double>(draws)));
  }
}

TEST(Dataset, RoundTrip) {
  const HmmFamily f = build_family(GeneratorSpec{});
  const Task t = make_task(f, spec_for(TaskRule::state_fraction, 50, 20));
  const auto path = std::filesystem::temp_directory_path() / "lottery_tasks_test" / "ds.tsv";
  save_dataset(path, t);
  Task back;
  load_dataset(path, back);
  ASSERT_EQ(back.train.size(), t.train.size());
  ASSERT_EQ(back.eval.size(), t.eval.size());
  for (std::size_t i = 0; i < t.train.size(); ++i) {
    EXPECT_EQ(back.train[i].tokens, t.train[i].tokens);
    EXPECT_EQ(back.train[i].label, t.train[i].label);
  }
  const auto bad = temp_file("bad.tsv", "train\t1\t2 3\ntest\t0\t2\n");
  EXPECT_THROW(load_dataset(bad, back), IngestionError);
}

}  // namespace
}  // namespace lottery
