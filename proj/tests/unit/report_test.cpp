#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lottery/cli/report.hpp"
#include "lottery/experiments/lab.hpp"
#include "lottery/masking/pruning.hpp"

namespace lottery {
namespace {

namespace fs = std::filesystem;

const std::string kSuite = "suite-fp";

RunRecord rec(const std::string& experiment, const std::string& variant, const std::string& mask_task,
              const std::string& target, double sparsity, std::uint64_t seed, double value) {
  RunRecord r;
  r.experiment = experiment;
  r.variant = variant;
  r.mask_task = mask_task;
  r.mask_method = mask_task.empty() ? "dense" : "imp";
  r.target = target;
  r.sparsity = sparsity;
  r.seed = seed;
  r.value = value;
  char s[16];
  std::snprintf(s, sizeof s, "s%.4f", sparsity);
  r.id = experiment + "/" + variant + "/" + (mask_task.empty() ? "" : mask_task + "->") + target + "/" + s +
         "/seed" + std::to_string(seed);
  r.params["suite"] = kSuite;
  r.params["key"] = "key:" + r.id;
  r.fingerprint = hex_digest(kSuite + "|key:" + r.id);
  return r;
}

std::vector<RunRecord> transfer_records() {
  Rng rng(5);
  std::vector<RunRecord> out;
  const std::vector<std::string> tasks = {"mlm", "dominant-state", "same-chain"};
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    for (const auto& t : tasks) {
      out.push_back(rec("transfer", "full", "", t, 0.0, seed, 0.6 + 0.05 * rng.normal()));
      for (const auto& s : tasks) {
        out.push_back(rec("transfer", "transfer", s, t, 0.6, seed, 0.55 + 0.05 * rng.normal()));
      }
      RunRecord d = rec("transfer", "direct", "", t, 0.6, seed, 0.5 + 0.05 * rng.normal());
      d.id += "/direct";
      d.params["key"] = "key:" + d.id;
      d.fingerprint = hex_digest(kSuite + "|key:" + d.id);
      out.push_back(d);
    }
  }
  return out;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::string f;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (c == '"') {
        if (quoted && i + 1 < line.size() && line[i + 1] == '"') {
          f += '"';
          ++i;
        } else {
          quoted = !quoted;
        }
      } else if (c == ',' && !quoted) {
        fields.push_back(f);
        f.clear();
      } else {
        f += c;
      }
    }
    fields.push_back(f);
    rows.push_back(fields);
  }
  return rows;
}

struct Oracle {
  double mean, std, median, best;
};

// Aggregates recomputed straight from the JSON lines of the records.
Oracle recompute(const std::vector<std::string>& lines, const std::string& variant, const std::string& mask_task,
                 const std::string& target) {
  std::vector<double> v;
  for (const auto& line : lines) {
    const auto j = nlohmann::json::parse(line);
    if (j.at("variant") == variant && j.at("target") == target &&
        (mask_task.empty() || j.at("mask_source").at("task") == mask_task)) {
      v.push_back(j.at("value").get<double>());
    }
  }
  EXPECT_FALSE(v.empty());
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  return {mean, n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0, median, v.back()};
}

TEST(Report, TransferCsvEqualsRecomputationFromRecordLines) {
  const auto records = transfer_records();
  std::vector<std::string> lines;
  for (const auto& r : records) {
    lines.push_back(r.to_json());
  }
  std::vector<RunRecord> reread;
  for (const auto& l : lines) {
    reread.push_back(RunRecord::from_json(l));
  }
  const auto rows = parse_csv(to_csv(build_report(ReportKind::fig2, reread)));
  ASSERT_GE(rows.size(), 2u);
  const auto& header = rows[0];
  ASSERT_EQ(std::vector<std::string>(header.begin(), header.begin() + 8),
            (std::vector<std::string>{"row", "col", "value", "n", "mean", "std", "median", "best"}));
  std::size_t checked = 0;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto& f = rows[k];
    if (f[1] == "count") {
      continue;
    }
    const Oracle o = f[0] == "direct" ? recompute(lines, "direct", "", f[1]) : recompute(lines, "transfer", f[0], f[1]);
    EXPECT_LE(std::abs(std::stod(f[2]) - o.mean), 1e-12);
    EXPECT_LE(std::abs(std::stod(f[4]) - o.mean), 1e-12);
    EXPECT_LE(std::abs(std::stod(f[5]) - o.std), 1e-12);
    EXPECT_LE(std::abs(std::stod(f[6]) - o.median), 1e-12);
    EXPECT_LE(std::abs(std::stod(f[7]) - o.best), 1e-12);
    EXPECT_EQ(f[3], "3");
    ++checked;
  }
  EXPECT_EQ(checked, 12u);

  // Differences against the same-task cell, recomputed the same way.
  const auto diff = parse_csv(to_csv(build_report(ReportKind::fig3, reread)));
  for (std::size_t k = 1; k < diff.size(); ++k) {
    const auto& f = diff[k];
    const double expected = recompute(lines, "transfer", f[0], f[1]).mean - recompute(lines, "transfer", f[1], f[1]).mean;
    EXPECT_LE(std::abs(std::stod(f[2]) - expected), 1e-12);
    if (f[0] == f[1]) {
      EXPECT_EQ(f[2], "0");
    }
  }
}

TEST(Report, DifferenceDiagonalIsExactlyZero) {
  const Report r = build_report(ReportKind::fig3, transfer_records());
  std::size_t diagonal = 0;
  for (const auto& c : r.cells) {
    if (c.row == c.col) {
      EXPECT_EQ(c.value, 0.0);
      EXPECT_FALSE(std::signbit(c.value));
      EXPECT_EQ(c.display, "0.0");
      ++diagonal;
    }
  }
  EXPECT_EQ(diagonal, 3u);
}

TEST(Report, SameRecordsGiveByteIdenticalCsv) {
  const auto records = transfer_records();
  for (auto kind : {ReportKind::fig2, ReportKind::fig3}) {
    EXPECT_EQ(to_csv(build_report(kind, records), true), to_csv(build_report(kind, records), true));
    EXPECT_EQ(to_svg(build_report(kind, records)), to_svg(build_report(kind, records)));
  }
}

TEST(Report, SingleCellMatrixGivesOneByOneHeatmap) {
  const std::vector<RunRecord> records = {rec("overlap", "overlap", "mlm", "mlm", 0.6, 1, 1.0)};
  const Report r = build_report(ReportKind::overlap_heatmap, records);
  EXPECT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.cols.size(), 1u);
  const auto rows = parse_csv(to_csv(r));
  EXPECT_EQ(rows.size(), 2u);
  const std::string svg = to_svg(r);
  std::size_t cells = 0;
  for (auto pos = svg.find("stroke-width"); pos != std::string::npos; pos = svg.find("stroke-width", pos + 1)) {
    ++cells;
  }
  EXPECT_EQ(cells, 1u);
  EXPECT_NE(svg.find("<svg"), std::string::npos);
}

TEST(Report, TraceListsContributingRecords) {
  const auto records = transfer_records();
  const auto rows = parse_csv(to_csv(build_report(ReportKind::fig2, records), true));
  ASSERT_EQ(rows[0].back(), "records");
  std::set<std::string> known;
  for (const auto& r : records) known.insert(r.id);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const std::string& ids = rows[k].back();
    ASSERT_FALSE(ids.empty());
    std::size_t start = 0;
    while (start <= ids.size()) {
      const auto end = std::min(ids.find(';', start), ids.size());
      EXPECT_EQ(known.count(ids.substr(start, end - start)), 1u) << ids.substr(start, end - start);
      start = end + 1;
    }
  }
}

TEST(Report, TableThreeHasOneRowPerRewindPointPlusStandardPruning) {
  std::vector<RunRecord> records;
  for (std::uint64_t seed = 1; seed <= 2; ++seed) {
    for (double f : {0.0, 0.05, 0.1, 0.2, 0.5}) {
      RunRecord r = rec("rewind-sweep", "rewind", "dominant-state", "dominant-state", 0.6, seed, 0.5 + f);
      char tag[16];
      std::snprintf(tag, sizeof tag, "/f%.4f", f);
      r.id += tag;
      r.params["rewind_fraction"] = std::to_string(f);
      r.rewind_step = static_cast<std::size_t>(std::lround(300 * f));
      records.push_back(r);
    }
    records.push_back(rec("rewind-sweep", "standard", "dominant-state", "dominant-state", 0.6, seed, 0.45));
  }
  const Report r = build_report(ReportKind::table3, records);
  EXPECT_EQ(r.rows, (std::vector<std::string>{"rewind 0%", "rewind 5%", "rewind 10%", "rewind 20%", "rewind 50%",
                                              "standard pruning"}));
  EXPECT_EQ(r.cells.size(), 6u);
  EXPECT_NEAR(r.find("rewind 20%", "dominant-state")->value, 0.7, 1e-12);
}

TEST(Report, TextShowsPointsAndWinningMarks) {
  std::vector<RunRecord> records;
  for (std::uint64_t seed = 1; seed <= 2; ++seed) {
    records.push_back(rec("claims", "full", "", "same-chain", 0.0, seed, seed == 1 ? 0.60 : 0.62));
    records.push_back(rec("claims", "imp", "same-chain", "same-chain", 0.5, seed, 0.605));
    records.push_back(rec("claims", "random-mask", "", "same-chain", 0.5, seed, 0.40));
  }
  const Report r = build_report(ReportKind::table2, records);
  EXPECT_EQ(r.find("sparsity", "same-chain")->value, 0.5);
  const std::string text = to_text(r);
  EXPECT_NE(text.find("61.0"), std::string::npos);
  EXPECT_NE(text.find("*"), std::string::npos);
  EXPECT_EQ(r.find("imp", "same-chain")->flags.at("winning"), "yes");
  ReportOptions strict;
  strict.criterion = Criterion::strict;
  strict.sparsity = 0.5;
  EXPECT_EQ(build_report(ReportKind::table2, records, strict).find("imp", "same-chain")->flags.at("winning"), "no");
}

TEST(Report, MissingRecordsAreAStateError) {
  EXPECT_THROW(build_report(ReportKind::table3, transfer_records()), StateError);
}

TEST(RecordChecks, RefuseStaleFingerprintsAndForeignSuites) {
  auto records = transfer_records();
  EXPECT_NO_THROW(check_records(records, kSuite));
  EXPECT_NO_THROW(check_records(records, std::nullopt));
  records[4].value += 0.1;
  records[4].fingerprint = hex_digest("tampered");
  try {
    check_records(records, kSuite);
    FAIL() << "expected StaleRecordError";
  } catch (const StaleRecordError& e) {
    EXPECT_EQ(e.ids(), std::vector<std::string>{records[4].id});
    EXPECT_NE(std::string(e.what()).find(records[4].id), std::string::npos);
  }
  EXPECT_THROW(check_records(transfer_records(), std::string("other-suite")), StaleRecordError);
}

TEST(RecordChecks, RefuseUnlabeledMasks) {
  const fs::path dir = fs::temp_directory_path() / ("lottery-report-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir / "masks");
  Mask m = Mask::dense({{"w", 10}});
  save_mask(dir / "masks/bare.ltmk", m);
  m.meta = {"mlm", "imp", "experiments.imp", "abc", 3};
  save_mask(dir / "masks/labeled.ltmk", m);

  RunRecord good = rec("claims", "imp", "mlm", "mlm", 0.5, 1, 0.2);
  good.artifacts["mask"] = "masks/labeled.ltmk";
  EXPECT_NO_THROW(check_mask_provenance({good}, dir));
  RunRecord bare = good;
  bare.artifacts["mask"] = "masks/bare.ltmk";
  EXPECT_THROW(check_mask_provenance({good, bare}, dir), StaleRecordError);
  RunRecord missing = good;
  missing.artifacts["mask"] = "masks/none.ltmk";
  EXPECT_THROW(check_mask_provenance({missing}, dir), StaleRecordError);
  fs::remove_all(dir);
}

TEST(ReportNames, RoundTrip) {
  for (auto k : {ReportKind::table2, ReportKind::table3, ReportKind::table4, ReportKind::fig1, ReportKind::fig2,
                 ReportKind::fig3, ReportKind::fig4, ReportKind::overlap_heatmap, ReportKind::datasize}) {
    EXPECT_EQ(parse_report_kind(to_string(k)), k);
  }
  EXPECT_EQ(to_string(ReportKind::overlap_heatmap), "overlap-heatmap");
  EXPECT_THROW(parse_report_kind("table9"), ArgumentError);
  EXPECT_EQ(parse_report_format("svg"), ReportFormat::svg);
}

}  // namespace
}  // namespace lottery
