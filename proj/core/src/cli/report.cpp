#include "lottery/cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "lottery/errors.hpp"
#include "lottery/experiments/drivers.hpp"
#include "lottery/experiments/lab.hpp"
#include "lottery/masking/pruning.hpp"

namespace lottery {

namespace {

constexpr const char* kKindNames[] = {"table2", "table3", "table4", "fig1", "fig2",
                                      "fig3",   "fig4",   "overlap-heatmap", "datasize"};
constexpr const char* kFormatNames[] = {"csv", "svg", "text"};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string pct(double fraction) {
  return fixed(100.0 * fraction, 0) + "%";
}

// Values and ids of one group of records, in record order.
struct Group {
  std::vector<double> values;
  std::vector<std::string> ids;

  void add(const RunRecord& r) {
    values.push_back(r.value);
    ids.push_back(r.id);
  }
  Summary stats() const { return summarize(values); }
};

void push_unique(std::vector<std::string>& list, const std::string& s) {
  if (std::find(list.begin(), list.end(), s) == list.end()) {
    list.push_back(s);
  }
}

std::string metric_display(const Summary& s) {
  std::string out = fixed(100.0 * s.mean, 1);
  if (s.n > 1) {
    out += " +- " + fixed(100.0 * s.std, 1);
  }
  return out;
}

ReportCell stat_cell(const std::string& row, const std::string& col, const Group& g) {
  ReportCell c;
  c.row = row;
  c.col = col;
  c.stats = g.stats();
  c.value = c.stats.mean;
  c.display = metric_display(c.stats);
  c.ids = g.ids;
  return c;
}

ReportCell value_cell(const std::string& row, const std::string& col, double value, std::string display,
                      std::vector<std::string> ids = {}) {
  ReportCell c;
  c.row = row;
  c.col = col;
  c.value = value;
  c.display = std::move(display);
  c.ids = std::move(ids);
  return c;
}

// Appends the ids of b not already in a.
std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  for (const auto& id : b) {
    if (std::find(a.begin(), a.end(), id) == a.end()) {
      a.push_back(id);
    }
  }
  return a;
}

const char* yes_no(bool b) {
  return b ? "yes" : "no";
}

// Marks `cell` with the verdict of its values against `full`.
void add_verdict(ReportCell& cell, const Group& sub, const Group& full, Criterion criterion,
                 const std::string& flag) {
  if (full.values.size() < 2 && criterion == Criterion::one_stddev) {
    cell.flags[flag] = "n/a";
    return;
  }
  if (sub.values.empty() || full.values.empty()) {
    cell.flags[flag] = "n/a";
    return;
  }
  const Verdict v = winning_ticket_check(sub.values, full.values, criterion);
  cell.flags[flag] = yes_no(v.winning);
  cell.flags["margin"] = num(v.margin);
}

std::vector<RunRecord> of_experiment(const std::vector<RunRecord>& records, const std::string& experiment) {
  std::vector<RunRecord> out;
  for (const auto& r : records) {
    if (r.experiment == experiment) {
      out.push_back(r);
    }
  }
  return out;
}

void require(const std::vector<RunRecord>& records, const std::string& what) {
  if (records.empty()) {
    throw StateError("no " + what + " records to report");
  }
}

Report table2(const std::vector<RunRecord>& all, const ReportOptions& opt) {
  const auto records = of_experiment(all, "claims");
  require(records, "claims");
  Report rep;
  rep.kind = ReportKind::table2;
  rep.title = "Subnetworks at each task's reported sparsity against the full model";
  rep.flag_names = {"sparsity", "winning", "margin"};
  std::map<std::string, Group> full;
  std::map<std::string, std::map<std::string, std::map<double, Group>>> by;  // task -> variant -> s
  for (const auto& r : records) {
    push_unique(rep.cols, r.target);
    if (r.variant == "full") {
      full[r.target].add(r);
    } else {
      by[r.target][r.variant][r.sparsity].add(r);
    }
  }
  const auto winning = winning_sparsities(records, "claims", opt.criterion);
  rep.rows = {"sparsity"};
  for (const auto& v : kClaimVariants) {
    rep.rows.push_back(v);
  }
  for (const auto& task : rep.cols) {
    const double s = opt.sparsity.value_or(winning.count(task) ? winning.at(task) : 0.0);
    std::vector<std::string> ids;
    for (const auto& [s2, g] : by[task]["imp"]) {
      ids = concat(ids, g.ids);
    }
    ReportCell sc = value_cell("sparsity", task, s, pct(s), concat(full[task].ids, ids));
    sc.flags["sparsity"] = num(s);
    rep.cells.push_back(sc);
    if (!full[task].values.empty()) {
      ReportCell fc = stat_cell("full", task, full[task]);
      fc.flags["sparsity"] = "0";
      rep.cells.push_back(fc);
    }
    for (const auto& v : kClaimVariants) {
      if (v == "full") {
        continue;
      }
      auto vit = by[task].find(v);
      if (vit == by[task].end()) {
        continue;
      }
      auto git = vit->second.find(s);
      if (git == vit->second.end()) {
        continue;
      }
      ReportCell c = stat_cell(v, task, git->second);
      c.flags["sparsity"] = num(s);
      add_verdict(c, git->second, full[task], opt.criterion, "winning");
      rep.cells.push_back(c);
    }
  }
  return rep;
}

Report fig1(const std::vector<RunRecord>& all) {
  const auto records = of_experiment(all, "claims");
  require(records, "claims");
  Report rep;
  rep.kind = ReportKind::fig1;
  rep.title = "IMP and random pruning across sparsities";
  rep.flag_names = {"task", "variant", "sparsity"};
  std::map<std::string, std::map<double, Group>> groups;
  std::set<double> levels;
  std::map<std::string, Group> full;
  std::vector<std::string> tasks;
  for (const auto& r : records) {
    push_unique(tasks, r.target);
    if (r.variant == "full") {
      full[r.target].add(r);
      continue;
    }
    if (r.variant != "imp" && r.variant != "random-mask") {
      continue;
    }
    groups[r.target + " / " + r.variant][r.sparsity].add(r);
    levels.insert(r.sparsity);
  }
  for (double s : levels) {
    rep.cols.push_back(fixed(s, 2));
  }
  for (const auto& task : tasks) {
    for (const char* v : {"imp", "random-mask"}) {
      const std::string row = task + " / " + v;
      auto it = groups.find(row);
      if (it == groups.end()) {
        continue;
      }
      rep.rows.push_back(row);
      for (const auto& [s, g] : it->second) {
        ReportCell c = stat_cell(row, fixed(s, 2), g);
        c.flags["task"] = task;
        c.flags["variant"] = v;
        c.flags["sparsity"] = num(s);
        rep.cells.push_back(c);
      }
    }
  }
  return rep;
}

Report table3(const std::vector<RunRecord>& all) {
  const auto records = of_experiment(all, "rewind-sweep");
  require(records, "rewind-sweep");
  Report rep;
  rep.kind = ReportKind::table3;
  rep.title = "Rewinding points and standard pruning";
  rep.flag_names = {"sparsity", "rewind_step"};
  std::map<double, std::map<std::string, Group>> rewind;
  std::map<std::string, Group> standard;
  std::map<std::string, double> sparsity;
  std::map<double, std::size_t> steps;
  for (const auto& r : records) {
    push_unique(rep.cols, r.target);
    sparsity[r.target] = r.sparsity;
    if (r.variant == "standard") {
      standard[r.target].add(r);
    } else {
      const double f = std::stod(r.params.at("rewind_fraction"));
      rewind[f][r.target].add(r);
      steps[f] = r.rewind_step;
    }
  }
  for (const auto& [f, per_task] : rewind) {
    const std::string row = "rewind " + pct(f);
    rep.rows.push_back(row);
    for (const auto& [task, g] : per_task) {
      ReportCell c = stat_cell(row, task, g);
      c.flags["sparsity"] = num(sparsity[task]);
      c.flags["rewind_step"] = std::to_string(steps[f]);
      rep.cells.push_back(c);
    }
  }
  if (!standard.empty()) {
    rep.rows.push_back("standard pruning");
    for (const auto& [task, g] : standard) {
      ReportCell c = stat_cell("standard pruning", task, g);
      c.flags["sparsity"] = num(sparsity[task]);
      c.flags["rewind_step"] = "t";
      rep.cells.push_back(c);
    }
  }
  return rep;
}

Report table4(const std::vector<RunRecord>& all, const ReportOptions& opt) {
  const auto claims = of_experiment(all, "claims");
  const auto uni = of_experiment(all, "universality");
  require(uni, "universality");
  require(claims, "claims");
  Report rep;
  rep.kind = ReportKind::table4;
  rep.title = "MLM subnetworks at each task's winning sparsity";
  rep.cols = {"sparsity", "own", "mlm", "gap"};
  rep.flag_names = {"universal", "margin"};
  std::map<std::string, Group> full, mlm;
  std::map<std::string, std::map<double, Group>> own;
  std::map<std::string, double> level;
  for (const auto& r : claims) {
    if (r.variant == "full") {
      full[r.target].add(r);
    } else if (r.variant == "imp") {
      own[r.target][r.sparsity].add(r);
    }
  }
  for (const auto& r : uni) {
    push_unique(rep.rows, r.target);
    mlm[r.target].add(r);
    level[r.target] = r.sparsity;
  }
  for (const auto& task : rep.rows) {
    const double s = level[task];
    const Group& own_g = s == 0.0 ? full[task] : own[task][s];
    rep.cells.push_back(value_cell(task, "sparsity", s, pct(s)));
    ReportCell oc = stat_cell(task, "own", own_g);
    rep.cells.push_back(oc);
    ReportCell mc = stat_cell(task, "mlm", mlm[task]);
    add_verdict(mc, mlm[task], full[task], opt.criterion, "universal");
    rep.cells.push_back(mc);
    const double gap = oc.stats.mean - mc.stats.mean;
    rep.cells.push_back(value_cell(task, "gap", gap, fixed(100.0 * gap, 1), concat(oc.ids, mc.ids)));
  }
  return rep;
}

struct Matrix {
  std::vector<std::string> sources;
  std::vector<std::string> targets;
  std::map<std::string, std::map<std::string, Group>> cells;
  std::map<std::string, Group> full;
};

Matrix transfer_cells(const std::vector<RunRecord>& all) {
  Matrix m;
  for (const auto& r : all) {
    if (r.experiment == "transfer") {
      push_unique(m.targets, r.target);
      if (r.variant == "full") {
        m.full[r.target].add(r);
      } else if (r.variant == "transfer") {
        push_unique(m.sources, r.mask_task);
        m.cells[r.mask_task][r.target].add(r);
      } else if (r.variant == "direct") {
        m.cells["direct"][r.target].add(r);
      }
    } else if (r.experiment == "multitask") {
      m.cells[r.mask_task][r.target].add(r);
    }
  }
  return m;
}

Report fig2(const std::vector<RunRecord>& all, const ReportOptions& opt) {
  Matrix m = transfer_cells(all);
  if (m.sources.empty()) {
    throw StateError("no transfer records to report");
  }
  Report rep;
  rep.kind = ReportKind::fig2;
  rep.title = "Transfer(S, T): IMP masks of source S trained on target T";
  rep.flag_names = {"dark", "margin", "ge_same_task"};
  rep.rows = m.sources;
  for (const auto& [row, _] : m.cells) {
    if (std::find(rep.rows.begin(), rep.rows.end(), row) == rep.rows.end() && row != "direct") {
      rep.rows.push_back(row);
    }
  }
  if (m.cells.count("direct") != 0) {
    rep.rows.push_back("direct");
  }
  rep.cols = m.targets;
  rep.cols.push_back("count");
  for (const auto& row : rep.rows) {
    std::size_t count = 0;
    std::vector<std::string> count_ids;
    for (const auto& t : m.targets) {
      auto it = m.cells[row].find(t);
      if (it == m.cells[row].end()) {
        continue;
      }
      ReportCell c = stat_cell(row, t, it->second);
      add_verdict(c, it->second, m.full[t], opt.criterion, "dark");
      auto same = m.cells.count(t) ? m.cells[t].find(t) : m.cells[row].end();
      if (m.cells.count(t) != 0 && same != m.cells[t].end()) {
        const bool ge = c.stats.mean >= same->second.stats().mean;
        c.flags["ge_same_task"] = yes_no(ge);
        if (ge) {
          ++count;
        }
        count_ids = concat(concat(count_ids, it->second.ids), same->second.ids);
      }
      rep.cells.push_back(c);
    }
    rep.cells.push_back(value_cell(row, "count", static_cast<double>(count), std::to_string(count), count_ids));
  }
  return rep;
}

Report fig3(const std::vector<RunRecord>& all) {
  Matrix m = transfer_cells(all);
  if (m.sources.empty()) {
    throw StateError("no transfer records to report");
  }
  Report rep;
  rep.kind = ReportKind::fig3;
  rep.title = "Transfer(S, T) - Transfer(T, T)";
  rep.rows = m.sources;
  for (const auto& t : m.targets) {
    if (m.cells.count(t) != 0 && m.cells[t].count(t) != 0) {
      rep.cols.push_back(t);
    }
  }
  for (const auto& s : rep.rows) {
    for (const auto& t : rep.cols) {
      auto it = m.cells[s].find(t);
      if (it == m.cells[s].end()) {
        continue;
      }
      const Group& same = m.cells[t][t];
      const double d = it->second.stats().mean - same.stats().mean;
      rep.cells.push_back(value_cell(s, t, d, fixed(100.0 * d, 1), concat(it->second.ids, s == t ? std::vector<std::string>{} : same.ids)));
    }
  }
  return rep;
}

Report fig4(const std::vector<RunRecord>& all) {
  const auto records = of_experiment(all, "rewound-transfer");
  require(records, "rewound-transfer");
  Report rep;
  rep.kind = ReportKind::fig4;
  rep.title = "Rewound source subnetworks relative to rewinding to theta0";
  rep.flag_names = {"source", "absolute"};
  std::map<std::string, std::map<std::string, Group>> rows;
  std::string source;
  for (const auto& r : records) {
    const std::string row = r.params.at("row");
    push_unique(rep.rows, row);
    push_unique(rep.cols, r.target);
    rows[row][r.target].add(r);
    source = r.mask_task;
  }
  std::sort(rep.rows.begin(), rep.rows.end(), [](const std::string& a, const std::string& b) {
    if (a == "final" || b == "final") {
      return b == "final" && a != "final";
    }
    return std::stod(a) < std::stod(b);
  });
  const std::string base = fixed(0.0, 4);
  if (rows.count(base) == 0) {
    throw StateError("rewound-transfer records lack the theta0 row");
  }
  for (const auto& row : rep.rows) {
    for (const auto& t : rep.cols) {
      auto it = rows[row].find(t);
      if (it == rows[row].end() || rows[base].count(t) == 0) {
        continue;
      }
      const Group& b = rows[base][t];
      const double d = it->second.stats().mean - b.stats().mean;
      ReportCell c = value_cell(row, t, d, fixed(100.0 * d, 1), concat(it->second.ids, row == base ? std::vector<std::string>{} : b.ids));
      c.stats = it->second.stats();
      c.flags["source"] = source;
      c.flags["absolute"] = num(c.stats.mean);
      rep.cells.push_back(c);
    }
  }
  return rep;
}

Report overlap_heatmap(const std::vector<RunRecord>& all) {
  const auto records = of_experiment(all, "overlap");
  require(records, "overlap");
  Report rep;
  rep.kind = ReportKind::overlap_heatmap;
  rep.title = "Overlap of pruned sets";
  rep.flag_names = {"sparsity"};
  std::map<std::string, std::map<std::string, Group>> m;
  double sparsity = 0.0;
  for (const auto& r : records) {
    push_unique(rep.rows, r.mask_task);
    m[r.mask_task][r.target].add(r);
    sparsity = r.sparsity;
  }
  rep.cols = rep.rows;
  for (const auto& a : rep.rows) {
    for (const auto& b : rep.cols) {
      auto it = m[a].find(b);
      if (it == m[a].end()) {
        continue;
      }
      ReportCell c = stat_cell(a, b, it->second);
      c.display = fixed(c.value, 3);
      c.flags["sparsity"] = num(sparsity);
      rep.cells.push_back(c);
    }
  }
  return rep;
}

Report datasize(const std::vector<RunRecord>& all) {
  const auto records = of_experiment(all, "datasize");
  require(records, "datasize");
  Report rep;
  rep.kind = ReportKind::datasize;
  rep.title = "Transfer of masks found on subsampled source data";
  rep.flag_names = {"source", "train_size"};
  std::map<std::string, std::map<std::string, Group>> m;
  std::map<std::string, std::string> source;
  for (const auto& r : records) {
    const std::string row = r.params.at("train_size");
    push_unique(rep.rows, row);
    push_unique(rep.cols, r.target);
    m[row][r.target].add(r);
    source[row] = r.mask_task;
  }
  for (const auto& row : rep.rows) {
    for (const auto& t : rep.cols) {
      auto it = m[row].find(t);
      if (it == m[row].end()) {
        continue;
      }
      ReportCell c = stat_cell(row, t, it->second);
      c.flags["source"] = source[row];
      c.flags["train_size"] = row;
      rep.cells.push_back(c);
    }
  }
  return rep;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) {
    return s;
  }
  std::string out = "\"";
  for (char c : s) {
    out += c == '"' ? std::string("\"\"") : std::string(1, c);
  }
  return out + "\"";
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

bool is_verdict_yes(const ReportCell& c) {
  for (const char* f : {"dark", "winning", "universal"}) {
    auto it = c.flags.find(f);
    if (it != c.flags.end() && it->second == "yes") {
      return true;
    }
  }
  return false;
}

std::string line_chart(const Report& rep) {
  std::vector<double> xs;
  for (const auto& c : rep.cells) {
    xs.push_back(std::stod(c.flags.at("sparsity")));
  }
  double lo_y = 1e300, hi_y = -1e300;
  for (const auto& c : rep.cells) {
    lo_y = std::min(lo_y, c.value);
    hi_y = std::max(hi_y, c.value);
  }
  if (!(hi_y > lo_y)) {
    hi_y = lo_y + 1.0;
  }
  const double lo_x = xs.empty() ? 0.0 : *std::min_element(xs.begin(), xs.end());
  double hi_x = xs.empty() ? 1.0 : *std::max_element(xs.begin(), xs.end());
  if (!(hi_x > lo_x)) {
    hi_x = lo_x + 1.0;
  }
  const int w = 640, h = 360, left = 60, top = 40, pw = 380, ph = 260;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
                    std::to_string(h) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"10\" y=\"20\" font-family=\"monospace\" font-size=\"12\">" + xml_escape(rep.title) + "</text>\n";
  svg += "<rect x=\"" + std::to_string(left) + "\" y=\"" + std::to_string(top) + "\" width=\"" + std::to_string(pw) +
         "\" height=\"" + std::to_string(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  auto px = [&](double x) { return left + (x - lo_x) / (hi_x - lo_x) * pw; };
  auto py = [&](double y) { return top + ph - (y - lo_y) / (hi_y - lo_y) * ph; };
  const char* dashes[] = {"", "6,3", "2,2", "8,2,2,2"};
  for (std::size_t k = 0; k < rep.rows.size(); ++k) {
    std::string points;
    for (const auto& c : rep.cells) {
      if (c.row == rep.rows[k]) {
        points += fixed(px(std::stod(c.flags.at("sparsity"))), 1) + "," + fixed(py(c.value), 1) + " ";
      }
    }
    const int gray = static_cast<int>(160 * (k % 3) / 2);
    const std::string color = "rgb(" + std::to_string(gray) + "," + std::to_string(gray) + "," + std::to_string(gray) + ")";
    svg += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\" stroke-dasharray=\"" +
           dashes[k % 4] + "\" points=\"" + points + "\"/>\n";
    const int ly = top + 14 + static_cast<int>(k) * 16;
    svg += "<text x=\"" + std::to_string(left + pw + 12) + "\" y=\"" + std::to_string(ly) +
           "\" font-family=\"monospace\" font-size=\"11\" fill=\"" + color + "\">" + xml_escape(rep.rows[k]) +
           "</text>\n";
  }
  svg += "<text x=\"" + std::to_string(left) + "\" y=\"" + std::to_string(top + ph + 16) +
         "\" font-family=\"monospace\" font-size=\"11\">sparsity " + fixed(lo_x, 2) + " .. " + fixed(hi_x, 2) +
         "</text>\n";
  svg += "<text x=\"4\" y=\"" + std::to_string(top + 10) + "\" font-family=\"monospace\" font-size=\"11\">" +
         fixed(100 * hi_y, 1) + "</text>\n";
  svg += "<text x=\"4\" y=\"" + std::to_string(top + ph) + "\" font-family=\"monospace\" font-size=\"11\">" +
         fixed(100 * lo_y, 1) + "</text>\n";
  return svg + "</svg>\n";
}

}  // namespace

std::string to_string(ReportKind kind) {
  return kKindNames[static_cast<std::size_t>(kind)];
}

ReportKind parse_report_kind(const std::string& text) {
  for (std::size_t k = 0; k < std::size(kKindNames); ++k) {
    if (text == kKindNames[k]) {
      return static_cast<ReportKind>(k);
    }
  }
  throw ArgumentError("unknown report kind '" + text + "'");
}

std::string to_string(ReportFormat format) {
  return kFormatNames[static_cast<std::size_t>(format)];
}

ReportFormat parse_report_format(const std::string& text) {
  for (std::size_t k = 0; k < std::size(kFormatNames); ++k) {
    if (text == kFormatNames[k]) {
      return static_cast<ReportFormat>(k);
    }
  }
  throw ArgumentError("unknown report format '" + text + "'");
}

const ReportCell* Report::find(const std::string& row, const std::string& col) const {
  for (const auto& c : cells) {
    if (c.row == row && c.col == col) {
      return &c;
    }
  }
  return nullptr;
}

void check_records(const std::vector<RunRecord>& records, const std::optional<std::string>& suite_fingerprint) {
  std::vector<std::string> stale;
  for (const auto& r : records) {
    auto suite = r.params.find("suite");
    auto key = r.params.find("key");
    const bool ok = suite != r.params.end() && key != r.params.end() &&
                    (!suite_fingerprint || suite->second == *suite_fingerprint) &&
                    r.fingerprint == hex_digest(suite->second + "|" + key->second);
    if (!ok) {
      stale.push_back(r.id);
    }
  }
  if (!stale.empty()) {
    std::string msg = std::to_string(stale.size()) + " stale record(s):";
    for (const auto& id : stale) {
      msg += "\n  " + id;
    }
    throw StaleRecordError(msg, stale);
  }
}

void check_mask_provenance(const std::vector<RunRecord>& records, const std::filesystem::path& out) {
  std::vector<std::string> bad;
  for (const auto& r : records) {
    auto it = r.artifacts.find("mask");
    if (it == r.artifacts.end()) {
      continue;
    }
    const auto path = out / it->second;
    if (!std::filesystem::exists(path)) {
      bad.push_back(r.id + " (missing " + it->second + ")");
      continue;
    }
    const Mask m = load_mask(path);
    if (m.meta.producer.empty() || m.meta.spec_hash.empty() || m.meta.method.empty()) {
      bad.push_back(r.id + " (unlabeled mask " + it->second + ")");
    }
  }
  if (!bad.empty()) {
    std::string msg = "records reference masks without provenance:";
    for (const auto& b : bad) {
      msg += "\n  " + b;
    }
    throw StaleRecordError(msg, bad);
  }
}

Report build_report(ReportKind kind, const std::vector<RunRecord>& records, const ReportOptions& options) {
  switch (kind) {
    case ReportKind::table2:
      return table2(records, options);
    case ReportKind::table3:
      return table3(records);
    case ReportKind::table4:
      return table4(records, options);
    case ReportKind::fig1:
      return fig1(records);
    case ReportKind::fig2:
      return fig2(records, options);
    case ReportKind::fig3:
      return fig3(records);
    case ReportKind::fig4:
      return fig4(records);
    case ReportKind::overlap_heatmap:
      return overlap_heatmap(records);
    case ReportKind::datasize:
      return datasize(records);
  }
  throw ArgumentError("unknown report kind");
}

std::string to_csv(const Report& report, bool trace) {
  std::string out = "row,col,value,n,mean,std,median,best";
  for (const auto& f : report.flag_names) {
    out += "," + f;
  }
  if (trace) {
    out += ",records";
  }
  out += "\n";
  for (const auto& c : report.cells) {
    out += csv_field(c.row) + "," + csv_field(c.col) + "," + num(c.value) + "," + std::to_string(c.stats.n) + "," +
           num(c.stats.mean) + "," + num(c.stats.std) + "," + num(c.stats.median) + "," + num(c.stats.best);
    for (const auto& f : report.flag_names) {
      auto it = c.flags.find(f);
      out += "," + csv_field(it == c.flags.end() ? "" : it->second);
    }
    if (trace) {
      std::string ids;
      for (std::size_t k = 0; k < c.ids.size(); ++k) {
        ids += (k ? ";" : "") + c.ids[k];
      }
      out += "," + csv_field(ids);
    }
    out += "\n";
  }
  return out;
}

std::string to_text(const Report& report) {
  std::size_t w0 = 4;
  for (const auto& r : report.rows) {
    w0 = std::max(w0, r.size());
  }
  std::vector<std::size_t> widths;
  for (const auto& col : report.cols) {
    std::size_t w = col.size();
    for (const auto& c : report.cells) {
      if (c.col == col) {
        w = std::max(w, c.display.size() + (is_verdict_yes(c) ? 1 : 0));
      }
    }
    widths.push_back(w);
  }
  auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };
  std::string out = report.title + "\n" + pad("", w0);
  for (std::size_t k = 0; k < report.cols.size(); ++k) {
    out += "  " + pad(report.cols[k], widths[k]);
  }
  out += "\n";
  for (const auto& row : report.rows) {
    out += pad(row, w0);
    for (std::size_t k = 0; k < report.cols.size(); ++k) {
      const ReportCell* c = report.find(row, report.cols[k]);
      std::string s = c == nullptr ? "-" : c->display + (is_verdict_yes(*c) ? "*" : "");
      out += "  " + pad(s, widths[k]);
    }
    out += "\n";
  }
  bool any = false;
  for (const auto& c : report.cells) {
    any = any || is_verdict_yes(c);
  }
  if (any) {
    out += "* winning ticket against the full model\n";
  }
  return out;
}

std::string to_svg(const Report& report) {
  if (report.kind == ReportKind::fig1) {
    return line_chart(report);
  }
  const int cw = 96, ch = 32, left = 170, top = 60;
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const auto& c : report.cells) {
    if (c.col == "count" || c.col == "sparsity") {
      continue;
    }
    lo = first ? c.value : std::min(lo, c.value);
    hi = first ? c.value : std::max(hi, c.value);
    first = false;
  }
  const int w = left + cw * static_cast<int>(report.cols.size()) + 20;
  const int h = top + ch * static_cast<int>(report.rows.size()) + 40;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
                    std::to_string(h) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"10\" y=\"20\" font-family=\"monospace\" font-size=\"12\">" + xml_escape(report.title) + "</text>\n";
  for (std::size_t k = 0; k < report.cols.size(); ++k) {
    svg += "<text x=\"" + std::to_string(left + cw * static_cast<int>(k) + 4) + "\" y=\"" + std::to_string(top - 8) +
           "\" font-family=\"monospace\" font-size=\"10\">" + xml_escape(report.cols[k]) + "</text>\n";
  }
  for (std::size_t r = 0; r < report.rows.size(); ++r) {
    const int y = top + ch * static_cast<int>(r);
    svg += "<text x=\"6\" y=\"" + std::to_string(y + ch / 2 + 4) + "\" font-family=\"monospace\" font-size=\"10\">" +
           xml_escape(report.rows[r]) + "</text>\n";
    for (std::size_t k = 0; k < report.cols.size(); ++k) {
      const ReportCell* c = report.find(report.rows[r], report.cols[k]);
      if (c == nullptr) {
        continue;
      }
      const int x = left + cw * static_cast<int>(k);
      const bool plain = c->col == "count" || c->col == "sparsity";
      // Lighter is lower: gray level falls linearly from 245 at the minimum to 40 at the maximum.
      const double t = plain || !(hi > lo) ? 0.0 : (c->value - lo) / (hi - lo);
      const int g = static_cast<int>(std::lround(245.0 - 205.0 * t));
      const std::string fill = "rgb(" + std::to_string(g) + "," + std::to_string(g) + "," + std::to_string(g) + ")";
      const bool outline = is_verdict_yes(*c);
      svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" + std::to_string(cw) +
             "\" height=\"" + std::to_string(ch) + "\" fill=\"" + fill + "\" stroke=\"" +
             (outline ? "black\" stroke-width=\"3\"" : "white\" stroke-width=\"1\"") + "/>\n";
      svg += "<text x=\"" + std::to_string(x + 6) + "\" y=\"" + std::to_string(y + ch / 2 + 4) +
             "\" font-family=\"monospace\" font-size=\"10\" fill=\"" + (t > 0.55 ? "white" : "black") + "\">" +
             xml_escape(c->display) + "</text>\n";
    }
  }
  svg += "<text x=\"6\" y=\"" + std::to_string(h - 12) +
         "\" font-family=\"monospace\" font-size=\"10\">shade: linear in value, light = " + xml_escape(num(lo)) +
         ", dark = " + xml_escape(num(hi)) + "; outlined = winning ticket</text>\n";
  return svg + "</svg>\n";
}

}  // namespace lottery
