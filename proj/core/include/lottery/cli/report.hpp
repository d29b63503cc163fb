#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lottery/errors.hpp"
#include "lottery/experiments/records.hpp"
#include "lottery/experiments/stats.hpp"

namespace lottery {

enum class ReportKind : std::uint8_t { table2, table3, table4, fig1, fig2, fig3, fig4, overlap_heatmap, datasize };
enum class ReportFormat : std::uint8_t { csv, svg, text };

std::string to_string(ReportKind kind);
ReportKind parse_report_kind(const std::string& text);
std::string to_string(ReportFormat format);
ReportFormat parse_report_format(const std::string& text);

struct ReportOptions {
  Criterion criterion = Criterion::one_stddev;
  // table2: report every task at this sparsity instead of its winning sparsity.
  std::optional<double> sparsity;
};

/// One value of a report with the statistics it was computed from. `ids`
/// lists the records that contributed.
struct ReportCell {
  std::string row;
  std::string col;
  Summary stats;
  double value = 0.0;  // what the cell shows (a mean, difference, count, ...)
  std::string display; // terminal rendering of value
  std::vector<std::string> ids;
  std::map<std::string, std::string> flags;
};

struct Report {
  ReportKind kind = ReportKind::table2;
  std::string title;
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  std::vector<ReportCell> cells;
  std::vector<std::string> flag_names;  // CSV columns drawn from ReportCell::flags

  const ReportCell* find(const std::string& row, const std::string& col) const;
};

// Thrown when records do not belong to the expected suite or their
// fingerprints do not match their keys. The message lists the stale ids.
class StaleRecordError : public Error {
 public:
  StaleRecordError(const std::string& message, std::vector<std::string> ids)
      : Error(message), ids_(std::move(ids)) {}
  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  std::vector<std::string> ids_;
};

// Refuses records whose suite fingerprint differs from `suite_fingerprint`
// (when given) or whose fingerprint is not the digest of suite and key.
void check_records(const std::vector<RunRecord>& records, const std::optional<std::string>& suite_fingerprint);
// Refuses records whose mask artifact is missing or carries no provenance.
void check_mask_provenance(const std::vector<RunRecord>& records, const std::filesystem::path& out);

// Recomputes the report from raw records.
Report build_report(ReportKind kind, const std::vector<RunRecord>& records, const ReportOptions& options = {});

// One CSV line per cell: row, col, value, n, mean, std, median, best, flags
// and, with `trace`, the contributing record ids.
std::string to_csv(const Report& report, bool trace = false);
std::string to_text(const Report& report);
// Grayscale heatmap for matrix reports (lighter is lower, linear between the
// smallest and largest value), verdict cells outlined; line chart for fig1.
std::string to_svg(const Report& report);

}  // namespace lottery
