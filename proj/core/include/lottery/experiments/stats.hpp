#pragma once

#include <span>
#include <string>
#include <vector>

namespace lottery {

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 when n < 2
  double median = 0.0;
  double best = 0.0;
};

Summary summarize(std::span<const double> values);

enum class Criterion : std::uint8_t { one_stddev, strict };

std::string to_string(Criterion c);
Criterion parse_criterion(const std::string& text);

struct Verdict {
  bool winning = false;     // under the requested criterion
  bool one_stddev = false;  // mean(sub) >= mean(full) - std(full)
  bool strict = false;      // mean(sub) >= mean(full)
  Summary sub;
  Summary full;
  double margin = 0.0;  // mean(sub) - mean(full)
};

// Verdict from summary statistics of the two populations.
Verdict winning_verdict(const Summary& sub, const Summary& full, Criterion criterion);

// Throws ArgumentError when the one-stddev criterion is requested with fewer
// than 2 full-model runs, or when either list is empty.
Verdict winning_ticket_check(std::span<const double> sub, std::span<const double> full,
                             Criterion criterion = Criterion::one_stddev);

}  // namespace lottery
