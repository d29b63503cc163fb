#include "lottery/experiments/stats.hpp"

#include <algorithm>
#include <cmath>

#include "lottery/errors.hpp"

namespace lottery {

Summary summarize(std::span<const double> values) {
  Summary s;
  s.n = values.size();
  if (values.empty()) {
    return s;
  }
  double sum = 0.0;
  for (double v : values) {
    sum += v;
  }
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) {
      ss += (v - s.mean) * (v - s.mean);
    }
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = s.n / 2;
  s.median = s.n % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  s.best = sorted.back();
  return s;
}

std::string to_string(Criterion c) {
  return c == Criterion::strict ? "strict" : "one-stddev";
}

Criterion parse_criterion(const std::string& text) {
  if (text == "strict") {
    return Criterion::strict;
  }
  if (text == "one-stddev") {
    return Criterion::one_stddev;
  }
  throw ArgumentError("unknown criterion '" + text + "' (expected one-stddev or strict)");
}

Verdict winning_verdict(const Summary& sub, const Summary& full, Criterion criterion) {
  Verdict v;
  v.sub = sub;
  v.full = full;
  v.margin = sub.mean - full.mean;
  v.one_stddev = sub.mean >= full.mean - full.std;
  v.strict = sub.mean >= full.mean;
  v.winning = criterion == Criterion::strict ? v.strict : v.one_stddev;
  return v;
}

Verdict winning_ticket_check(std::span<const double> sub, std::span<const double> full, Criterion criterion) {
  if (sub.empty() || full.empty()) {
    throw ArgumentError("winning-ticket check needs at least one run on each side");
  }
  if (criterion == Criterion::one_stddev && full.size() < 2) {
    throw ArgumentError("one-stddev criterion needs at least 2 full-model runs");
  }
  return winning_verdict(summarize(sub), summarize(full), criterion);
}

}  // namespace lottery
