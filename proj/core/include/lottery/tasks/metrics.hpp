#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace lottery {

enum class MetricId : std::uint8_t { accuracy, f1, mcc, pearson, spearman, masked_accuracy };

std::string to_string(MetricId id);
MetricId parse_metric(const std::string& text);

struct MetricValue {
  double value = 0.0;
  // Set when the denominator was zero and the sentinel 0 was returned.
  bool undefined = false;
};

// Class predictions and references are passed as doubles holding integers.
// Binary F1 and MCC treat 1 as the positive class; MCC generalizes to k
// classes through the confusion-matrix form.
MetricValue accuracy(std::span<const double> pred, std::span<const double> ref);
MetricValue f1_binary(std::span<const double> pred, std::span<const double> ref);
MetricValue matthews(std::span<const double> pred, std::span<const double> ref);
MetricValue pearson(std::span<const double> x, std::span<const double> y);
// Pearson correlation of average ranks (ties share the mean of their positions).
MetricValue spearman(std::span<const double> x, std::span<const double> y);

// Throws ArgumentError on length mismatch or fewer than 2 items.
MetricValue metric(std::span<const double> pred, std::span<const double> ref, MetricId id);

// Reports quote metrics in points: 100 x value.
inline double points(double value) noexcept { return 100.0 * value; }

}  // namespace lottery
