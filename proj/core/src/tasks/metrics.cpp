#include "lottery/tasks/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "lottery/errors.hpp"

namespace lottery {

std::string to_string(MetricId id) {
  switch (id) {
    case MetricId::accuracy:
      return "accuracy";
    case MetricId::f1:
      return "f1";
    case MetricId::mcc:
      return "mcc";
    case MetricId::pearson:
      return "pearson";
    case MetricId::spearman:
      return "spearman";
    case MetricId::masked_accuracy:
      return "masked-accuracy";
  }
  return "unknown";
}

MetricId parse_metric(const std::string& text) {
  for (MetricId id : {MetricId::accuracy, MetricId::f1, MetricId::mcc, MetricId::pearson,
                      MetricId::spearman, MetricId::masked_accuracy}) {
    if (to_string(id) == text) {
      return id;
    }
  }
  throw ArgumentError("unknown metric '" + text + "'");
}

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ArgumentError("metric inputs differ in length: " + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()));
  }
  if (a.size() < 2) {
    throw ArgumentError("metrics need at least 2 items, got " + std::to_string(a.size()));
  }
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) {
      ++j;
    }
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      ranks[order[k]] = rank;
    }
    i = j + 1;
  }
  return ranks;
}

}  // namespace

MetricValue accuracy(std::span<const double> pred, std::span<const double> ref) {
  check_lengths(pred, ref);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    hit += pred[i] == ref[i] ? 1 : 0;
  }
  return {static_cast<double>(hit) / static_cast<double>(pred.size()), false};
}

MetricValue f1_binary(std::span<const double> pred, std::span<const double> ref) {
  check_lengths(pred, ref);
  double tp = 0;
  double fp = 0;
  double fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] == 1.0;
    const bool r = ref[i] == 1.0;
    tp += (p && r) ? 1 : 0;
    fp += (p && !r) ? 1 : 0;
    fn += (!p && r) ? 1 : 0;
  }
  const double denom = 2 * tp + fp + fn;
  if (denom == 0) {
    return {0.0, true};
  }
  return {2 * tp / denom, false};
}

MetricValue matthews(std::span<const double> pred, std::span<const double> ref) {
  check_lengths(pred, ref);
  std::map<double, std::size_t> index;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    index.emplace(pred[i], 0);
    index.emplace(ref[i], 0);
  }
  std::size_t k = 0;
  for (auto& [label, id] : index) {
    id = k++;
  }
  std::vector<double> p(k, 0.0);  // predicted counts
  std::vector<double> t(k, 0.0);  // true counts
  double correct = 0.0;
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    p[index[pred[i]]] += 1;
    t[index[ref[i]]] += 1;
    correct += pred[i] == ref[i] ? 1 : 0;
  }
  double pt = 0.0;
  double pp = 0.0;
  double tt = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    pt += p[c] * t[c];
    pp += p[c] * p[c];
    tt += t[c] * t[c];
  }
  const double denom = std::sqrt(n * n - pp) * std::sqrt(n * n - tt);
  if (denom == 0.0) {
    return {0.0, true};
  }
  return {(correct * n - pt) / denom, false};
}

MetricValue pearson(std::span<const double> x, std::span<const double> y) {
  check_lengths(x, y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    return {0.0, true};
  }
  const double r = sxy / std::sqrt(sxx * syy);
  return {std::clamp(r, -1.0, 1.0), false};
}

MetricValue spearman(std::span<const double> x, std::span<const double> y) {
  check_lengths(x, y);
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  return pearson(rx, ry);
}

MetricValue metric(std::span<const double> pred, std::span<const double> ref, MetricId id) {
  switch (id) {
    case MetricId::accuracy:
    case MetricId::masked_accuracy:
      return accuracy(pred, ref);
    case MetricId::f1:
      return f1_binary(pred, ref);
    case MetricId::mcc:
      return matthews(pred, ref);
    case MetricId::pearson:
      return pearson(pred, ref);
    case MetricId::spearman:
      return spearman(pred, ref);
  }
  throw ArgumentError("unknown metric");
}

}  // namespace lottery
