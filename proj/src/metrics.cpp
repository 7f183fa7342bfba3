#include "adaptkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "adaptkit/errors.hpp"

namespace adaptkit {

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::accuracy:
      return "accuracy";
    case Metric::f1:
      return "f1";
    case Metric::spearman:
      return "spearman";
  }
  return "unknown";
}

Metric parse_metric(std::string_view name) {
  for (auto m : {Metric::accuracy, Metric::f1, Metric::spearman})
    if (metric_name(m) == name) return m;
  throw ValidationError("unknown metric '" + std::string(name) + "'");
}

namespace {
void check_sizes(std::size_t a, std::size_t b) {
  if (a == 0) throw ValidationError("metric over an empty split");
  if (a != b)
    throw ValidationError("metric: " + std::to_string(a) + " predictions vs " +
                          std::to_string(b) + " labels");
}

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}
}  // namespace

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  check_sizes(predictions.size(), labels.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double f1_binary(std::span<const int> predictions, std::span<const int> labels) {
  check_sizes(predictions.size(), labels.size());
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predictions[i] == 1, g = labels[i] == 1;
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
  }
  if (tp + fp == 0 || tp + fn == 0 || tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

double spearman(std::span<const double> predictions, std::span<const double> labels) {
  check_sizes(predictions.size(), labels.size());
  const auto rp = ranks(predictions), rl = ranks(labels);
  const double n = static_cast<double>(rp.size());
  const double mp = std::accumulate(rp.begin(), rp.end(), 0.0) / n;
  const double ml = std::accumulate(rl.begin(), rl.end(), 0.0) / n;
  double cov = 0.0, vp = 0.0, vl = 0.0;
  for (std::size_t i = 0; i < rp.size(); ++i) {
    cov += (rp[i] - mp) * (rl[i] - ml);
    vp += (rp[i] - mp) * (rp[i] - mp);
    vl += (rl[i] - ml) * (rl[i] - ml);
  }
  if (vp == 0.0 || vl == 0.0) return 0.0;
  return std::clamp(cov / std::sqrt(vp * vl), -1.0, 1.0);
}

}  // namespace adaptkit
