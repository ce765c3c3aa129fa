#include "holofuse/pipeline/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace holofuse::pipeline {

void Confusion::add(bool predicted, bool actual) {
  if (predicted && actual) ++tp;
  else if (predicted) ++fp;
  else if (actual) ++fn;
  else ++tn;
}

Confusion& Confusion::operator+=(const Confusion& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

Metrics score(const Confusion& c) {
  const auto ratio = [](std::size_t num, std::size_t den, double empty) {
    return den == 0 ? empty : static_cast<double>(num) / static_cast<double>(den);
  };
  Metrics m;
  m.precision = ratio(c.tp, c.tp + c.fp, 0.0);
  m.sensitivity = ratio(c.tp, c.tp + c.fn, 0.0);
  m.specificity = ratio(c.tn, c.tn + c.fp, 1.0);
  const double denom = m.precision + m.sensitivity;
  m.f1 = denom > 0.0 ? 2.0 * m.precision * m.sensitivity / denom : 0.0;
  return m;
}

Distribution describe(std::span<const double> values) {
  Distribution d;
  d.count = values.size();
  if (values.empty()) return d;
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  d.median = quantile(0.5);
  d.q1 = quantile(0.25);
  d.q3 = quantile(0.75);
  d.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  return d;
}

nlohmann::json to_json(const Confusion& c) { return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}}; }

nlohmann::json to_json(const Metrics& m) {
  return {{"precision", m.precision}, {"sensitivity", m.sensitivity}, {"specificity", m.specificity}, {"f1", m.f1}};
}

nlohmann::json to_json(const Distribution& d) {
  return {{"median", d.median}, {"mean", d.mean}, {"q1", d.q1}, {"q3", d.q3}, {"count", d.count}};
}

}  // namespace holofuse::pipeline
