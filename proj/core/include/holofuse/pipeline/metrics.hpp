#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace holofuse::pipeline {

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  void add(bool predicted, bool actual);
  Confusion& operator+=(const Confusion& o);
  [[nodiscard]] std::size_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

// Window-level scores. F1 is 0 when precision and recall are both 0;
// ratios with an empty denominator are 0 (precision, recall) or 1 (specificity
// with no negatives).
struct Metrics {
  double precision = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double f1 = 0.0;
};

[[nodiscard]] Metrics score(const Confusion& c);

struct Distribution {
  double median = 0.0;
  double mean = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  std::size_t count = 0;
};

// Quartiles by linear interpolation between order statistics.
[[nodiscard]] Distribution describe(std::span<const double> values);

[[nodiscard]] nlohmann::json to_json(const Confusion& c);
[[nodiscard]] nlohmann::json to_json(const Metrics& m);
[[nodiscard]] nlohmann::json to_json(const Distribution& d);

}  // namespace holofuse::pipeline
