#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "holofuse/pipeline/config.hpp"

namespace holofuse::pipeline {

// Candidate values per config key, in the text form apply_setting() takes.
struct SearchSpace {
  std::vector<std::pair<std::string, std::vector<std::string>>> choices;
};

// Seeded random search: trial i draws one candidate per key from the stream
// "search/trial<i>" and applies them on top of `base`. Every returned config
// is resolved; ConfigError for unknown keys, empty candidate lists or invalid
// combinations.
[[nodiscard]] std::vector<RunConfig> random_search(const RunConfig& base, const SearchSpace& space,
                                                   std::size_t trials, std::uint64_t seed);

}  // namespace holofuse::pipeline
