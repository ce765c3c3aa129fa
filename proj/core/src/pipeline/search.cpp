#include "holofuse/pipeline/search.hpp"

#include "holofuse/errors.hpp"
#include "holofuse/random.hpp"

namespace holofuse::pipeline {

std::vector<RunConfig> random_search(const RunConfig& base, const SearchSpace& space, std::size_t trials,
                                     std::uint64_t seed) {
  for (const auto& [key, values] : space.choices) {
    if (values.empty()) throw ConfigError("search: no candidates for '" + key + "'");
  }
  std::vector<RunConfig> out;
  out.reserve(trials);
  for (std::size_t i = 0; i < trials; ++i) {
    Rng rng = make_stream(seed, "search/trial" + std::to_string(i));
    RunConfig c = base;
    for (const auto& [key, values] : space.choices) {
      apply_setting(c, key, values[uniform_index(rng, values.size())]);
    }
    c.resolve();
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace holofuse::pipeline
