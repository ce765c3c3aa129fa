#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "holofuse/signal/recording.hpp"

namespace holofuse::signal {

struct CurationOptions {
  std::size_t bin_count = 5;
  double minutes_per_bin = 20.0;
  double window_s = 4.0;
  double delta_low_hz = 0.5;
  double delta_high_hz = 4.0;
  // Non-ictal windows this close to a seizure are not eligible; ictal events
  // are exported with this much context on each side.
  double ictal_context_s = 60.0;
  std::uint64_t seed = 0;
};

struct CurationSource {
  std::string path;
  const Recording* recording = nullptr;
};

struct CuratedSegment {
  std::string source;
  double start_s = 0.0;
  double end_s = 0.0;
  int bin = -1;  // -1 for ictal events with context
  bool ictal = false;
};

struct CuratedDataset {
  std::string subject_id;
  std::vector<CuratedSegment> segments;
  // Upper delta-power edge of each quantile bin.
  std::vector<double> bin_upper_power;
  std::vector<double> seconds_per_bin;
};

// Mean over channels of the Hann-windowed periodogram power in [low, high] Hz.
[[nodiscard]] double delta_power(const Recording& rec, std::size_t start, std::size_t length, double low_hz,
                                 double high_hz);

// Throws DataError naming the shortfall when there is too little non-ictal data.
[[nodiscard]] CuratedDataset delta_curate(std::span<const CurationSource> sources, const CurationOptions& options = {});

[[nodiscard]] nlohmann::json to_json(const CuratedDataset& dataset);

}  // namespace holofuse::signal
