// Converts a Recording's two irregular raw streams into time-aligned,
// uniformly sampled 50 Hz streams: overlap truncation, linear interpolation
// onto a shared 20 ms grid, alignment.
#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "bcgauth/sensor_model.hpp"

namespace bcgauth {

// Uniformly sampled 3-axis stream. Implied timestamp of sample i is
// start_ms + i * 20.
struct UniformStream {
  static constexpr int rate_hz = 50;
  static constexpr std::int64_t step_ms = 20;

  std::int64_t start_ms = 0;
  std::array<std::vector<double>, 3> channels;

  std::size_t length() const { return channels[0].size(); }
};

// Accel and gyro on the identical grid: same start, same length.
struct AlignedPair {
  UniformStream accel;
  UniformStream gyro;
};

// Trims both streams to their common time window [max(first), min(last)],
// then drops further boundary samples while doing so strictly shrinks the
// gap between the streams' first (resp. last) timestamps.
std::pair<RawStream, RawStream> truncate_overlap(const RawStream& accel,
                                                 const RawStream& gyro);

// Linear interpolation onto the grid grid_start_ms + i*20, i < n_samples.
// Grid instants equal to raw timestamps reproduce the raw values exactly.
UniformStream resample_uniform(const RawStream& stream,
                               std::int64_t grid_start_ms,
                               std::size_t n_samples);

AlignedPair align(const Recording& rec);

}  // namespace bcgauth
