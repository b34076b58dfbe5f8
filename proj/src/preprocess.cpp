#include "bcgauth/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "bcgauth/errors.hpp"

namespace bcgauth {

namespace {

std::int64_t gap(const RawStream& a, const RawStream& b, bool front) {
  return front ? std::llabs(a.first_ms() - b.first_ms())
               : std::llabs(a.last_ms() - b.last_ms());
}

// Drops boundary samples while each drop strictly shrinks the gap between
// the two streams' first (or last) timestamps.
void tighten(RawStream& a, RawStream& b, bool front) {
  while (true) {
    RawStream* earlier;
    RawStream* other;
    if (front) {
      earlier = a.first_ms() < b.first_ms() ? &a : &b;
      other = earlier == &a ? &b : &a;
    } else {
      earlier = a.last_ms() > b.last_ms() ? &a : &b;
      other = earlier == &a ? &b : &a;
    }
    if (earlier->size() < 2) return;
    const std::int64_t current = gap(a, b, front);
    if (current == 0) return;
    const std::int64_t candidate =
        front ? std::llabs(earlier->samples[1].timestamp_ms - other->first_ms())
              : std::llabs(earlier->samples[earlier->size() - 2].timestamp_ms -
                           other->last_ms());
    if (candidate >= current) return;
    if (front)
      earlier->samples.erase(earlier->samples.begin());
    else
      earlier->samples.pop_back();
  }
}

}  // namespace

std::pair<RawStream, RawStream> truncate_overlap(const RawStream& accel,
                                                 const RawStream& gyro) {
  if (accel.empty() || gyro.empty())
    fail(ErrorKind::TooShort, "truncate_overlap: empty input stream");
  accel.validate();
  gyro.validate();

  const std::int64_t lo = std::max(accel.first_ms(), gyro.first_ms());
  const std::int64_t hi = std::min(accel.last_ms(), gyro.last_ms());
  if (lo > hi)
    fail(ErrorKind::NoOverlap,
         "truncate_overlap: streams share no time window (accel [" +
             std::to_string(accel.first_ms()) + ", " +
             std::to_string(accel.last_ms()) + "] ms, gyro [" +
             std::to_string(gyro.first_ms()) + ", " +
             std::to_string(gyro.last_ms()) + "] ms)");

  auto clip = [lo, hi](const RawStream& in) {
    RawStream out;
    out.kind = in.kind;
    for (const auto& s : in.samples)
      if (s.timestamp_ms >= lo && s.timestamp_ms <= hi)
        out.samples.push_back(s);
    return out;
  };
  RawStream a = clip(accel);
  RawStream g = clip(gyro);
  if (a.empty() || g.empty())
    fail(ErrorKind::NoOverlap,
         "truncate_overlap: no samples inside the shared window");

  tighten(a, g, /*front=*/true);
  tighten(a, g, /*front=*/false);
  return {std::move(a), std::move(g)};
}

UniformStream resample_uniform(const RawStream& stream,
                               std::int64_t grid_start_ms,
                               std::size_t n_samples) {
  if (stream.empty())
    fail(ErrorKind::TooShort, "resample_uniform: empty input stream");
  stream.validate();

  const std::int64_t grid_end_ms =
      grid_start_ms +
      static_cast<std::int64_t>(n_samples > 0 ? n_samples - 1 : 0) *
          UniformStream::step_ms;
  if (grid_start_ms < stream.first_ms() || grid_end_ms > stream.last_ms())
    fail(ErrorKind::Extrapolation,
         "resample_uniform: grid [" + std::to_string(grid_start_ms) + ", " +
             std::to_string(grid_end_ms) + "] ms outside raw range [" +
             std::to_string(stream.first_ms()) + ", " +
             std::to_string(stream.last_ms()) + "] ms");

  UniformStream out;
  out.start_ms = grid_start_ms;
  for (auto& channel : out.channels) channel.reserve(n_samples);

  std::size_t right = 0;  // first raw sample with timestamp >= grid instant
  for (std::size_t i = 0; i < n_samples; ++i) {
    const std::int64_t t = grid_start_ms +
                           static_cast<std::int64_t>(i) * UniformStream::step_ms;
    while (stream.samples[right].timestamp_ms < t) ++right;
    const RawSample& hi = stream.samples[right];
    if (hi.timestamp_ms == t) {
      out.channels[0].push_back(hi.x);
      out.channels[1].push_back(hi.y);
      out.channels[2].push_back(hi.z);
      continue;
    }
    const RawSample& lo = stream.samples[right - 1];
    const double w = static_cast<double>(t - lo.timestamp_ms) /
                     static_cast<double>(hi.timestamp_ms - lo.timestamp_ms);
    out.channels[0].push_back(lo.x + w * (hi.x - lo.x));
    out.channels[1].push_back(lo.y + w * (hi.y - lo.y));
    out.channels[2].push_back(lo.z + w * (hi.z - lo.z));
  }
  return out;
}

AlignedPair align(const Recording& rec) {
  auto [accel, gyro] = truncate_overlap(rec.accel, rec.gyro);

  // Common grid: anchored at the later of the two first samples so both
  // streams can interpolate every grid instant, stepping 20 ms until the
  // earlier of the two last samples.
  const std::int64_t grid_start = std::max(accel.first_ms(), gyro.first_ms());
  const std::int64_t grid_end = std::min(accel.last_ms(), gyro.last_ms());
  if (grid_end - grid_start < UniformStream::step_ms)
    fail(ErrorKind::TooShort,
         "align: overlap of " + std::to_string(grid_end - grid_start) +
             " ms is shorter than one 20 ms grid step");
  const std::size_t n_samples = static_cast<std::size_t>(
      (grid_end - grid_start) / UniformStream::step_ms + 1);

  AlignedPair pair;
  pair.accel = resample_uniform(accel, grid_start, n_samples);
  pair.gyro = resample_uniform(gyro, grid_start, n_samples);
  return pair;
}

}  // namespace bcgauth
