// Sensor stream data model: raw accelerometer/gyroscope recordings, the CSV
// stream file format, and a synthetic multi-subject generator so the whole
// pipeline can be exercised without access to real wearable data.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bcgauth/rng.hpp"

namespace bcgauth {

enum class SensorKind { Accelerometer, Gyroscope };

std::string_view sensor_kind_name(SensorKind kind);

struct RawSample {
  std::int64_t timestamp_ms = 0;  // milliseconds since recording start
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool operator==(const RawSample&) const = default;
};

// One sensor's stream. Timestamps strictly increase; the inter-sample
// interval is irregular (5-20 ms at a nominal 50 Hz rate).
struct RawStream {
  static constexpr int nominal_rate_hz = 50;

  SensorKind kind = SensorKind::Accelerometer;
  std::vector<RawSample> samples;

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
  std::int64_t first_ms() const { return samples.front().timestamp_ms; }
  std::int64_t last_ms() const { return samples.back().timestamp_ms; }

  // Throws ErrorKind::Integrity unless timestamps strictly increase.
  void validate() const;

  bool operator==(const RawStream&) const = default;
};

// One data-collection interval: paired accelerometer + gyroscope streams.
struct Recording {
  std::string subject_id;
  std::string session_id;
  RawStream accel;  // kind == Accelerometer
  RawStream gyro;   // kind == Gyroscope

  bool operator==(const Recording&) const = default;
};

// One spectral line of the synthetic pulse train: harmonic k of the cardiac
// fundamental, with its amplitude and phase.
struct HarmonicComponent {
  int harmonic = 1;
  double amplitude = 0.0;
  double phase = 0.0;

  bool operator==(const HarmonicComponent&) const = default;
};

// Parameters of one synthetic subject. The generated signal is a
// band-limited harmonic pulse train (energy inside the 4-11 Hz band the
// downstream band-pass keeps) plus slow drift and white noise.
struct SynthSubjectProfile {
  double heart_rate_hz = 1.2;
  // Channel order: accel x,y,z then gyro x,y,z.
  std::array<std::vector<HarmonicComponent>, 6> pulse_shape_coeffs;
  double noise_std = 0.25;
  double drift_rate = 0.02;  // baseline units per second, every axis
  int jitter_ms_min = 18;
  int jitter_ms_max = 20;

  // heart_rate_hz > 0, noise_std >= 0, jitter range inside [5, 20] ms.
  void validate() const;

  bool operator==(const SynthSubjectProfile&) const = default;
};

// Draws a subject-distinctive profile: a random cardiac fundamental and a
// random amplitude/phase pattern over every harmonic that lands in 4-11 Hz.
SynthSubjectProfile random_profile(Rng& rng);

// Pure function of (profile, duration, seed); emits jittered timestamps and
// the profile's pulse train + drift + noise on all six channels.
Recording synth_recording(const SynthSubjectProfile& profile,
                          double duration_s, std::uint64_t seed,
                          const std::string& subject_id = "synth",
                          const std::string& session_id = "s1");

// Recording manifest JSON {subject_id, session_id, accel_path, gyro_path}
// referencing two CSV stream files (header: timestamp_ms,x,y,z).
Recording read_recording(const std::filesystem::path& manifest_path);
void write_recording(const Recording& rec,
                     const std::filesystem::path& manifest_path);

SynthSubjectProfile read_profile(const std::filesystem::path& path);
void write_profile(const SynthSubjectProfile& profile,
                   const std::filesystem::path& path);

}  // namespace bcgauth
