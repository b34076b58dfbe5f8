// Turns an aligned sensor pair into per-segment BCG waveforms and CNN input
// tensors. Stages per segment, in order: per-channel normalization to zero
// mean / unit variance, centered 35-sample rolling-average detrend, causal
// 4th-order Butterworth band-pass (4-11 Hz), then 2x3x(w*50) tensor layout.
#pragma once

#include <array>
#include <complex>
#include <filesystem>
#include <vector>

#include "bcgauth/preprocess.hpp"

namespace bcgauth {

struct PipelineConfig {
  static constexpr int rate_hz = 50;

  int w_s = 3;               // segment length in seconds
  int rolling_window = 35;   // samples in the rolling-average detrend
  double band_low_hz = 4.0;
  double band_high_hz = 11.0;
  int filter_order = 4;      // analog prototype order
  double norm_epsilon = 1e-12;

  int samples_per_segment() const { return w_s * rate_hz; }

  // 0 < low < high < rate/2, w_s >= 1, rolling_window <= w_s * rate.
  void validate() const;
};

// One w-second window: six channels (accel x,y,z then gyro x,y,z) of
// w*50 samples each. Channels whose variance vanished during
// normalization are zeroed and flagged degenerate.
struct Segment {
  int index = 0;
  std::array<std::vector<double>, 6> channels;
  std::array<bool, 6> degenerate{};

  std::size_t length() const { return channels[0].size(); }
};

// CNN input: dim0 = sensor source (0 accel, 1 gyro), dim1 = axis,
// dim2 = time.
struct SegmentTensor {
  int time_len = 0;
  std::vector<double> data;  // size 2*3*time_len, row-major [sensor][axis][t]

  double& at(int sensor, int axis, int t) {
    return data[static_cast<std::size_t>((sensor * 3 + axis)) * time_len + t];
  }
  double at(int sensor, int axis, int t) const {
    return data[static_cast<std::size_t>((sensor * 3 + axis)) * time_len + t];
  }
};

// Direct-form transfer function of the designed band-pass. For an order-N
// analog prototype the digital polynomials have degree 2N (2N+1
// coefficients each); a[0] == 1.
struct BandPassFilter {
  std::vector<double> b;
  std::vector<double> a;
  int order = 4;
  double design_low_hz = 4.0;
  double design_high_hz = 11.0;
  int design_rate_hz = 50;
  std::vector<std::complex<double>> poles;  // digital poles, |p| < 1
};

// Overlapped windowing: segment i covers seconds [i, i+w), so consecutive
// segments share w-1 seconds.
std::vector<Segment> segmentize(const AlignedPair& pair,
                                const PipelineConfig& cfg);

// Per-channel zero mean, unit (sample) variance. Channels with variance
// below norm_epsilon become all zeros and are flagged.
Segment normalize_segment(const Segment& seg, const PipelineConfig& cfg);

// output[i] = input[i] - mean(input over the window centered at i, clipped
// at the segment edges).
Segment rolling_average_detrend(const Segment& seg, const PipelineConfig& cfg);

// Digital Butterworth band-pass: bilinear transform with frequency
// pre-warping from an order-N analog low-pass prototype through the
// low-pass -> band-pass mapping.
BandPassFilter design_bandpass(const PipelineConfig& cfg);

// Causal direct-form filtering, zero initial state, each channel
// independently.
Segment apply_filter(const BandPassFilter& filter, const Segment& seg);

// normalize -> detrend -> band-pass, in that order.
Segment derive_bcg(const Segment& seg, const BandPassFilter& filter,
                   const PipelineConfig& cfg);

SegmentTensor to_tensor(const Segment& bcg);
Segment tensor_to_segment(const SegmentTensor& tensor);

// H(e^{j 2 pi f / rate}) evaluated from the designed coefficients.
std::complex<double> filter_response(const BandPassFilter& filter,
                                     double freq_hz);

// Debug dump: sample_index, ax, ay, az, gx, gy, gz.
void dump_segment_csv(const Segment& seg, const std::filesystem::path& path);

}  // namespace bcgauth
