#include "bcgauth/bcg_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "bcgauth/errors.hpp"
#include "bcgauth/fsio.hpp"

namespace bcgauth {

void PipelineConfig::validate() const {
  if (w_s < 1) fail(ErrorKind::Config, "pipeline: w_s must be >= 1 second");
  if (!(0.0 < band_low_hz && band_low_hz < band_high_hz &&
        band_high_hz < rate_hz / 2.0))
    fail(ErrorKind::Config,
         "pipeline: band edges must satisfy 0 < low < high < rate/2");
  if (filter_order < 1)
    fail(ErrorKind::Config, "pipeline: filter_order must be >= 1");
  if (rolling_window < 1 || rolling_window > samples_per_segment())
    fail(ErrorKind::Config,
         "pipeline: rolling_window must lie in [1, w_s * rate]");
  if (norm_epsilon <= 0.0)
    fail(ErrorKind::Config, "pipeline: norm_epsilon must be positive");
}

std::vector<Segment> segmentize(const AlignedPair& pair,
                                const PipelineConfig& cfg) {
  cfg.validate();
  const std::size_t seg_len = static_cast<std::size_t>(cfg.samples_per_segment());
  const std::size_t hop = PipelineConfig::rate_hz;  // 1 second stride
  const std::size_t n = pair.accel.length();
  if (pair.gyro.length() != n)
    fail(ErrorKind::Shape, "segmentize: accel/gyro lengths differ");
  if (n < seg_len)
    fail(ErrorKind::TooShort,
         "segmentize: " + std::to_string(n) + " samples is shorter than one " +
             std::to_string(cfg.w_s) + " s segment");

  const std::size_t n_segments = (n - seg_len) / hop + 1;
  std::vector<Segment> segments;
  segments.reserve(n_segments);
  for (std::size_t i = 0; i < n_segments; ++i) {
    Segment seg;
    seg.index = static_cast<int>(i);
    const std::size_t begin = i * hop;
    for (int c = 0; c < 3; ++c) {
      seg.channels[c].assign(pair.accel.channels[c].begin() + begin,
                             pair.accel.channels[c].begin() + begin + seg_len);
      seg.channels[3 + c].assign(pair.gyro.channels[c].begin() + begin,
                                 pair.gyro.channels[c].begin() + begin + seg_len);
    }
    segments.push_back(std::move(seg));
  }
  return segments;
}

Segment normalize_segment(const Segment& seg, const PipelineConfig& cfg) {
  Segment out = seg;
  for (int c = 0; c < 6; ++c) {
    auto& channel = out.channels[c];
    const std::size_t n = channel.size();
    if (n < 2) {
      std::fill(channel.begin(), channel.end(), 0.0);
      out.degenerate[c] = true;
      continue;
    }
    long double sum = 0.0L;
    for (const double v : channel) sum += v;
    const double mean = static_cast<double>(sum / n);
    long double ss = 0.0L;
    for (const double v : channel) {
      const long double d = v - mean;
      ss += d * d;
    }
    const double variance = static_cast<double>(ss / (n - 1));
    if (variance < cfg.norm_epsilon) {
      std::fill(channel.begin(), channel.end(), 0.0);
      out.degenerate[c] = true;
      continue;
    }
    const double inv_std = 1.0 / std::sqrt(variance);
    for (double& v : channel) v = (v - mean) * inv_std;
  }
  return out;
}

Segment rolling_average_detrend(const Segment& seg, const PipelineConfig& cfg) {
  const int window = cfg.rolling_window;
  const int half_lo = (window - 1) / 2;
  const int half_hi = window / 2;

  Segment out = seg;
  for (int c = 0; c < 6; ++c) {
    const auto& in = seg.channels[c];
    auto& dst = out.channels[c];
    const int n = static_cast<int>(in.size());
    if (n < window)
      fail(ErrorKind::TooShort,
           "rolling_average_detrend: channel of " + std::to_string(n) +
               " samples is shorter than the " + std::to_string(window) +
               "-sample window");

    // Prefix sums in extended precision; windows are clipped at the edges.
    std::vector<long double> prefix(n + 1, 0.0L);
    for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + in[i];
    for (int i = 0; i < n; ++i) {
      const int lo = std::max(0, i - half_lo);
      const int hi = std::min(n - 1, i + half_hi);
      const long double mean = (prefix[hi + 1] - prefix[lo]) / (hi - lo + 1);
      dst[i] = static_cast<double>(in[i] - mean);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Butterworth band-pass design.
//
// Order-N analog low-pass prototype -> low-pass-to-band-pass mapping ->
// bilinear transform with frequency pre-warping, so the -3 dB points land
// exactly on the requested band edges.
// ---------------------------------------------------------------------------

namespace {

using cplx = std::complex<double>;

// Expands prod (z - roots[k]) into monic polynomial coefficients, highest
// degree first.
std::vector<cplx> poly_from_roots(const std::vector<cplx>& roots) {
  std::vector<cplx> coeffs{1.0};
  for (const cplx& r : roots) {
    std::vector<cplx> next(coeffs.size() + 1, 0.0);
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      next[i] += coeffs[i];
      next[i + 1] -= coeffs[i] * r;
    }
    coeffs = std::move(next);
  }
  return coeffs;
}

cplx eval_poly(const std::vector<double>& coeffs, cplx z) {
  cplx acc = 0.0;
  for (const double c : coeffs) acc = acc * z + c;
  return acc;
}

}  // namespace

BandPassFilter design_bandpass(const PipelineConfig& cfg) {
  cfg.validate();
  const int order = cfg.filter_order;
  const double fs = PipelineConfig::rate_hz;
  const double fs2 = 2.0 * fs;

  // Pre-warped analog band edges.
  const double warped_lo = fs2 * std::tan(std::numbers::pi * cfg.band_low_hz / fs);
  const double warped_hi = fs2 * std::tan(std::numbers::pi * cfg.band_high_hz / fs);
  const double bw = warped_hi - warped_lo;
  const double w0 = std::sqrt(warped_lo * warped_hi);

  // Prototype poles on the unit circle's left half, then the band-pass
  // mapping s_lp -> (s^2 + w0^2) / (bw * s): each prototype pole splits
  // into two analog band-pass poles.
  std::vector<cplx> analog_poles;
  analog_poles.reserve(2 * order);
  for (int k = 1; k <= order; ++k) {
    const double theta =
        std::numbers::pi * (2.0 * k + order - 1.0) / (2.0 * order);
    const cplx proto(std::cos(theta), std::sin(theta));
    const cplx pb = proto * bw;
    const cplx disc = std::sqrt(pb * pb - 4.0 * w0 * w0);
    analog_poles.push_back((pb + disc) / 2.0);
    analog_poles.push_back((pb - disc) / 2.0);
  }

  // Bilinear transform. Analog zeros (N at s=0, N at infinity) map to z=1
  // and z=-1.
  std::vector<cplx> digital_poles;
  digital_poles.reserve(analog_poles.size());
  for (const cplx& s : analog_poles)
    digital_poles.push_back((fs2 + s) / (fs2 - s));

  std::vector<cplx> digital_zeros;
  digital_zeros.reserve(2 * order);
  for (int k = 0; k < order; ++k) {
    digital_zeros.emplace_back(1.0);
    digital_zeros.emplace_back(-1.0);
  }

  // Unit gain at the warped center frequency; the analog band-pass has
  // |H(j w0)| = 1 there by construction.
  const double w_center = 2.0 * std::atan(w0 / fs2);
  const cplx z0 = std::polar(1.0, w_center);
  cplx num = 1.0, den = 1.0;
  for (const cplx& z : digital_zeros) num *= (z0 - z);
  for (const cplx& p : digital_poles) den *= (z0 - p);
  const double gain = std::abs(den) / std::abs(num);

  const std::vector<cplx> b_cplx = poly_from_roots(digital_zeros);
  const std::vector<cplx> a_cplx = poly_from_roots(digital_poles);

  BandPassFilter filter;
  filter.order = order;
  filter.design_low_hz = cfg.band_low_hz;
  filter.design_high_hz = cfg.band_high_hz;
  filter.design_rate_hz = PipelineConfig::rate_hz;
  filter.poles = digital_poles;
  filter.b.reserve(b_cplx.size());
  filter.a.reserve(a_cplx.size());
  for (const cplx& c : b_cplx) filter.b.push_back(c.real() * gain);
  for (const cplx& c : a_cplx) filter.a.push_back(c.real());
  return filter;
}

std::complex<double> filter_response(const BandPassFilter& filter,
                                     double freq_hz) {
  const double w = 2.0 * std::numbers::pi * freq_hz /
                   static_cast<double>(filter.design_rate_hz);
  const cplx z = std::polar(1.0, w);
  return eval_poly(filter.b, z) / eval_poly(filter.a, z);
}

Segment apply_filter(const BandPassFilter& filter, const Segment& seg) {
  const std::size_t nb = filter.b.size();
  Segment out = seg;
  // Direct form II transposed, zero initial state per channel.
  std::vector<double> state(nb - 1);
  for (int c = 0; c < 6; ++c) {
    const auto& in = seg.channels[c];
    auto& dst = out.channels[c];
    std::fill(state.begin(), state.end(), 0.0);
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double x = in[i];
      const double y = filter.b[0] * x + state[0];
      for (std::size_t k = 1; k + 1 < nb; ++k)
        state[k - 1] = filter.b[k] * x - filter.a[k] * y + state[k];
      state[nb - 2] = filter.b[nb - 1] * x - filter.a[nb - 1] * y;
      dst[i] = y;
    }
  }
  return out;
}

Segment derive_bcg(const Segment& seg, const BandPassFilter& filter,
                   const PipelineConfig& cfg) {
  return apply_filter(filter, rolling_average_detrend(normalize_segment(seg, cfg), cfg));
}

SegmentTensor to_tensor(const Segment& bcg) {
  const std::size_t time_len = bcg.channels[0].size();
  for (const auto& channel : bcg.channels)
    if (channel.size() != time_len)
      fail(ErrorKind::Shape, "to_tensor: channels have unequal lengths");
  if (time_len == 0) fail(ErrorKind::Shape, "to_tensor: empty channels");

  SegmentTensor tensor;
  tensor.time_len = static_cast<int>(time_len);
  tensor.data.resize(6 * time_len);
  for (int c = 0; c < 6; ++c) {
    const int sensor = c / 3;
    const int axis = c % 3;
    for (std::size_t t = 0; t < time_len; ++t)
      tensor.at(sensor, axis, static_cast<int>(t)) = bcg.channels[c][t];
  }
  return tensor;
}

Segment tensor_to_segment(const SegmentTensor& tensor) {
  if (tensor.time_len <= 0 ||
      tensor.data.size() != static_cast<std::size_t>(6 * tensor.time_len))
    fail(ErrorKind::Shape, "tensor_to_segment: inconsistent tensor shape");
  Segment seg;
  for (int c = 0; c < 6; ++c) {
    seg.channels[c].resize(tensor.time_len);
    for (int t = 0; t < tensor.time_len; ++t)
      seg.channels[c][t] = tensor.at(c / 3, c % 3, t);
  }
  return seg;
}

void dump_segment_csv(const Segment& seg, const std::filesystem::path& path) {
  std::string out = "sample_index,ax,ay,az,gx,gy,gz\n";
  for (std::size_t i = 0; i < seg.length(); ++i) {
    out += std::to_string(i);
    for (int c = 0; c < 6; ++c) {
      out += ',';
      out += format_double(seg.channels[c][i]);
    }
    out += '\n';
  }
  write_text_atomic(path, out);
}

}  // namespace bcgauth
