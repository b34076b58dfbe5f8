#include "bcgauth/bcg_pipeline.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "bcgauth/errors.hpp"
#include "bcgauth/rng.hpp"
#include "test_util.hpp"

using namespace bcgauth;

namespace {

AlignedPair uniform_pair(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  AlignedPair pair;
  for (int c = 0; c < 3; ++c) {
    pair.accel.channels[c].resize(n);
    pair.gyro.channels[c].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      pair.accel.channels[c][i] = rng.uniform(-1.0, 1.0);
      pair.gyro.channels[c][i] = rng.uniform(-1.0, 1.0);
    }
  }
  return pair;
}

Segment random_segment(std::size_t n, Rng& rng, double scale = 1.0) {
  Segment seg;
  for (auto& channel : seg.channels) {
    channel.resize(n);
    for (auto& v : channel) v = scale * rng.uniform(-1.0, 1.0);
  }
  return seg;
}

// Independent O(n*window) oracle for the centered, edge-clipped rolling mean.
std::vector<double> brute_force_detrend(const std::vector<double>& in,
                                        int window) {
  const int n = static_cast<int>(in.size());
  const int half_lo = (window - 1) / 2;
  const int half_hi = window / 2;
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half_lo);
    const int hi = std::min(n - 1, i + half_hi);
    double sum = 0.0;
    for (int j = lo; j <= hi; ++j) sum += in[j];
    out[i] = in[i] - sum / (hi - lo + 1);
  }
  return out;
}

// Durand-Kerner root finder for a real polynomial (highest degree first).
std::vector<std::complex<double>> polynomial_roots(
    const std::vector<double>& coeffs) {
  using cplx = std::complex<double>;
  const std::size_t degree = coeffs.size() - 1;
  std::vector<cplx> monic(coeffs.begin() + 1, coeffs.end());
  for (auto& c : monic) c /= coeffs[0];

  auto eval = [&](cplx z) {
    cplx acc = 1.0;
    for (const cplx& c : monic) acc = acc * z + c;
    return acc;
  };

  std::vector<cplx> roots(degree);
  for (std::size_t i = 0; i < degree; ++i)
    roots[i] = std::pow(cplx(0.4, 0.9), static_cast<double>(i + 1));
  for (int iter = 0; iter < 200; ++iter) {
    double moved = 0.0;
    for (std::size_t i = 0; i < degree; ++i) {
      cplx denom = 1.0;
      for (std::size_t j = 0; j < degree; ++j)
        if (j != i) denom *= roots[i] - roots[j];
      const cplx delta = eval(roots[i]) / denom;
      roots[i] -= delta;
      moved = std::max(moved, std::abs(delta));
    }
    if (moved < 1e-13) break;
  }
  return roots;
}

PipelineConfig default_cfg() { return PipelineConfig{}; }

}  // namespace

// ---------------------------------------------------------------------------
// segmentize
// ---------------------------------------------------------------------------

TEST_CASE("segmentize yields duration - w + 1 segments") {
  const auto cfg = default_cfg();
  CHECK(segmentize(uniform_pair(600 * 50, 1), cfg).size() == 598);
  CHECK(segmentize(uniform_pair(3 * 50, 2), cfg).size() == 1);
}

TEST_CASE("consecutive segments share w-1 seconds") {
  const auto cfg = default_cfg();
  const auto pair = uniform_pair(10 * 50, 3);
  const auto segments = segmentize(pair, cfg);
  REQUIRE(segments.size() == 8);
  // Segment 1 starts one second into segment 0: samples [50..149] coincide.
  for (int c = 0; c < 6; ++c)
    for (int k = 0; k < 100; ++k)
      CHECK(segments[0].channels[c][50 + k] == segments[1].channels[c][k]);
  // And the pipeline's own samples match the segment contents.
  for (int k = 0; k < 150; ++k)
    CHECK(segments[2].channels[0][k] == pair.accel.channels[0][100 + k]);
}

TEST_CASE("segment count formula holds across the (duration, w) grid") {
  for (int w = 1; w <= 5; ++w) {
    PipelineConfig cfg;
    cfg.w_s = w;
    cfg.rolling_window = std::min(35, cfg.samples_per_segment());
    for (int duration = w; duration <= w + 7; ++duration) {
      const auto segments =
          segmentize(uniform_pair(static_cast<std::size_t>(duration) * 50, 7), cfg);
      CHECK(segments.size() == static_cast<std::size_t>(duration - w + 1));
      for (std::size_t i = 0; i < segments.size(); ++i) {
        CHECK(segments[i].index == static_cast<int>(i));
        CHECK(segments[i].length() == static_cast<std::size_t>(w * 50));
      }
    }
  }
}

TEST_CASE("segmentize rejects pairs shorter than one segment") {
  try {
    segmentize(uniform_pair(149, 4), default_cfg());
    FAIL("expected too-short error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TooShort);
  }
}

// ---------------------------------------------------------------------------
// normalize_segment
// ---------------------------------------------------------------------------

TEST_CASE("normalize maps constant channels to zeros and flags them") {
  const auto cfg = default_cfg();
  Segment seg;
  for (auto& channel : seg.channels) channel.assign(150, 1.0);
  const auto out = normalize_segment(seg, cfg);
  for (int c = 0; c < 6; ++c) {
    CHECK(out.degenerate[c]);
    for (const double v : out.channels[c]) CHECK(v == 0.0);
  }
}

TEST_CASE("normalize is idempotent on an already-normalized channel") {
  const auto cfg = default_cfg();
  Segment seg;
  const std::size_t n = 150;
  // Alternating +-a with a chosen so the sample variance is exactly 1.
  const double a = std::sqrt(static_cast<double>(n - 1) / n);
  for (auto& channel : seg.channels) {
    channel.resize(n);
    for (std::size_t i = 0; i < n; ++i) channel[i] = (i % 2 == 0) ? a : -a;
  }
  const auto out = normalize_segment(seg, cfg);
  for (int c = 0; c < 6; ++c) {
    CHECK(!out.degenerate[c]);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(std::abs(out.channels[c][i] - seg.channels[c][i]) < 1e-12);
  }
}

TEST_CASE("normalize yields zero mean and unit sample variance") {
  const auto cfg = default_cfg();
  Segment seg;
  for (auto& channel : seg.channels) {
    channel.resize(150);
    for (std::size_t i = 0; i < channel.size(); ++i)
      channel[i] = (i % 2 == 0) ? 0.0 : 2.0;
  }
  const auto out = normalize_segment(seg, cfg);
  for (int c = 0; c < 6; ++c) {
    double mean = 0.0;
    for (const double v : out.channels[c]) mean += v;
    mean /= static_cast<double>(out.channels[c].size());
    double ss = 0.0;
    for (const double v : out.channels[c]) ss += (v - mean) * (v - mean);
    const double var = ss / static_cast<double>(out.channels[c].size() - 1);
    CHECK(std::abs(mean) < 1e-12);
    CHECK(std::abs(var - 1.0) < 1e-9);
  }
}

TEST_CASE("normalize moments hold on random segments (property)") {
  const auto cfg = default_cfg();
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const auto seg = random_segment(150, rng, rng.uniform(0.1, 100.0));
    const auto out = normalize_segment(seg, cfg);
    for (int c = 0; c < 6; ++c) {
      REQUIRE(!out.degenerate[c]);
      double mean = 0.0;
      for (const double v : out.channels[c]) mean += v;
      mean /= 150.0;
      double ss = 0.0;
      for (const double v : out.channels[c]) ss += (v - mean) * (v - mean);
      CHECK(std::abs(mean) < 1e-9);
      CHECK(std::abs(ss / 149.0 - 1.0) < 1e-6);
    }
  }
}

// ---------------------------------------------------------------------------
// rolling_average_detrend
// ---------------------------------------------------------------------------

TEST_CASE("detrend zeroes constant channels") {
  const auto cfg = default_cfg();
  Segment seg;
  for (auto& channel : seg.channels) channel.assign(150, 3.25);
  const auto out = rolling_average_detrend(seg, cfg);
  for (int c = 0; c < 6; ++c)
    for (const double v : out.channels[c]) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("detrend on a ramp vanishes away from the edges") {
  const auto cfg = default_cfg();
  Segment seg;
  for (auto& channel : seg.channels) {
    channel.resize(150);
    for (std::size_t i = 0; i < channel.size(); ++i)
      channel[i] = 0.5 * static_cast<double>(i) - 10.0;
  }
  const auto out = rolling_average_detrend(seg, cfg);
  const auto oracle = brute_force_detrend(seg.channels[0], cfg.rolling_window);
  for (int i = 0; i < 150; ++i) {
    if (i >= 17 && i < 150 - 17) {
      CHECK(std::abs(out.channels[0][i]) < 1e-9);  // symmetric window
    } else {
      CHECK(std::abs(out.channels[0][i] - oracle[i]) < 1e-12);
    }
  }
  CHECK(std::abs(out.channels[0][0]) > 1e-3);  // clipped window is asymmetric
}

TEST_CASE("detrend of a centered impulse leaves 1 - 1/35") {
  const auto cfg = default_cfg();
  Segment seg;
  for (auto& channel : seg.channels) {
    channel.assign(150, 0.0);
    channel[75] = 1.0;
  }
  const auto out = rolling_average_detrend(seg, cfg);
  CHECK(out.channels[0][75] == doctest::Approx(1.0 - 1.0 / 35.0).epsilon(1e-12));
  const auto oracle = brute_force_detrend(seg.channels[0], 35);
  for (int i = 0; i < 150; ++i)
    CHECK(std::abs(out.channels[0][i] - oracle[i]) < 1e-12);
}

TEST_CASE("detrend equals the brute-force oracle on random segments") {
  const auto cfg = default_cfg();
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto seg = random_segment(150, rng, 5.0);
    const auto out = rolling_average_detrend(seg, cfg);
    for (int c = 0; c < 6; ++c) {
      const auto oracle = brute_force_detrend(seg.channels[c], 35);
      for (int i = 0; i < 150; ++i)
        CHECK(std::abs(out.channels[c][i] - oracle[i]) < 1e-12);
    }
  }
}

TEST_CASE("detrend rejects channels shorter than the window") {
  const auto cfg = default_cfg();
  Rng rng(9);
  const auto seg = random_segment(20, rng);
  try {
    rolling_average_detrend(seg, cfg);
    FAIL("expected too-short error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TooShort);
  }
}

// ---------------------------------------------------------------------------
// design_bandpass
// ---------------------------------------------------------------------------

TEST_CASE("band-pass kills DC and Nyquist") {
  const auto filter = design_bandpass(default_cfg());
  CHECK(std::abs(filter_response(filter, 0.0)) <= 1e-6);
  CHECK(std::abs(filter_response(filter, 25.0)) <= 1e-6);
}

TEST_CASE("band edges sit at the -3 dB points") {
  const auto filter = design_bandpass(default_cfg());
  const double target = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(filter_response(filter, 4.0)) ==
        doctest::Approx(target).epsilon(0.02));
  CHECK(std::abs(filter_response(filter, 11.0)) ==
        doctest::Approx(target).epsilon(0.02));
}

TEST_CASE("filter coefficients have the order-4 band-pass shape") {
  const auto filter = design_bandpass(default_cfg());
  CHECK(filter.b.size() == 9);
  CHECK(filter.a.size() == 9);
  CHECK(filter.a[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(filter.order == 4);
}

TEST_CASE("designed filter is stable") {
  const auto filter = design_bandpass(default_cfg());
  REQUIRE(filter.poles.size() == 8);
  for (const auto& p : filter.poles) CHECK(std::abs(p) < 1.0);
  // Independent route: factor the denominator and check its roots too.
  const auto roots = polynomial_roots(filter.a);
  REQUIRE(roots.size() == 8);
  for (const auto& r : roots) CHECK(std::abs(r) < 1.0);
}

TEST_CASE("magnitude response is monotone outside the band") {
  const auto filter = design_bandpass(default_cfg());
  auto mag = [&](double f) { return std::abs(filter_response(filter, f)); };
  for (int i = 0; i < 200; ++i) {
    const double f0 = 11.0 + (25.0 - 11.0) * i / 200.0;
    const double f1 = 11.0 + (25.0 - 11.0) * (i + 1) / 200.0;
    CHECK(mag(f1) <= mag(f0) + 1e-9);
  }
  for (int i = 0; i < 200; ++i) {
    const double f0 = 4.0 - 4.0 * i / 200.0;
    const double f1 = 4.0 - 4.0 * (i + 1) / 200.0;
    CHECK(mag(f1) <= mag(f0) + 1e-9);
  }
}

TEST_CASE("design rejects band edges at or above Nyquist") {
  PipelineConfig cfg;
  cfg.band_high_hz = 25.0;
  try {
    design_bandpass(cfg);
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }
}

// ---------------------------------------------------------------------------
// apply_filter
// ---------------------------------------------------------------------------

TEST_CASE("filtering zeros yields zeros") {
  const auto filter = design_bandpass(default_cfg());
  Segment seg;
  for (auto& channel : seg.channels) channel.assign(150, 0.0);
  const auto out = apply_filter(filter, seg);
  for (int c = 0; c < 6; ++c)
    for (const double v : out.channels[c]) CHECK(v == 0.0);
}

TEST_CASE("apply_filter is linear and time-invariant") {
  const auto filter = design_bandpass(default_cfg());
  Rng rng(31);
  const auto x = random_segment(300, rng);
  const auto y = random_segment(300, rng);
  const double alpha = 1.7, beta = -0.6;

  Segment combo;
  for (int c = 0; c < 6; ++c) {
    combo.channels[c].resize(300);
    for (int i = 0; i < 300; ++i)
      combo.channels[c][i] = alpha * x.channels[c][i] + beta * y.channels[c][i];
  }
  const auto fx = apply_filter(filter, x);
  const auto fy = apply_filter(filter, y);
  const auto fc = apply_filter(filter, combo);
  for (int c = 0; c < 6; ++c)
    for (int i = 0; i < 300; ++i)
      CHECK(std::abs(fc.channels[c][i] -
                     (alpha * fx.channels[c][i] + beta * fy.channels[c][i])) <
            1e-9);

  // Time invariance: a zero-padded delay of the input delays the output.
  const int shift = 11;
  Segment delayed;
  for (int c = 0; c < 6; ++c) {
    delayed.channels[c].assign(300 + shift, 0.0);
    for (int i = 0; i < 300; ++i)
      delayed.channels[c][i + shift] = x.channels[c][i];
  }
  const auto fd = apply_filter(filter, delayed);
  for (int c = 0; c < 6; ++c)
    for (int i = 0; i < 300; ++i)
      CHECK(std::abs(fd.channels[c][i + shift] - fx.channels[c][i]) < 1e-9);
}

TEST_CASE("in-band tones pass, out-of-band tones are attenuated") {
  const auto filter = design_bandpass(default_cfg());
  auto tone_gain = [&](double freq_hz, int n) {
    Segment seg;
    for (auto& channel : seg.channels) {
      channel.resize(n);
      for (int i = 0; i < n; ++i)
        channel[i] =
            std::sin(2.0 * std::numbers::pi * freq_hz * i / 50.0);
    }
    const auto out = apply_filter(filter, seg);
    double peak = 0.0;  // steady-state amplitude from the tail
    for (int i = n - 200; i < n; ++i)
      peak = std::max(peak, std::abs(out.channels[0][i]));
    return peak;
  };
  CHECK(tone_gain(7.0, 1000) >= 0.90);
  CHECK(tone_gain(0.5, 1000) <= 0.05);
}

// ---------------------------------------------------------------------------
// derive_bcg, to_tensor
// ---------------------------------------------------------------------------

TEST_CASE("constant segments derive to all-zero BCG") {
  const auto cfg = default_cfg();
  const auto filter = design_bandpass(cfg);
  Segment seg;
  for (auto& channel : seg.channels) channel.assign(150, 42.0);
  const auto bcg = derive_bcg(seg, filter, cfg);
  for (int c = 0; c < 6; ++c) {
    CHECK(bcg.degenerate[c]);
    for (const double v : bcg.channels[c]) CHECK(v == 0.0);
  }
}

TEST_CASE("noiseless pulse train derives to in-band BCG energy") {
  SynthSubjectProfile profile;
  profile.heart_rate_hz = 1.25;  // harmonics 4..8 -> 5.0 .. 10.0 Hz
  for (int c = 0; c < 6; ++c)
    profile.pulse_shape_coeffs[c] = {
        {4, 1.0, 0.2}, {5, 0.7, 1.1}, {6, 0.5, 2.0}, {8, 0.4, 0.7}};
  profile.noise_std = 0.0;
  profile.drift_rate = 0.05;
  profile.jitter_ms_min = 20;
  profile.jitter_ms_max = 20;

  const auto cfg = default_cfg();
  const auto filter = design_bandpass(cfg);
  const Recording rec = synth_recording(profile, 30.0, 13);
  const auto segments = segmentize(align(rec), cfg);
  REQUIRE(!segments.empty());

  const auto bcg = derive_bcg(segments[5], filter, cfg);
  const auto power = test::dft_power(bcg.channels[0]);
  const double bin_hz = 50.0 / static_cast<double>(bcg.channels[0].size());
  double total = 0.0, in_band = 0.0;
  for (std::size_t k = 1; k < power.size(); ++k) {
    total += power[k];
    const double f = k * bin_hz;
    if (f >= 4.0 && f <= 11.0) in_band += power[k];
  }
  CHECK(in_band / total >= 0.90);
}

TEST_CASE("derive_bcg is not idempotent (documented)") {
  const auto cfg = default_cfg();
  const auto filter = design_bandpass(cfg);
  Rng rng(55);
  const auto seg = random_segment(150, rng);
  const auto once = derive_bcg(seg, filter, cfg);
  const auto twice = derive_bcg(once, filter, cfg);
  double diff = 0.0;
  for (int c = 0; c < 6; ++c)
    for (int i = 0; i < 150; ++i)
      diff = std::max(diff,
                      std::abs(once.channels[c][i] - twice.channels[c][i]));
  CHECK(diff > 1e-6);
}

TEST_CASE("tensor layout is (sensor, axis, time)") {
  Rng rng(77);
  const auto seg = random_segment(150, rng);
  const auto tensor = to_tensor(seg);
  CHECK(tensor.time_len == 150);
  CHECK(tensor.data.size() == 2u * 3u * 150u);
  CHECK(tensor.at(0, 0, 17) == seg.channels[0][17]);  // accel x
  CHECK(tensor.at(0, 2, 3) == seg.channels[2][3]);    // accel z
  CHECK(tensor.at(1, 0, 9) == seg.channels[3][9]);    // gyro x
  CHECK(tensor.at(1, 2, 149) == seg.channels[5][149]);

  const auto back = tensor_to_segment(tensor);
  for (int c = 0; c < 6; ++c) CHECK(back.channels[c] == seg.channels[c]);
}

TEST_CASE("to_tensor rejects ragged channels") {
  Rng rng(78);
  auto seg = random_segment(150, rng);
  seg.channels[3].pop_back();
  try {
    to_tensor(seg);
    FAIL("expected shape error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Shape);
  }
}
