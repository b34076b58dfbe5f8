#include "bcgauth/sensor_model.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "bcgauth/errors.hpp"
#include "bcgauth/fsio.hpp"

namespace bcgauth {

using nlohmann::json;

std::string_view sensor_kind_name(SensorKind kind) {
  return kind == SensorKind::Accelerometer ? "accelerometer" : "gyroscope";
}

void RawStream::validate() const {
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].timestamp_ms <= samples[i - 1].timestamp_ms) {
      fail(ErrorKind::Integrity,
           std::string(sensor_kind_name(kind)) +
               " stream: non-increasing timestamp at sample " +
               std::to_string(i) + " (" +
               std::to_string(samples[i - 1].timestamp_ms) + " -> " +
               std::to_string(samples[i].timestamp_ms) + ")");
    }
  }
}

void SynthSubjectProfile::validate() const {
  if (heart_rate_hz <= 0.0)
    fail(ErrorKind::Config, "profile: heart_rate_hz must be positive");
  if (noise_std < 0.0)
    fail(ErrorKind::Config, "profile: noise_std must be non-negative");
  if (jitter_ms_min < 5 || jitter_ms_max > 20 || jitter_ms_min > jitter_ms_max)
    fail(ErrorKind::Config, "profile: jitter range must lie within [5, 20] ms");
}

SynthSubjectProfile random_profile(Rng& rng) {
  SynthSubjectProfile profile;
  profile.heart_rate_hz = rng.uniform(1.0, 1.5);
  // Every harmonic of the fundamental that lands inside the 4-11 Hz band
  // gets a random amplitude and phase; this is what makes subjects distinct.
  const int k_lo =
      static_cast<int>(std::ceil(4.0 / profile.heart_rate_hz - 1e-9));
  const int k_hi =
      static_cast<int>(std::floor(11.0 / profile.heart_rate_hz + 1e-9));
  for (auto& channel : profile.pulse_shape_coeffs) {
    for (int k = k_lo; k <= k_hi; ++k) {
      channel.push_back({k, rng.uniform(0.2, 1.0),
                         rng.uniform(0.0, 2.0 * std::numbers::pi)});
    }
  }
  return profile;
}

namespace {

double channel_value(const SynthSubjectProfile& profile, int channel,
                     double t_s) {
  double v = profile.drift_rate * t_s;
  for (const auto& h : profile.pulse_shape_coeffs[channel]) {
    v += h.amplitude *
         std::sin(2.0 * std::numbers::pi * h.harmonic * profile.heart_rate_hz *
                      t_s +
                  h.phase);
  }
  return v;
}

RawStream synth_stream(const SynthSubjectProfile& profile, SensorKind kind,
                       double duration_s, std::uint64_t stream_seed) {
  Rng rng(stream_seed);
  const auto duration_ms = static_cast<std::int64_t>(duration_s * 1000.0);
  const int channel_base = kind == SensorKind::Accelerometer ? 0 : 3;

  RawStream stream;
  stream.kind = kind;
  std::int64_t t = 0;
  while (true) {
    t += rng.uniform_int(profile.jitter_ms_min, profile.jitter_ms_max);
    if (t > duration_ms) break;
    const double t_s = static_cast<double>(t) / 1000.0;
    RawSample sample;
    sample.timestamp_ms = t;
    double* axes[3] = {&sample.x, &sample.y, &sample.z};
    for (int axis = 0; axis < 3; ++axis) {
      double v = channel_value(profile, channel_base + axis, t_s);
      if (profile.noise_std > 0.0) v += rng.normal(0.0, profile.noise_std);
      *axes[axis] = v;
    }
    stream.samples.push_back(sample);
  }
  return stream;
}

}  // namespace

Recording synth_recording(const SynthSubjectProfile& profile,
                          double duration_s, std::uint64_t seed,
                          const std::string& subject_id,
                          const std::string& session_id) {
  profile.validate();
  if (duration_s <= 0.0)
    fail(ErrorKind::Config, "synth_recording: duration must be positive");

  Recording rec;
  rec.subject_id = subject_id;
  rec.session_id = session_id;
  rec.accel = synth_stream(profile, SensorKind::Accelerometer, duration_s,
                           substream(seed, "accel"));
  rec.gyro = synth_stream(profile, SensorKind::Gyroscope, duration_s,
                          substream(seed, "gyro"));
  return rec;
}

// ---------------------------------------------------------------------------
// Stream file format: CSV with header "timestamp_ms,x,y,z", LF endings.
// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kCsvHeader = "timestamp_ms,x,y,z";

std::string stream_to_csv(const RawStream& stream) {
  std::string out;
  out.reserve(stream.samples.size() * 48 + 24);
  out += kCsvHeader;
  out += '\n';
  for (const auto& s : stream.samples) {
    out += std::to_string(s.timestamp_ms);
    out += ',';
    out += format_double(s.x);
    out += ',';
    out += format_double(s.y);
    out += ',';
    out += format_double(s.z);
    out += '\n';
  }
  return out;
}

[[noreturn]] void csv_error(const std::filesystem::path& path, std::size_t line,
                            const std::string& what) {
  fail(ErrorKind::Parse,
       path.string() + ":" + std::to_string(line) + ": " + what);
}

double parse_csv_double(std::string_view field, const std::filesystem::path& path,
                        std::size_t line) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc{} || ptr != end)
    csv_error(path, line, "malformed number '" + std::string(field) + "'");
  return v;
}

RawStream stream_from_csv(const std::filesystem::path& path, SensorKind kind) {
  const std::string text = read_text_file(path);
  RawStream stream;
  stream.kind = kind;

  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line(text.data() + pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = eol + 1;
    ++line_no;

    if (line_no == 1) {
      if (line != kCsvHeader)
        csv_error(path, line_no, "expected header '" + std::string(kCsvHeader) +
                                     "', got '" + std::string(line) + "'");
      continue;
    }
    if (line.empty()) continue;

    std::array<std::string_view, 4> fields;
    std::size_t field_count = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        if (field_count >= fields.size())
          csv_error(path, line_no, "too many fields");
        fields[field_count++] = line.substr(start, i - start);
        start = i + 1;
      }
    }
    if (field_count != 4) csv_error(path, line_no, "expected 4 fields");

    RawSample sample;
    {
      const auto* end = fields[0].data() + fields[0].size();
      auto [ptr, ec] =
          std::from_chars(fields[0].data(), end, sample.timestamp_ms);
      if (ec != std::errc{} || ptr != end)
        csv_error(path, line_no,
                  "malformed timestamp '" + std::string(fields[0]) + "'");
    }
    sample.x = parse_csv_double(fields[1], path, line_no);
    sample.y = parse_csv_double(fields[2], path, line_no);
    sample.z = parse_csv_double(fields[3], path, line_no);
    stream.samples.push_back(sample);
  }

  stream.validate();
  return stream;
}

}  // namespace

Recording read_recording(const std::filesystem::path& manifest_path) {
  json manifest;
  try {
    manifest = json::parse(read_text_file(manifest_path));
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, manifest_path.string() + ": " + e.what());
  }
  for (const char* key : {"subject_id", "session_id", "accel_path", "gyro_path"})
    if (!manifest.contains(key))
      fail(ErrorKind::Parse,
           manifest_path.string() + ": missing key '" + key + "'");

  const auto dir = manifest_path.parent_path();
  Recording rec;
  rec.subject_id = manifest["subject_id"].get<std::string>();
  rec.session_id = manifest["session_id"].get<std::string>();
  rec.accel = stream_from_csv(dir / manifest["accel_path"].get<std::string>(),
                              SensorKind::Accelerometer);
  rec.gyro = stream_from_csv(dir / manifest["gyro_path"].get<std::string>(),
                             SensorKind::Gyroscope);
  return rec;
}

void write_recording(const Recording& rec,
                     const std::filesystem::path& manifest_path) {
  const std::string stem = manifest_path.stem().string();
  const std::string accel_name = stem + "_accel.csv";
  const std::string gyro_name = stem + "_gyro.csv";
  const auto dir = manifest_path.parent_path();

  if (!dir.empty()) std::filesystem::create_directories(dir);
  write_text_atomic(dir / accel_name, stream_to_csv(rec.accel));
  write_text_atomic(dir / gyro_name, stream_to_csv(rec.gyro));

  json manifest;
  manifest["subject_id"] = rec.subject_id;
  manifest["session_id"] = rec.session_id;
  manifest["accel_path"] = accel_name;
  manifest["gyro_path"] = gyro_name;
  write_text_atomic(manifest_path, manifest.dump(2) + "\n");
}

SynthSubjectProfile read_profile(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  SynthSubjectProfile profile;
  try {
    profile.heart_rate_hz = j.at("heart_rate_hz").get<double>();
    profile.noise_std = j.at("noise_std").get<double>();
    profile.drift_rate = j.at("drift_rate").get<double>();
    profile.jitter_ms_min = j.at("jitter_ms_range").at(0).get<int>();
    profile.jitter_ms_max = j.at("jitter_ms_range").at(1).get<int>();
    const auto& channels = j.at("pulse_shape_coeffs");
    if (channels.size() != 6)
      fail(ErrorKind::Parse, path.string() + ": expected 6 channels");
    for (std::size_t c = 0; c < 6; ++c) {
      for (const auto& h : channels[c]) {
        profile.pulse_shape_coeffs[c].push_back(
            {h.at("harmonic").get<int>(), h.at("amplitude").get<double>(),
             h.at("phase").get<double>()});
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  profile.validate();
  return profile;
}

void write_profile(const SynthSubjectProfile& profile,
                   const std::filesystem::path& path) {
  json j;
  j["heart_rate_hz"] = profile.heart_rate_hz;
  j["noise_std"] = profile.noise_std;
  j["drift_rate"] = profile.drift_rate;
  j["jitter_ms_range"] = {profile.jitter_ms_min, profile.jitter_ms_max};
  json channels = json::array();
  for (const auto& channel : profile.pulse_shape_coeffs) {
    json coeffs = json::array();
    for (const auto& h : channel) {
      coeffs.push_back({{"harmonic", h.harmonic},
                        {"amplitude", h.amplitude},
                        {"phase", h.phase}});
    }
    channels.push_back(coeffs);
  }
  j["pulse_shape_coeffs"] = channels;
  const auto dir = path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  write_text_atomic(path, j.dump(2) + "\n");
}

}  // namespace bcgauth
