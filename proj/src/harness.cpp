#include "bcgauth/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "bcgauth/errors.hpp"
#include "bcgauth/fsio.hpp"
#include "bcgauth/preprocess.hpp"
#include "bcgauth/rng.hpp"
#include "bcgauth/sensor_model.hpp"

namespace bcgauth {

using nlohmann::json;

namespace {

std::string subject_name(bool validation, int index) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%s%02d", validation ? "v" : "x", index + 1);
  return buf;
}

std::string session_name(int index) { return "s" + std::to_string(index + 1); }

std::uint64_t subject_seed(const ExperimentConfig& cfg, std::string_view stream,
                           const std::string& subject) {
  return substream(substream(cfg.seed, stream), subject);
}

}  // namespace

SessionTensors derive_session_tensors(const Recording& rec,
                                      const ExperimentConfig& cfg) {
  const auto pair = align(rec);
  const auto segments = segmentize(pair, cfg.pipeline);
  const auto filter = design_bandpass(cfg.pipeline);

  const int enroll_end_s = cfg.enroll_minutes * 60;
  SessionTensors out;
  for (const auto& seg : segments) {
    // Segment i spans seconds [i, i + w) of the aligned stream.
    const int start_s = seg.index;
    const int end_s = seg.index + cfg.pipeline.w_s;
    auto tensor = to_tensor(derive_bcg(seg, filter, cfg.pipeline));
    if (end_s <= enroll_end_s) {
      out.enroll.push_back(tensor);
      out.enroll_indices.push_back(seg.index);
    } else if (start_s >= enroll_end_s) {
      out.tune.push_back(tensor);
      out.tune_indices.push_back(seg.index);
    }
    out.all.push_back(std::move(tensor));
    out.all_indices.push_back(seg.index);
  }
  return out;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

void cmd_synth(const ExperimentConfig& cfg, const SynthOptions& options) {
  cfg.validate();
  const int n_validation =
      options.n_validation > 0 ? options.n_validation : cfg.n_validation;
  const int n_external =
      options.n_external >= 0 ? options.n_external : cfg.n_external;
  const int n_sessions =
      options.n_sessions > 0 ? options.n_sessions : cfg.n_sessions;
  if (n_validation < 2)
    fail(ErrorKind::Config, "synth: need at least 2 validation subjects");

  const auto& root = cfg.dataset_root;
  if (std::filesystem::exists(root) && !std::filesystem::is_empty(root) &&
      !options.force)
    fail(ErrorKind::Dataset,
         "synth: target '" + root.string() +
             "' is not empty; pass --force to overwrite");
  std::filesystem::create_directories(root);

  const double duration_s = cfg.minutes_per_session * 60.0;
  DatasetManifest manifest;
  auto emit_subject = [&](bool validation, int index, int sessions) {
    const std::string id = subject_name(validation, index);
    (validation ? manifest.validation_subjects : manifest.external_subjects)
        .push_back(id);
    Rng profile_rng(subject_seed(cfg, "profile", id));
    const auto profile = random_profile(profile_rng);
    write_profile(profile, root / "profiles" / (id + ".json"));
    for (int s = 0; s < sessions; ++s) {
      const std::string session = session_name(s);
      const Recording rec = synth_recording(
          profile, duration_s,
          substream(subject_seed(cfg, "synth", id), session), id, session);
      const std::string rel = id + "/" + session + "/recording.json";
      write_recording(rec, root / rel);
      manifest.recordings.push_back({id, session, rel});
    }
  };

  for (int i = 0; i < n_validation; ++i) emit_subject(true, i, n_sessions);
  for (int i = 0; i < n_external; ++i) emit_subject(false, i, 1);
  save_dataset_manifest(manifest, root);
}

// ---------------------------------------------------------------------------
// enroll
// ---------------------------------------------------------------------------

namespace {

Recording load_subject_recording(const ExperimentConfig& cfg,
                                 const DatasetManifest& manifest,
                                 const std::string& subject,
                                 const std::string& session) {
  const RecordingRef* ref = manifest.find(subject, session);
  if (ref == nullptr)
    fail(ErrorKind::Dataset, "dataset: no recording for subject '" + subject +
                                 "' session '" + session + "'");
  return read_recording(cfg.dataset_root / ref->path);
}

std::string training_session(const DatasetManifest& manifest,
                             const std::string& subject) {
  auto sessions = manifest.sessions_of(subject);
  if (sessions.empty())
    fail(ErrorKind::Dataset,
         "dataset: subject '" + subject + "' has no recordings");
  std::sort(sessions.begin(), sessions.end());
  return sessions.front();
}

// Session-1 one-vs-all split: the subject's enroll minutes are the positive
// class, every other validation subject's enroll minutes the negative class.
TrainSet build_train_set(const ExperimentConfig& cfg,
                         const DatasetManifest& manifest,
                         const std::string& subject,
                         std::map<std::string, SessionTensors>* cache) {
  TrainSet data;
  for (const auto& other : manifest.validation_subjects) {
    if (!cache->count(other)) {
      const auto rec = load_subject_recording(cfg, manifest, other,
                                              training_session(manifest, other));
      cache->emplace(other, derive_session_tensors(rec, cfg));
    }
    const auto& tensors = cache->at(other);
    auto& dst = other == subject ? data.positives : data.negatives;
    dst.insert(dst.end(), tensors.enroll.begin(), tensors.enroll.end());
  }
  return data;
}

}  // namespace

EnrollOutcome cmd_enroll(const ExperimentConfig& cfg, const std::string& subject,
                         const std::filesystem::path& model_path,
                         const CnnGenome* genome_override) {
  cfg.validate();
  const auto manifest = load_dataset_manifest(cfg.dataset_root);
  if (!manifest.is_validation(subject))
    fail(ErrorKind::Dataset,
         "enroll: subject '" + subject + "' is not in the validation set");

  std::map<std::string, SessionTensors> cache;
  const TrainSet data = build_train_set(cfg, manifest, subject, &cache);
  const CnnGenome genome = genome_override ? *genome_override : cfg.genome;

  const std::uint64_t seed = subject_seed(cfg, "enroll", subject);
  CnnModel model = build_model(genome, cfg.pipeline.w_s, seed);
  const TrainReport report = train(model, data, seed);
  save_model(model, model_path);

  json rj;
  rj["subject_id"] = subject;
  rj["seed"] = report.seed;
  rj["epochs_run"] = report.epochs_run;
  rj["final_loss"] = report.final_loss;
  rj["loss_curve"] = report.loss_curve;
  rj["positive_segments"] = data.positives.size();
  rj["negative_segments"] = data.negatives.size();
  write_text_atomic(model_path.string() + ".train.json", rj.dump(2) + "\n");

  return {model_path, report, data.positives.size(), data.negatives.size()};
}

// ---------------------------------------------------------------------------
// auth
// ---------------------------------------------------------------------------

AuthOutcome cmd_auth(const ExperimentConfig& cfg,
                     const std::filesystem::path& model_path,
                     const std::filesystem::path& recording_manifest,
                     const std::string& claimed, double threshold,
                     int attempts) {
  cfg.validate();
  AuthPolicy policy;
  policy.threshold_t = threshold;
  policy.attempts_s = attempts;
  policy.w_s = cfg.pipeline.w_s;
  policy.validate();

  const CnnModel model = load_model(model_path);
  const Recording rec = read_recording(recording_manifest);
  const auto pair = align(rec);

  const int needed_s = policy.required_seconds();
  const std::size_t needed_samples =
      static_cast<std::size_t>(needed_s) * PipelineConfig::rate_hz;
  if (pair.accel.length() < needed_samples)
    fail(ErrorKind::Duration,
         "auth: " + std::to_string(attempts) + " attempts at w = " +
             std::to_string(cfg.pipeline.w_s) + " s require s + w - 1 = " +
             std::to_string(needed_s) + " s of sensor data; recording '" +
             claimed + "' provides only " +
             std::to_string(pair.accel.length() / PipelineConfig::rate_hz) +
             " s");

  const auto segments = segmentize(pair, cfg.pipeline);
  const auto filter = design_bandpass(cfg.pipeline);

  AuthOutcome outcome;
  outcome.threshold = threshold;
  outcome.attempts = attempts;
  for (int i = 0; i < attempts; ++i) {
    const auto tensor = to_tensor(derive_bcg(segments[i], filter, cfg.pipeline));
    outcome.confidences.push_back(forward(model, tensor));
  }
  outcome.decision = decide(outcome.confidences, policy);
  return outcome;
}

// ---------------------------------------------------------------------------
// ga-search
// ---------------------------------------------------------------------------

GaResult cmd_ga(const ExperimentConfig& cfg, const std::string& subject,
                const std::filesystem::path& genome_out,
                const std::filesystem::path& log_out) {
  cfg.validate();
  const auto manifest = load_dataset_manifest(cfg.dataset_root);
  if (!manifest.is_validation(subject))
    fail(ErrorKind::Dataset,
         "ga-search: subject '" + subject + "' is not in the validation set");

  std::map<std::string, SessionTensors> cache;
  const TrainSet train_data = build_train_set(cfg, manifest, subject, &cache);

  // The tune set pools every validation subject's held-out minutes.
  TuneSet tune;
  for (const auto& other : manifest.validation_subjects) {
    const auto& tensors = cache.at(other);
    for (const auto& t : tensors.tune) {
      tune.tensors.push_back(t);
      tune.labels.push_back(other == subject ? 1 : 0);
    }
  }

  GaConfig ga_cfg = cfg.ga;
  ga_cfg.seed = subject_seed(cfg, "ga", subject);

  std::string log_lines;
  const auto result = run_ga(
      ga_cfg, train_data, tune, cfg.pipeline.w_s,
      [&log_lines](int generation, int index, const ScoredGenome& scored,
                   bool cached) {
        json line{{"generation", generation}, {"index", index},
                  {"cached", cached},         {"far", scored.far},
                  {"frr", scored.frr},        {"score", scored.score},
                  {"genome", genome_to_json(scored.genome)}};
        log_lines += line.dump();
        log_lines += '\n';
      });
  write_text_atomic(log_out, log_lines);

  json best{{"far", result.best.far},
            {"frr", result.best.frr},
            {"score", result.best.score},
            {"genome", genome_to_json(result.best.genome)}};
  write_text_atomic(genome_out, best.dump(2) + "\n");
  return result;
}

// ---------------------------------------------------------------------------
// sweep-w
// ---------------------------------------------------------------------------

std::vector<SweepRow> cmd_sweep_w(const ExperimentConfig& cfg,
                                  const std::vector<int>& w_values,
                                  const std::filesystem::path& out_csv) {
  cfg.validate();
  if (w_values.empty()) fail(ErrorKind::Config, "sweep-w: no segment lengths");
  const auto manifest = load_dataset_manifest(cfg.dataset_root);

  // Recordings are w-independent; cache them once.
  std::map<std::string, Recording> recordings;
  for (const auto& subject : manifest.validation_subjects)
    recordings.emplace(subject,
                       load_subject_recording(cfg, manifest, subject,
                                              training_session(manifest, subject)));

  std::vector<SweepRow> rows;
  for (const int w : w_values) {
    ExperimentConfig w_cfg = cfg;
    w_cfg.pipeline.w_s = w;
    w_cfg.pipeline.rolling_window =
        std::min(cfg.pipeline.rolling_window, w * PipelineConfig::rate_hz);
    w_cfg.pipeline.validate();
    if (!genome_valid(w_cfg.genome, w_cfg.pipeline.samples_per_segment()))
      fail(ErrorKind::InvalidGenome,
           "sweep-w: genome invalid for w = " + std::to_string(w));

    std::map<std::string, SessionTensors> tensors;
    for (const auto& [subject, rec] : recordings)
      tensors.emplace(subject, derive_session_tensors(rec, w_cfg));

    AuthPolicy policy;
    policy.threshold_t = 0.5;
    policy.attempts_s = 1;
    policy.w_s = w;

    double accuracy_sum = 0.0;
    for (const auto& subject : manifest.validation_subjects) {
      TrainSet data;
      for (const auto& [other, t] : tensors) {
        auto& dst = other == subject ? data.positives : data.negatives;
        dst.insert(dst.end(), t.enroll.begin(), t.enroll.end());
      }
      const std::uint64_t seed = substream(
          subject_seed(cfg, "sweep", subject), "w", static_cast<std::uint64_t>(w));
      CnnModel model = build_model(w_cfg.genome, w, seed);
      train(model, data, seed);

      std::vector<Decision> pos, neg;
      for (const auto& [other, t] : tensors) {
        auto& dst = other == subject ? pos : neg;
        for (const auto& tensor : t.tune) {
          const double c = forward(model, tensor);
          dst.push_back(decide(std::span<const double>(&c, 1), policy));
        }
      }
      accuracy_sum += rates(pos, neg, {}).accuracy;
    }
    rows.push_back(
        {w, accuracy_sum / static_cast<double>(manifest.validation_subjects.size())});
  }

  if (!out_csv.empty()) {
    std::string csv = "w_seconds,mean_accuracy\n";
    for (const auto& row : rows) {
      csv += std::to_string(row.w);
      csv += ',';
      csv += format_double(row.mean_accuracy);
      csv += '\n';
    }
    const auto dir = out_csv.parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    write_text_atomic(out_csv, csv);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

EvalReport cmd_report(const ExperimentConfig& cfg,
                      const std::filesystem::path& models_dir,
                      const std::filesystem::path& out_dir) {
  cfg.validate();
  const auto manifest = load_dataset_manifest(cfg.dataset_root);

  std::map<std::string, CnnModel> models;
  for (const auto& subject : manifest.validation_subjects) {
    const auto path = models_dir / (subject + ".model.json");
    if (!std::filesystem::exists(path))
      fail(ErrorKind::Dataset,
           "report: missing model for subject '" + subject + "' (" +
               path.string() + ")");
    models.emplace(subject, load_model(path));
  }

  // Evaluation sessions: every session any validation subject recorded.
  std::set<std::string> session_set;
  for (const auto& subject : manifest.validation_subjects)
    for (const auto& session : manifest.sessions_of(subject))
      session_set.insert(session);
  const std::vector<std::string> sessions(session_set.begin(), session_set.end());
  const std::string train_session = sessions.front();

  // Derive every needed tensor split once.
  std::map<std::pair<std::string, std::string>, SessionTensors> tensors;
  for (const auto& subject : manifest.validation_subjects)
    for (const auto& session : manifest.sessions_of(subject))
      tensors.emplace(
          std::make_pair(subject, session),
          derive_session_tensors(
              load_subject_recording(cfg, manifest, subject, session), cfg));
  // Externals contribute their first recorded session only.
  for (const auto& subject : manifest.external_subjects) {
    const auto session = training_session(manifest, subject);
    tensors.emplace(
        std::make_pair(subject, session),
        derive_session_tensors(
            load_subject_recording(cfg, manifest, subject, session), cfg));
  }

  std::vector<ScoreRecord> records;
  for (const auto& claimed : manifest.validation_subjects) {
    const CnnModel& model = models.at(claimed);

    // Validation subjects: session-1 evaluation uses only the held-out tune
    // minutes (the enroll minutes trained the models); later sessions are
    // scored in full.
    for (const auto& truth : manifest.validation_subjects) {
      for (const auto& session : manifest.sessions_of(truth)) {
        const auto& t = tensors.at({truth, session});
        const bool held_out_only = session == train_session;
        const auto& tensor_list = held_out_only ? t.tune : t.all;
        const auto& index_list = held_out_only ? t.tune_indices : t.all_indices;
        for (std::size_t i = 0; i < tensor_list.size(); ++i) {
          ScoreRecord r;
          r.claimed_subject = claimed;
          r.true_subject = truth;
          r.session_id = session;
          r.segment_index = index_list[i];
          r.confidence = forward(model, tensor_list[i]);
          r.category = truth == claimed ? Category::ValidationPositive
                                        : Category::ValidationNegative;
          records.push_back(std::move(r));
        }
      }
    }

    // External negatives have no session alignment with the models; the
    // same streams are evaluated against every session's cell.
    for (const auto& truth : manifest.external_subjects) {
      const auto ext_session = training_session(manifest, truth);
      const auto& t = tensors.at({truth, ext_session});
      std::vector<double> confidences;
      confidences.reserve(t.all.size());
      for (const auto& tensor : t.all)
        confidences.push_back(forward(model, tensor));
      for (const auto& session : sessions) {
        for (std::size_t i = 0; i < confidences.size(); ++i) {
          ScoreRecord r;
          r.claimed_subject = claimed;
          r.true_subject = truth;
          r.session_id = session;
          r.segment_index = t.all_indices[i];
          r.confidence = confidences[i];
          r.category = Category::NegativeExternal;
          records.push_back(std::move(r));
        }
      }
    }
  }

  const EvalReport report = session_report(records, sessions, cfg.s_values);

  std::filesystem::create_directories(out_dir);
  write_text_atomic(out_dir / "report.json", report_to_json(report).dump(2) + "\n");
  for (const auto& cell : report.cells) {
    const std::string name =
        "roc_" + cell.session_id + "_s" + std::to_string(cell.attempts_s) + ".csv";
    write_text_atomic(out_dir / name, roc_to_csv(cell.roc));
  }
  return report;
}

}  // namespace bcgauth
