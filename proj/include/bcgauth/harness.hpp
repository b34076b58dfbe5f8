// Experiment orchestration behind the CLI: synthetic dataset generation,
// per-subject enrollment, authentication replay, GA search, the
// segment-length sweep and the full session report.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bcgauth/dataset.hpp"
#include "bcgauth/evaluation.hpp"
#include "bcgauth/evolution.hpp"
#include "bcgauth/neuralnet.hpp"

namespace bcgauth {

// Derived BCG tensors for one recording. Enrollment keeps segments lying
// entirely inside the first enroll_minutes of the session; tuning keeps
// segments entirely inside the remainder. Segments straddling the boundary
// belong to neither, so the splits share no samples.
struct SessionTensors {
  std::vector<SegmentTensor> enroll;
  std::vector<int> enroll_indices;
  std::vector<SegmentTensor> tune;
  std::vector<int> tune_indices;
  std::vector<SegmentTensor> all;
  std::vector<int> all_indices;
};

SessionTensors derive_session_tensors(const Recording& rec,
                                      const ExperimentConfig& cfg);

struct SynthOptions {
  int n_validation = 0;  // 0 = take from config
  int n_external = -1;   // -1 = take from config
  int n_sessions = 0;    // 0 = take from config
  bool force = false;
};

// Writes dataset.json, per-subject profiles and all recordings under
// cfg.dataset_root. Refuses a non-empty target unless forced.
void cmd_synth(const ExperimentConfig& cfg, const SynthOptions& options);

struct EnrollOutcome {
  std::filesystem::path model_path;
  TrainReport report;
  std::size_t positive_segments = 0;
  std::size_t negative_segments = 0;
};

// One-vs-all enrollment on the subject's session-1 enroll split; writes the
// model plus a "<model>.train.json" report.
EnrollOutcome cmd_enroll(const ExperimentConfig& cfg, const std::string& subject,
                         const std::filesystem::path& model_path,
                         const CnnGenome* genome_override = nullptr);

struct AuthOutcome {
  Decision decision = Decision::Reject;
  std::vector<double> confidences;
  double threshold = 0.0;
  int attempts = 0;
};

// Scores the first s segments of the recording against the model and applies
// the any-accept rule.
AuthOutcome cmd_auth(const ExperimentConfig& cfg,
                     const std::filesystem::path& model_path,
                     const std::filesystem::path& recording_manifest,
                     const std::string& claimed, double threshold,
                     int attempts);

// GA search on the subject's session-1 split (train on the enroll minutes,
// score on every subject's tune minutes). Writes the best genome as JSON and
// a JSONL log with one record per population member per generation.
GaResult cmd_ga(const ExperimentConfig& cfg, const std::string& subject,
                const std::filesystem::path& genome_out,
                const std::filesystem::path& log_out);

struct SweepRow {
  int w = 0;
  double mean_accuracy = 0.0;
};

// Table II procedure: per segment length, train each validation subject's
// model on the session-1 enroll split and score its tune split at T = 0.5,
// s = 1; reports mean (TAR + TRR)/2 across subjects.
std::vector<SweepRow> cmd_sweep_w(const ExperimentConfig& cfg,
                                  const std::vector<int>& w_values,
                                  const std::filesystem::path& out_csv);

// Full evaluation grid over sessions and s values; writes report.json and
// one ROC CSV per (session, s) cell into out_dir.
EvalReport cmd_report(const ExperimentConfig& cfg,
                      const std::filesystem::path& models_dir,
                      const std::filesystem::path& out_dir);

}  // namespace bcgauth
