// Experiment configuration and the on-disk dataset layout: a manifest
// naming validation/external subjects and one recording manifest per
// (subject, session).
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bcgauth/bcg_pipeline.hpp"
#include "bcgauth/evolution.hpp"
#include "bcgauth/neuralnet.hpp"

namespace bcgauth {

struct ExperimentConfig {
  std::filesystem::path dataset_root = "dataset";
  PipelineConfig pipeline;
  GaConfig ga;
  std::vector<int> s_values{1, 3, 5, 7};
  double threshold_t = 0.5;
  int n_validation = 12;
  int n_external = 10;
  int n_sessions = 3;
  int minutes_per_session = 10;
  int enroll_minutes = 8;  // delta_E
  int tune_minutes = 2;
  CnnGenome genome;  // default verifier genome; GA search can replace it
  std::uint64_t seed = 12345;

  // enroll + tune fill the per-session budget exactly.
  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

struct RecordingRef {
  std::string subject_id;
  std::string session_id;
  std::string path;  // recording manifest, relative to the dataset root
};

struct DatasetManifest {
  std::vector<std::string> validation_subjects;
  std::vector<std::string> external_subjects;
  std::vector<RecordingRef> recordings;

  // Validation and external sets must be disjoint and recordings must
  // reference known subjects.
  void validate() const;

  bool is_validation(const std::string& subject) const;
  std::vector<std::string> sessions_of(const std::string& subject) const;
  const RecordingRef* find(const std::string& subject,
                           const std::string& session) const;
};

DatasetManifest load_dataset_manifest(const std::filesystem::path& root);
void save_dataset_manifest(const DatasetManifest& manifest,
                           const std::filesystem::path& root);

}  // namespace bcgauth
