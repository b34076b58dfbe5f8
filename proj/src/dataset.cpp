#include "bcgauth/dataset.hpp"

#include <algorithm>
#include <set>

#include "bcgauth/errors.hpp"
#include "bcgauth/fsio.hpp"

namespace bcgauth {

using nlohmann::json;

void ExperimentConfig::validate() const {
  pipeline.validate();
  ga.validate();
  if (enroll_minutes + tune_minutes != minutes_per_session)
    fail(ErrorKind::Config,
         "config: enroll_minutes (" + std::to_string(enroll_minutes) +
             ") + tune_minutes (" + std::to_string(tune_minutes) +
             ") must equal minutes_per_session (" +
             std::to_string(minutes_per_session) + ")");
  if (enroll_minutes < 1 || tune_minutes < 1)
    fail(ErrorKind::Config, "config: enroll and tune splits must be >= 1 min");
  if (n_validation < 2)
    fail(ErrorKind::Config,
         "config: need at least 2 validation subjects for one-vs-all training");
  if (n_external < 0 || n_sessions < 1)
    fail(ErrorKind::Config, "config: invalid subject/session counts");
  if (s_values.empty())
    fail(ErrorKind::Config, "config: s_values must not be empty");
  for (const int s : s_values)
    if (s < 1) fail(ErrorKind::Config, "config: s_values must be >= 1");
  if (threshold_t < 0.0 || threshold_t > 1.0)
    fail(ErrorKind::Config, "config: threshold must lie in [0, 1]");
  if (!genome_valid(genome, pipeline.samples_per_segment()))
    fail(ErrorKind::Config, "config: default genome invalid for w_s = " +
                                std::to_string(pipeline.w_s));
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  try {
    if (j.contains("dataset_root"))
      cfg.dataset_root = j["dataset_root"].get<std::string>();
    cfg.seed = j.value("seed", cfg.seed);

    if (j.contains("pipeline")) {
      const auto& p = j["pipeline"];
      cfg.pipeline.w_s = p.value("w_s", cfg.pipeline.w_s);
      cfg.pipeline.rolling_window =
          p.value("rolling_window", cfg.pipeline.rolling_window);
      cfg.pipeline.band_low_hz = p.value("band_low_hz", cfg.pipeline.band_low_hz);
      cfg.pipeline.band_high_hz =
          p.value("band_high_hz", cfg.pipeline.band_high_hz);
      cfg.pipeline.filter_order =
          p.value("filter_order", cfg.pipeline.filter_order);
      cfg.pipeline.norm_epsilon =
          p.value("norm_epsilon", cfg.pipeline.norm_epsilon);
    }
    if (j.contains("ga")) {
      const auto& g = j["ga"];
      cfg.ga.population = g.value("population", cfg.ga.population);
      cfg.ga.generations = g.value("generations", cfg.ga.generations);
      cfg.ga.elite_fraction = g.value("elite_fraction", cfg.ga.elite_fraction);
      cfg.ga.random_parents = g.value("random_parents", cfg.ga.random_parents);
      cfg.ga.children_per_gen =
          g.value("children_per_gen", cfg.ga.children_per_gen);
      cfg.ga.mutation_rate = g.value("mutation_rate", cfg.ga.mutation_rate);
    }
    if (j.contains("policy")) {
      const auto& p = j["policy"];
      cfg.threshold_t = p.value("threshold", cfg.threshold_t);
      if (p.contains("s_values"))
        cfg.s_values = p["s_values"].get<std::vector<int>>();
    }
    if (j.contains("data")) {
      const auto& d = j["data"];
      cfg.n_validation = d.value("n_validation", cfg.n_validation);
      cfg.n_external = d.value("n_external", cfg.n_external);
      cfg.n_sessions = d.value("sessions", cfg.n_sessions);
      cfg.minutes_per_session =
          d.value("minutes_per_session", cfg.minutes_per_session);
      cfg.enroll_minutes = d.value("enroll_minutes", cfg.enroll_minutes);
      cfg.tune_minutes = d.value("tune_minutes", cfg.tune_minutes);
    }
    if (j.contains("genome")) cfg.genome = genome_from_json(j["genome"]);
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["dataset_root"] = cfg.dataset_root.string();
  j["seed"] = cfg.seed;
  j["pipeline"] = {{"w_s", cfg.pipeline.w_s},
                   {"rolling_window", cfg.pipeline.rolling_window},
                   {"band_low_hz", cfg.pipeline.band_low_hz},
                   {"band_high_hz", cfg.pipeline.band_high_hz},
                   {"filter_order", cfg.pipeline.filter_order},
                   {"norm_epsilon", cfg.pipeline.norm_epsilon}};
  j["ga"] = {{"population", cfg.ga.population},
             {"generations", cfg.ga.generations},
             {"elite_fraction", cfg.ga.elite_fraction},
             {"random_parents", cfg.ga.random_parents},
             {"children_per_gen", cfg.ga.children_per_gen},
             {"mutation_rate", cfg.ga.mutation_rate}};
  j["policy"] = {{"threshold", cfg.threshold_t}, {"s_values", cfg.s_values}};
  j["data"] = {{"n_validation", cfg.n_validation},
               {"n_external", cfg.n_external},
               {"sessions", cfg.n_sessions},
               {"minutes_per_session", cfg.minutes_per_session},
               {"enroll_minutes", cfg.enroll_minutes},
               {"tune_minutes", cfg.tune_minutes}};
  j["genome"] = genome_to_json(cfg.genome);
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Dataset manifest
// ---------------------------------------------------------------------------

void DatasetManifest::validate() const {
  if (validation_subjects.empty())
    fail(ErrorKind::Dataset, "dataset: no validation subjects");
  std::set<std::string> validation(validation_subjects.begin(),
                                   validation_subjects.end());
  std::set<std::string> external(external_subjects.begin(),
                                 external_subjects.end());
  if (validation.size() != validation_subjects.size() ||
      external.size() != external_subjects.size())
    fail(ErrorKind::Dataset, "dataset: duplicate subject ids");
  for (const auto& subject : external)
    if (validation.count(subject))
      fail(ErrorKind::Dataset,
           "dataset: subject '" + subject +
               "' appears in both the validation and external sets");
  for (const auto& rec : recordings)
    if (!validation.count(rec.subject_id) && !external.count(rec.subject_id))
      fail(ErrorKind::Dataset,
           "dataset: recording references unknown subject '" + rec.subject_id +
               "'");
}

bool DatasetManifest::is_validation(const std::string& subject) const {
  return std::find(validation_subjects.begin(), validation_subjects.end(),
                   subject) != validation_subjects.end();
}

std::vector<std::string> DatasetManifest::sessions_of(
    const std::string& subject) const {
  std::vector<std::string> sessions;
  for (const auto& rec : recordings)
    if (rec.subject_id == subject) sessions.push_back(rec.session_id);
  return sessions;
}

const RecordingRef* DatasetManifest::find(const std::string& subject,
                                          const std::string& session) const {
  for (const auto& rec : recordings)
    if (rec.subject_id == subject && rec.session_id == session) return &rec;
  return nullptr;
}

DatasetManifest load_dataset_manifest(const std::filesystem::path& root) {
  const auto path = root / "dataset.json";
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  DatasetManifest manifest;
  try {
    manifest.validation_subjects =
        j.at("validation_subjects").get<std::vector<std::string>>();
    manifest.external_subjects =
        j.at("external_subjects").get<std::vector<std::string>>();
    for (const auto& r : j.at("recordings")) {
      manifest.recordings.push_back({r.at("subject_id").get<std::string>(),
                                     r.at("session_id").get<std::string>(),
                                     r.at("path").get<std::string>()});
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  manifest.validate();
  return manifest;
}

void save_dataset_manifest(const DatasetManifest& manifest,
                           const std::filesystem::path& root) {
  manifest.validate();
  json j;
  j["validation_subjects"] = manifest.validation_subjects;
  j["external_subjects"] = manifest.external_subjects;
  json recs = json::array();
  for (const auto& r : manifest.recordings)
    recs.push_back({{"subject_id", r.subject_id},
                    {"session_id", r.session_id},
                    {"path", r.path}});
  j["recordings"] = recs;
  std::filesystem::create_directories(root);
  write_text_atomic(root / "dataset.json", j.dump(2) + "\n");
}

}  // namespace bcgauth
