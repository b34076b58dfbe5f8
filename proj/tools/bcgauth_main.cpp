// Command-line surface: synth, enroll, auth, ga-search, sweep-w, report.
// Successful commands print a result summary as JSON on stdout; failures
// print {"error", "message"} JSON on stderr and exit nonzero.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "bcgauth/dataset.hpp"
#include "bcgauth/errors.hpp"
#include "bcgauth/fsio.hpp"
#include "bcgauth/harness.hpp"

using namespace bcgauth;
using nlohmann::json;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string dataset_override;
  std::uint64_t seed_override = 0;
  bool has_seed_override = false;
};

void add_common(CLI::App* cmd, CommonOptions* common) {
  cmd->add_option("--config", common->config_path,
                  "Experiment config JSON (defaults apply when omitted)");
  cmd->add_option("--dataset", common->dataset_override,
                  "Dataset root (overrides the config)");
  cmd->add_option("--seed", common->seed_override, "Root random seed override")
      ->each([common](const std::string&) { common->has_seed_override = true; });
}

// Config file first, then flag overrides on top.
ExperimentConfig resolve_config(const CommonOptions& common) {
  ExperimentConfig cfg;
  if (!common.config_path.empty()) cfg = load_config(common.config_path);
  if (!common.dataset_override.empty()) cfg.dataset_root = common.dataset_override;
  if (common.has_seed_override) cfg.seed = common.seed_override;
  cfg.validate();
  return cfg;
}

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ballistocardiogram verification pipeline"};
  app.require_subcommand(1);

  // --- synth ---------------------------------------------------------------
  CommonOptions synth_common;
  SynthOptions synth_options;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  add_common(synth, &synth_common);
  synth->add_option("--out", synth_out, "Dataset root to create");
  synth->add_option("--validation", synth_options.n_validation,
                    "Validation subject count");
  synth->add_option("--external", synth_options.n_external,
                    "External subject count");
  synth->add_option("--sessions", synth_options.n_sessions,
                    "Sessions per validation subject");
  synth->add_flag("--force", synth_options.force,
                  "Overwrite a non-empty target");

  // --- enroll --------------------------------------------------------------
  CommonOptions enroll_common;
  std::string enroll_subject, enroll_out, enroll_genome;
  auto* enroll = app.add_subcommand("enroll", "Train one subject's verifier");
  add_common(enroll, &enroll_common);
  enroll->add_option("--subject", enroll_subject, "Validation subject id")
      ->required();
  enroll->add_option("--out", enroll_out, "Model file to write");
  enroll->add_option("--genome", enroll_genome,
                     "Genome JSON (e.g. a ga-search result) overriding the config");

  // --- auth ----------------------------------------------------------------
  CommonOptions auth_common;
  std::string auth_model, auth_recording, auth_claimed;
  double auth_threshold = -1.0;
  int auth_attempts = 1;
  auto* auth = app.add_subcommand("auth", "Replay an authentication attempt");
  add_common(auth, &auth_common);
  auth->add_option("--model", auth_model, "Model file")->required();
  auth->add_option("--recording", auth_recording, "Recording manifest JSON")
      ->required();
  auth->add_option("--claimed", auth_claimed, "Claimed subject id")->required();
  auth->add_option("--threshold", auth_threshold,
                   "Decision threshold T (default: config threshold)");
  auth->add_option("--attempts", auth_attempts, "Authentication attempts s");

  // --- ga-search -----------------------------------------------------------
  CommonOptions ga_common;
  std::string ga_subject, ga_out, ga_log;
  int ga_population = 0, ga_generations = 0, ga_children = 0, ga_random = -1;
  auto* ga = app.add_subcommand("ga-search",
                                "Genetic search for the CNN genome");
  add_common(ga, &ga_common);
  ga->add_option("--subject", ga_subject, "Validation subject id")->required();
  ga->add_option("--out", ga_out, "Best genome JSON to write");
  ga->add_option("--log", ga_log, "JSONL evaluation log to write");
  ga->add_option("--population", ga_population, "Population size override");
  ga->add_option("--generations", ga_generations, "Generation count override");
  ga->add_option("--children", ga_children, "Children per generation override");
  ga->add_option("--random-parents", ga_random, "Random parent count override");

  // --- sweep-w ---------------------------------------------------------------
  CommonOptions sweep_common;
  std::vector<int> sweep_w{1, 2, 3, 4, 5};
  std::string sweep_out;
  auto* sweep = app.add_subcommand(
      "sweep-w", "Accuracy sweep over segment lengths (Table II procedure)");
  add_common(sweep, &sweep_common);
  sweep->add_option("--w", sweep_w, "Segment lengths to evaluate");
  sweep->add_option("--out", sweep_out, "CSV file to write");

  // --- report ----------------------------------------------------------------
  CommonOptions report_common;
  std::string report_models, report_out;
  auto* report = app.add_subcommand(
      "report", "Session x attempts metric grid with ROC curves");
  add_common(report, &report_common);
  report->add_option("--models", report_models, "Directory of enrolled models")
      ->required();
  report->add_option("--out", report_out, "Report output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      ExperimentConfig cfg = resolve_config(synth_common);
      if (!synth_out.empty()) cfg.dataset_root = synth_out;
      cmd_synth(cfg, synth_options);
      const auto manifest = load_dataset_manifest(cfg.dataset_root);
      print_json({{"dataset_root", cfg.dataset_root.string()},
                  {"validation_subjects", manifest.validation_subjects.size()},
                  {"external_subjects", manifest.external_subjects.size()},
                  {"recordings", manifest.recordings.size()}});
    } else if (enroll->parsed()) {
      const ExperimentConfig cfg = resolve_config(enroll_common);
      const std::filesystem::path out =
          enroll_out.empty() ? std::filesystem::path("models/" + enroll_subject + ".model.json")
                             : std::filesystem::path(enroll_out);
      std::optional<CnnGenome> genome;
      if (!enroll_genome.empty()) {
        const auto j = json::parse(read_text_file(enroll_genome));
        genome = genome_from_json(j.contains("genome") ? j["genome"] : j);
      }
      const auto outcome =
          cmd_enroll(cfg, enroll_subject, out, genome ? &*genome : nullptr);
      print_json({{"model", outcome.model_path.string()},
                  {"positive_segments", outcome.positive_segments},
                  {"negative_segments", outcome.negative_segments},
                  {"final_loss", outcome.report.final_loss},
                  {"epochs_run", outcome.report.epochs_run}});
    } else if (auth->parsed()) {
      const ExperimentConfig cfg = resolve_config(auth_common);
      const double threshold =
          auth_threshold >= 0.0 ? auth_threshold : cfg.threshold_t;
      const auto outcome = cmd_auth(cfg, auth_model, auth_recording,
                                    auth_claimed, threshold, auth_attempts);
      print_json(
          {{"claimed", auth_claimed},
           {"decision", outcome.decision == Decision::Accept ? "accept" : "reject"},
           {"threshold", outcome.threshold},
           {"attempts", outcome.attempts},
           {"confidences", outcome.confidences}});
    } else if (ga->parsed()) {
      ExperimentConfig cfg = resolve_config(ga_common);
      if (ga_population > 0) cfg.ga.population = ga_population;
      if (ga_generations > 0) cfg.ga.generations = ga_generations;
      if (ga_children > 0) cfg.ga.children_per_gen = ga_children;
      if (ga_random >= 0) cfg.ga.random_parents = ga_random;
      const std::filesystem::path out =
          ga_out.empty() ? std::filesystem::path(ga_subject + ".genome.json")
                         : std::filesystem::path(ga_out);
      const std::filesystem::path log =
          ga_log.empty() ? std::filesystem::path(ga_subject + ".ga.jsonl")
                         : std::filesystem::path(ga_log);
      const auto result = cmd_ga(cfg, ga_subject, out, log);
      print_json({{"best_genome", out.string()},
                  {"log", log.string()},
                  {"best_score", result.best.score},
                  {"best_far", result.best.far},
                  {"best_frr", result.best.frr},
                  {"generations", result.history.size()}});
    } else if (sweep->parsed()) {
      const ExperimentConfig cfg = resolve_config(sweep_common);
      const auto rows = cmd_sweep_w(cfg, sweep_w, sweep_out);
      json table = json::array();
      for (const auto& row : rows)
        table.push_back({{"w", row.w}, {"mean_accuracy", row.mean_accuracy}});
      print_json({{"table", table}, {"csv", sweep_out}});
    } else if (report->parsed()) {
      const ExperimentConfig cfg = resolve_config(report_common);
      const auto result = cmd_report(cfg, report_models, report_out);
      json cells = json::array();
      for (const auto& cell : result.cells)
        cells.push_back({{"session", cell.session_id},
                         {"s", cell.attempts_s},
                         {"eer", cell.eer},
                         {"auc", cell.auc}});
      print_json({{"out", report_out},
                  {"cells", cells},
                  {"warnings", result.warnings}});
    }
  } catch (const Error& e) {
    std::cerr << json{{"error", error_kind_name(e.kind())},
                      {"message", e.what()}}
                     .dump()
              << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump()
              << "\n";
    return 1;
  }
  return 0;
}
