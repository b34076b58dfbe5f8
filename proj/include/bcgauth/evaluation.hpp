// Verification metrics and the multi-attempt decision policy: FAR/FRR/TAR/
// TRR/accuracy, threshold sweeps for ROC/AUC, EER by linear interpolation,
// the combined FAR over validation and external negatives, and the
// any-of-s-segments authentication rule.
#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bcgauth/errors.hpp"

namespace bcgauth {

enum class Category { ValidationPositive, ValidationNegative, NegativeExternal };
enum class Decision { Accept, Reject };

std::string_view category_name(Category c);

// One scored segment: the unit of all evaluation.
struct ScoreRecord {
  std::string claimed_subject;
  std::string true_subject;
  std::string session_id;
  int segment_index = 0;
  double confidence = 0.0;
  Category category = Category::ValidationPositive;
};

struct AuthPolicy {
  double threshold_t = 0.5;
  int attempts_s = 1;
  int w_s = 3;

  // Overlapped segments: s attempts need only s + w - 1 seconds of signal.
  int required_seconds() const { return attempts_s + w_s - 1; }
  void validate() const;
};

// Accept iff any confidence in the window strictly exceeds the threshold.
Decision decide(std::span<const double> window, const AuthPolicy& policy);

// Slides a length-s window (stride 1) over one contiguous stream of
// confidences and applies `decide` per window.
std::vector<Decision> windowed_outcomes(std::span<const double> stream,
                                        const AuthPolicy& policy);

struct Rates {
  double tar = 0.0;
  double frr = 0.0;
  double trr_validation = 0.0;
  double trr_external = 0.0;  // NaN when no external outcomes supplied
  double far_combined = 0.0;
  double accuracy = 0.0;  // (tar + trr_validation) / 2
  bool has_external = false;
};

// far_combined = ((1 - validation TRR) + (1 - external TRR)) / 2 when
// external outcomes exist, else the plain validation FAR.
Rates rates(const std::vector<Decision>& positives,
            const std::vector<Decision>& validation_negatives,
            const std::vector<Decision>& external_negatives);

// One contiguous stream of confidences for a single (claimed, true,
// session) combination.
struct ScoreStream {
  Category category = Category::ValidationPositive;
  std::vector<double> confidences;
};

struct RocPoint {
  double threshold = 0.0;
  double far = 0.0;  // combined FAR
  double frr = 0.0;
  double tar = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> sweep;          // sorted by threshold ascending
  std::vector<std::pair<double, double>> points;  // (far, tar), far ascending
  double auc = 0.0;
};

// Exact ROC: sweeps every distinct observed confidence plus {0, 1} and a
// below-zero sentinel so the curve spans (0,0) to (1,1). Outcomes per
// threshold follow the s-attempt rule on each stream, pooled per category.
RocCurve roc_curve(const std::vector<ScoreStream>& streams, int attempts_s);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
  bool degenerate = false;  // no far/frr crossing in the sweep
};

// Finds adjacent sweep points bracketing far = frr and linearly
// interpolates rate and threshold.
EerResult eer_from_sweep(const std::vector<RocPoint>& sweep);

// Groups records by (claimed, true, session), orders each group by
// segment_index and validates contiguity and category consistency.
std::vector<ScoreStream> group_streams(const std::vector<ScoreRecord>& records);

struct EvalCell {
  std::string session_id;
  int attempts_s = 0;
  double far = 0.0;
  double frr = 0.0;
  double tar = 0.0;
  double trr_validation = 0.0;
  double trr_external = 0.0;
  double accuracy = 0.0;
  bool has_external = false;
  double eer = 0.0;            // pooled over all subjects' records
  double eer_threshold = 0.0;
  bool eer_degenerate = false;
  double eer_subject_mean = 0.0;  // mean of per-claimed-subject EERs
  double auc = 0.0;
  RocCurve roc;
};

struct EvalReport {
  std::vector<EvalCell> cells;
  std::vector<std::string> warnings;
};

// Full (session x s) metric grid. Point metrics (far/frr/tar/trr) are
// reported at the pooled EER threshold of each cell. Empty sessions are
// omitted with a warning.
EvalReport session_report(const std::vector<ScoreRecord>& records,
                          const std::vector<std::string>& sessions,
                          const std::vector<int>& s_values);

nlohmann::json report_to_json(const EvalReport& report);
std::string roc_to_csv(const RocCurve& curve);

}  // namespace bcgauth
