#include "bcgauth/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <set>

#include "bcgauth/fsio.hpp"

namespace bcgauth {

std::string_view category_name(Category c) {
  switch (c) {
    case Category::ValidationPositive: return "validation_positive";
    case Category::ValidationNegative: return "validation_negative";
    case Category::NegativeExternal: return "negative_external";
  }
  return "unknown";
}

void AuthPolicy::validate() const {
  if (attempts_s < 1)
    fail(ErrorKind::Config, "policy: attempts_s must be >= 1");
  if (w_s < 1) fail(ErrorKind::Config, "policy: w_s must be >= 1");
  if (threshold_t < 0.0 || threshold_t > 1.0)
    fail(ErrorKind::Config, "policy: threshold must lie in [0, 1]");
}

Decision decide(std::span<const double> window, const AuthPolicy& policy) {
  policy.validate();
  if (window.size() != static_cast<std::size_t>(policy.attempts_s))
    fail(ErrorKind::Config,
         "decide: window of " + std::to_string(window.size()) +
             " scores does not match attempts_s = " +
             std::to_string(policy.attempts_s));
  for (const double c : window)
    if (c > policy.threshold_t) return Decision::Accept;
  return Decision::Reject;
}

std::vector<Decision> windowed_outcomes(std::span<const double> stream,
                                        const AuthPolicy& policy) {
  policy.validate();
  const std::size_t s = static_cast<std::size_t>(policy.attempts_s);
  if (stream.size() < s)
    fail(ErrorKind::TooShort,
         "windowed_outcomes: stream of " + std::to_string(stream.size()) +
             " segments is shorter than s = " + std::to_string(s));
  std::vector<Decision> outcomes;
  outcomes.reserve(stream.size() - s + 1);
  for (std::size_t begin = 0; begin + s <= stream.size(); ++begin)
    outcomes.push_back(decide(stream.subspan(begin, s), policy));
  return outcomes;
}

namespace {

double accept_fraction(const std::vector<Decision>& outcomes) {
  std::size_t accepts = 0;
  for (const auto d : outcomes)
    if (d == Decision::Accept) ++accepts;
  return static_cast<double>(accepts) / static_cast<double>(outcomes.size());
}

}  // namespace

Rates rates(const std::vector<Decision>& positives,
            const std::vector<Decision>& validation_negatives,
            const std::vector<Decision>& external_negatives) {
  if (positives.empty())
    fail(ErrorKind::UndefinedRate, "rates: no positive outcomes");
  if (validation_negatives.empty())
    fail(ErrorKind::UndefinedRate, "rates: no validation-negative outcomes");

  Rates r;
  r.tar = accept_fraction(positives);
  r.frr = 1.0 - r.tar;
  r.trr_validation = 1.0 - accept_fraction(validation_negatives);
  r.has_external = !external_negatives.empty();
  if (r.has_external) {
    r.trr_external = 1.0 - accept_fraction(external_negatives);
    r.far_combined =
        ((1.0 - r.trr_validation) + (1.0 - r.trr_external)) / 2.0;
  } else {
    r.trr_external = std::numeric_limits<double>::quiet_NaN();
    r.far_combined = 1.0 - r.trr_validation;
  }
  r.accuracy = (r.tar + r.trr_validation) / 2.0;
  return r;
}

// ---------------------------------------------------------------------------
// ROC / EER
// ---------------------------------------------------------------------------

namespace {

// Sliding-window maxima, window s, stride 1 (monotonic deque). The
// any-accept rule on a window is equivalent to comparing its maximum
// against the threshold.
std::vector<double> window_maxima(const std::vector<double>& stream, int s) {
  const std::size_t n = stream.size();
  const std::size_t w = static_cast<std::size_t>(s);
  if (n < w)
    fail(ErrorKind::TooShort,
         "roc: stream of " + std::to_string(n) +
             " segments is shorter than s = " + std::to_string(s));
  std::vector<double> maxima;
  maxima.reserve(n - w + 1);
  std::deque<std::size_t> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    while (!candidates.empty() && stream[candidates.back()] <= stream[i])
      candidates.pop_back();
    candidates.push_back(i);
    if (candidates.front() + w == i) candidates.pop_front();
    if (i + 1 >= w) maxima.push_back(stream[candidates.front()]);
  }
  return maxima;
}

// Fraction of values strictly greater than t, over a sorted vector.
double fraction_above(const std::vector<double>& sorted, double t) {
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), t);
  return static_cast<double>(sorted.end() - it) /
         static_cast<double>(sorted.size());
}

}  // namespace

RocCurve roc_curve(const std::vector<ScoreStream>& streams, int attempts_s) {
  std::vector<double> pos, valneg, ext;
  for (const auto& stream : streams) {
    auto maxima = window_maxima(stream.confidences, attempts_s);
    auto& dst = stream.category == Category::ValidationPositive ? pos
                : stream.category == Category::ValidationNegative ? valneg
                                                                  : ext;
    dst.insert(dst.end(), maxima.begin(), maxima.end());
  }
  if (pos.empty()) fail(ErrorKind::UndefinedRate, "roc: no positive streams");
  if (valneg.empty() && ext.empty())
    fail(ErrorKind::UndefinedRate, "roc: no negative streams");
  std::sort(pos.begin(), pos.end());
  std::sort(valneg.begin(), valneg.end());
  std::sort(ext.begin(), ext.end());

  // Every distinct confidence plus {0, 1}, plus a below-range sentinel so
  // the sweep reaches the all-accept corner.
  std::set<double> thresholds{-1.0, 0.0, 1.0};
  for (const auto* v : {&pos, &valneg, &ext})
    thresholds.insert(v->begin(), v->end());

  RocCurve curve;
  curve.sweep.reserve(thresholds.size());
  for (const double t : thresholds) {
    RocPoint p;
    p.threshold = t;
    p.tar = fraction_above(pos, t);
    p.frr = 1.0 - p.tar;
    const bool has_val = !valneg.empty();
    const bool has_ext = !ext.empty();
    if (has_val && has_ext)
      p.far = (fraction_above(valneg, t) + fraction_above(ext, t)) / 2.0;
    else
      p.far = fraction_above(has_val ? valneg : ext, t);
    curve.sweep.push_back(p);
  }

  // Threshold ascending means far descending; reverse for the (far, tar)
  // polyline and integrate by trapezoids.
  curve.points.reserve(curve.sweep.size());
  for (auto it = curve.sweep.rbegin(); it != curve.sweep.rend(); ++it)
    curve.points.emplace_back(it->far, it->tar);
  double auc = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& [far0, tar0] = curve.points[i - 1];
    const auto& [far1, tar1] = curve.points[i];
    auc += (far1 - far0) * (tar1 + tar0) / 2.0;
  }
  curve.auc = auc;
  return curve;
}

EerResult eer_from_sweep(const std::vector<RocPoint>& sweep) {
  if (sweep.empty()) fail(ErrorKind::UndefinedRate, "eer: empty sweep");

  EerResult result;
  // far - frr decreases along the threshold-ascending sweep; look for a
  // sign change between adjacent points.
  for (std::size_t i = 0; i + 1 < sweep.size(); ++i) {
    const double d0 = sweep[i].far - sweep[i].frr;
    const double d1 = sweep[i + 1].far - sweep[i + 1].frr;
    if (d0 < 0.0 || d1 > 0.0) continue;
    if (d0 == 0.0) {
      result.eer = sweep[i].far;
      result.threshold = sweep[i].threshold;
      return result;
    }
    const double fraction = d0 / (d0 - d1);
    const double far =
        sweep[i].far + fraction * (sweep[i + 1].far - sweep[i].far);
    const double frr =
        sweep[i].frr + fraction * (sweep[i + 1].frr - sweep[i].frr);
    result.eer = (far + frr) / 2.0;
    result.threshold = sweep[i].threshold +
                       fraction * (sweep[i + 1].threshold - sweep[i].threshold);
    return result;
  }

  // No crossing: report the endpoint closest to far = frr.
  result.degenerate = true;
  double best_gap = std::numeric_limits<double>::infinity();
  for (const auto& p : sweep) {
    const double gap = std::abs(p.far - p.frr);
    if (gap < best_gap) {
      best_gap = gap;
      result.eer = (p.far + p.frr) / 2.0;
      result.threshold = p.threshold;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Record grouping and the session report
// ---------------------------------------------------------------------------

std::vector<ScoreStream> group_streams(const std::vector<ScoreRecord>& records) {
  std::map<std::tuple<std::string, std::string, std::string>,
           std::vector<const ScoreRecord*>>
      groups;
  for (const auto& r : records) {
    if (r.confidence < 0.0 || r.confidence > 1.0 || !std::isfinite(r.confidence))
      fail(ErrorKind::Input, "score record: confidence outside [0, 1]");
    const bool is_self = r.claimed_subject == r.true_subject;
    if (is_self != (r.category == Category::ValidationPositive))
      fail(ErrorKind::Integrity,
           "score record: category " + std::string(category_name(r.category)) +
               " inconsistent with claimed=" + r.claimed_subject +
               " true=" + r.true_subject);
    groups[{r.claimed_subject, r.true_subject, r.session_id}].push_back(&r);
  }

  std::vector<ScoreStream> streams;
  streams.reserve(groups.size());
  for (auto& [key, members] : groups) {
    std::sort(members.begin(), members.end(),
              [](const ScoreRecord* a, const ScoreRecord* b) {
                return a->segment_index < b->segment_index;
              });
    ScoreStream stream;
    stream.category = members.front()->category;
    stream.confidences.reserve(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (members[i]->category != stream.category)
        fail(ErrorKind::Integrity, "score record: mixed categories in stream");
      if (i > 0 && members[i]->segment_index !=
                       members[i - 1]->segment_index + 1)
        fail(ErrorKind::Integrity,
             "score record: segment indices not contiguous for claimed=" +
                 std::get<0>(key) + " true=" + std::get<1>(key));
      stream.confidences.push_back(members[i]->confidence);
    }
    streams.push_back(std::move(stream));
  }
  return streams;
}

namespace {

EvalCell evaluate_cell(const std::vector<ScoreRecord>& session_records,
                       const std::string& session_id, int attempts_s) {
  EvalCell cell;
  cell.session_id = session_id;
  cell.attempts_s = attempts_s;

  const auto streams = group_streams(session_records);
  cell.roc = roc_curve(streams, attempts_s);
  const auto eer = eer_from_sweep(cell.roc.sweep);
  cell.eer = eer.eer;
  cell.eer_threshold = eer.threshold;
  cell.eer_degenerate = eer.degenerate;
  cell.auc = cell.roc.auc;

  // Point metrics at the pooled EER threshold.
  AuthPolicy policy;
  policy.threshold_t = std::clamp(eer.threshold, 0.0, 1.0);
  policy.attempts_s = attempts_s;
  std::vector<Decision> pos, valneg, ext;
  for (const auto& stream : streams) {
    const auto outcomes = windowed_outcomes(stream.confidences, policy);
    auto& dst = stream.category == Category::ValidationPositive ? pos
                : stream.category == Category::ValidationNegative ? valneg
                                                                  : ext;
    dst.insert(dst.end(), outcomes.begin(), outcomes.end());
  }
  const Rates r = rates(pos, valneg, ext);
  cell.far = r.far_combined;
  cell.frr = r.frr;
  cell.tar = r.tar;
  cell.trr_validation = r.trr_validation;
  cell.trr_external = r.trr_external;
  cell.has_external = r.has_external;
  cell.accuracy = r.accuracy;

  // Per-subject EER, averaged over claimed subjects.
  std::set<std::string> subjects;
  for (const auto& r2 : session_records) subjects.insert(r2.claimed_subject);
  double eer_sum = 0.0;
  int eer_count = 0;
  for (const auto& subject : subjects) {
    std::vector<ScoreRecord> own;
    for (const auto& r2 : session_records)
      if (r2.claimed_subject == subject) own.push_back(r2);
    const auto own_curve = roc_curve(group_streams(own), attempts_s);
    eer_sum += eer_from_sweep(own_curve.sweep).eer;
    ++eer_count;
  }
  cell.eer_subject_mean = eer_count > 0 ? eer_sum / eer_count : 0.0;
  return cell;
}

}  // namespace

EvalReport session_report(const std::vector<ScoreRecord>& records,
                          const std::vector<std::string>& sessions,
                          const std::vector<int>& s_values) {
  EvalReport report;
  for (const auto& session : sessions) {
    std::vector<ScoreRecord> session_records;
    for (const auto& r : records)
      if (r.session_id == session) session_records.push_back(r);
    if (session_records.empty()) {
      report.warnings.push_back("session '" + session +
                                "' has no records; omitted from report");
      continue;
    }
    for (const int s : s_values)
      report.cells.push_back(evaluate_cell(session_records, session, s));
  }
  return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json sessions = nlohmann::json::object();
  for (const auto& cell : report.cells) {
    nlohmann::json c{{"far", cell.far},
                     {"frr", cell.frr},
                     {"tar", cell.tar},
                     {"trr_validation", cell.trr_validation},
                     {"accuracy", cell.accuracy},
                     {"eer", cell.eer},
                     {"eer_threshold", cell.eer_threshold},
                     {"eer_degenerate", cell.eer_degenerate},
                     {"eer_subject_mean", cell.eer_subject_mean},
                     {"auc", cell.auc}};
    if (cell.has_external)
      c["trr_external"] = cell.trr_external;
    else
      c["trr_external"] = nullptr;
    sessions[cell.session_id]["s" + std::to_string(cell.attempts_s)] =
        std::move(c);
  }
  nlohmann::json j;
  j["sessions"] = std::move(sessions);
  j["warnings"] = report.warnings;
  return j;
}

std::string roc_to_csv(const RocCurve& curve) {
  std::string out = "threshold,far,frr,tar\n";
  for (const auto& p : curve.sweep) {
    out += format_double(p.threshold);
    out += ',';
    out += format_double(p.far);
    out += ',';
    out += format_double(p.frr);
    out += ',';
    out += format_double(p.tar);
    out += '\n';
  }
  return out;
}

}  // namespace bcgauth
