#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sgscan/anomaly_detector.hpp"
#include "sgscan/chrono.hpp"
#include "sgscan/log_model.hpp"

namespace sgscan {

enum class Variant { raw, anonymized, filtered_raw, filtered_anonymized };

inline constexpr Variant kVariants[] = {Variant::raw, Variant::anonymized, Variant::filtered_raw,
                                        Variant::filtered_anonymized};

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::raw: return "raw";
    case Variant::anonymized: return "anonymized";
    case Variant::filtered_raw: return "filtered_raw";
    case Variant::filtered_anonymized: return "filtered_anonymized";
  }
  return "?";
}

inline std::optional<Variant> parse_variant(std::string_view s) {
  for (auto v : kVariants) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

inline bool is_anonymized(Variant v) { return v == Variant::anonymized || v == Variant::filtered_anonymized; }
inline bool is_filtered(Variant v) { return v == Variant::filtered_raw || v == Variant::filtered_anonymized; }

struct MatchResult {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (detected index, truth index)
};

/// One-to-one matching of detections to truth events on the same node within
/// `tolerance`. Per node, both lists are walked in time order and the earliest
/// compatible pair is taken, which is maximum cardinality for interval matching
/// on a line.
inline MatchResult match_detections(const std::vector<Detection>& detected, const std::vector<Detection>& truth,
                                    Duration tolerance = minutes(10)) {
  if (tolerance < Duration::zero()) throw ContractViolation("match tolerance must not be negative");
  std::map<NodeId, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> by_node;
  for (std::size_t i = 0; i < detected.size(); ++i) by_node[detected[i].node].first.push_back(i);
  for (std::size_t i = 0; i < truth.size(); ++i) by_node[truth[i].node].second.push_back(i);
  MatchResult r;
  for (auto& [node, lists] : by_node) {
    auto& [ds, ts] = lists;
    std::stable_sort(ds.begin(), ds.end(), [&](auto a, auto b) { return detected[a].instant < detected[b].instant; });
    std::stable_sort(ts.begin(), ts.end(), [&](auto a, auto b) { return truth[a].instant < truth[b].instant; });
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < ds.size() && j < ts.size()) {
      const Instant d = detected[ds[i]].instant;
      const Instant t = truth[ts[j]].instant;
      if (d < t - tolerance) {
        ++i;
      } else if (d > t + tolerance) {
        ++j;
      } else {
        r.pairs.emplace_back(ds[i], ts[j]);
        ++i;
        ++j;
      }
    }
  }
  std::sort(r.pairs.begin(), r.pairs.end());
  r.true_positives = r.pairs.size();
  r.false_positives = detected.size() - r.true_positives;
  r.false_negatives = truth.size() - r.true_positives;
  return r;
}

struct EvaluationReport {
  Variant variant = Variant::raw;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  double precision = 1.0;
  double recall = 1.0;
  Duration match_tolerance = minutes(10);
  /// Set when precision fell back to 1 because nothing was detected.
  bool no_detections = false;

  bool operator==(const EvaluationReport&) const = default;
};

inline EvaluationReport make_report(Variant v, const MatchResult& m, Duration tolerance) {
  EvaluationReport r;
  r.variant = v;
  r.true_positives = m.true_positives;
  r.false_positives = m.false_positives;
  r.false_negatives = m.false_negatives;
  r.match_tolerance = tolerance;
  const auto tp = static_cast<double>(m.true_positives);
  const auto detected = m.true_positives + m.false_positives;
  const auto actual = m.true_positives + m.false_negatives;
  r.no_detections = detected == 0;
  r.precision = detected == 0 ? 1.0 : tp / static_cast<double>(detected);
  r.recall = actual == 0 ? 1.0 : tp / static_cast<double>(actual);
  return r;
}

inline EvaluationReport evaluate(Variant v, const std::vector<Detection>& detected, const std::vector<Detection>& truth,
                                 Duration tolerance = minutes(10)) {
  return make_report(v, match_detections(detected, truth, tolerance), tolerance);
}

inline void write_reports_csv(std::ostream& out, const std::vector<EvaluationReport>& reports) {
  out << "variant,true_positives,false_positives,false_negatives,precision,recall,match_tolerance_s,no_detections\n";
  char buf[64];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%.4f,%.4f", r.precision, r.recall);
    out << to_string(r.variant) << ',' << r.true_positives << ',' << r.false_positives << ',' << r.false_negatives << ','
        << buf << ',' << r.match_tolerance.count() << ',' << (r.no_detections ? "true" : "false") << '\n';
  }
}

/// Human-readable table: one row per data format with precision and recall.
inline void write_reports_table(std::ostream& out, const std::vector<EvaluationReport>& reports) {
  char line[160];
  std::snprintf(line, sizeof line, "%-22s %9s %9s %5s %5s %5s\n", "Data format", "Precision", "Recall", "TP", "FP", "FN");
  out << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-22s %8.1f%% %8.1f%% %5zu %5zu %5zu%s\n", std::string(to_string(r.variant)).c_str(),
                  100.0 * r.precision, 100.0 * r.recall, r.true_positives, r.false_positives, r.false_negatives,
                  r.no_detections ? "  (no detections)" : "");
    out << line;
  }
}

}  // namespace sgscan
