#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "sgscan/chrono.hpp"
#include "sgscan/datasources.hpp"
#include "sgscan/outage_detector.hpp"

namespace sgscan {

enum class FailureLabel { regular_failure, planned, not_failure, ambiguous };

inline std::string_view to_string(FailureLabel l) {
  switch (l) {
    case FailureLabel::regular_failure: return "regular_failure";
    case FailureLabel::planned: return "planned";
    case FailureLabel::not_failure: return "not_failure";
    case FailureLabel::ambiguous: return "ambiguous";
  }
  return "?";
}

inline std::optional<FailureLabel> parse_failure_label(std::string_view s) {
  for (auto l : {FailureLabel::regular_failure, FailureLabel::planned, FailureLabel::not_failure,
                 FailureLabel::ambiguous}) {
    if (to_string(l) == s) return l;
  }
  return std::nullopt;
}

enum class Evidence : std::uint8_t {
  in_maintenance = 1 << 0,
  jobs_failed_here = 1 << 1,
  jobs_completed_here = 1 << 2,
  in_outage_db = 1 << 3,
  no_job_info = 1 << 4,
};

inline constexpr std::array<Evidence, 5> kEvidenceTags = {Evidence::in_maintenance, Evidence::jobs_failed_here,
                                                          Evidence::jobs_completed_here, Evidence::in_outage_db,
                                                          Evidence::no_job_info};

inline std::string_view to_string(Evidence e) {
  switch (e) {
    case Evidence::in_maintenance: return "in_maintenance";
    case Evidence::jobs_failed_here: return "jobs_failed_here";
    case Evidence::jobs_completed_here: return "jobs_completed_here";
    case Evidence::in_outage_db: return "in_outage_db";
    case Evidence::no_job_info: return "no_job_info";
  }
  return "?";
}

/// A small set of evidence tags.
class EvidenceSet {
 public:
  EvidenceSet() = default;
  EvidenceSet(std::initializer_list<Evidence> tags) {
    for (auto t : tags) add(t);
  }

  void add(Evidence e) noexcept { bits_ |= static_cast<std::uint8_t>(e); }
  bool has(Evidence e) const noexcept { return (bits_ & static_cast<std::uint8_t>(e)) != 0; }
  std::uint8_t bits() const noexcept { return bits_; }
  bool operator==(const EvidenceSet&) const = default;

  /// Tags joined with '+', in canonical order; empty set renders as "".
  std::string str() const {
    std::string out;
    for (auto e : kEvidenceTags) {
      if (!has(e)) continue;
      if (!out.empty()) out += '+';
      out += to_string(e);
    }
    return out;
  }

 private:
  std::uint8_t bits_ = 0;
};

/// Contradicting pairs: completed vs failed jobs, and maintenance vs outage database.
inline bool contradicts(const EvidenceSet& ev) {
  return (ev.has(Evidence::jobs_completed_here) && ev.has(Evidence::jobs_failed_here)) ||
         (ev.has(Evidence::in_maintenance) && ev.has(Evidence::in_outage_db));
}

/// The label is a function of the evidence set alone.
inline FailureLabel label_from_evidence(const EvidenceSet& ev) {
  if (contradicts(ev)) return FailureLabel::ambiguous;
  const bool maint = ev.has(Evidence::in_maintenance);
  const bool failed = ev.has(Evidence::jobs_failed_here);
  if (maint && !failed) return FailureLabel::planned;
  if (!maint && (failed || ev.has(Evidence::in_outage_db)) && !ev.has(Evidence::jobs_completed_here)) {
    return FailureLabel::regular_failure;
  }
  return FailureLabel::not_failure;
}

struct FailureEvent {
  OutageEvent outage;
  FailureLabel label = FailureLabel::not_failure;
  EvidenceSet evidence;
};

struct ClassifierInputs {
  const std::vector<MaintenanceWindow>* maintenance = nullptr;
  const JobIndex* jobs = nullptr;
  const std::vector<OutageRecord>* outage_db = nullptr;
  Duration correlation_window = minutes(10);
};

inline EvidenceSet gather_evidence(const OutageEvent& outage, const ClassifierInputs& in) {
  if (in.correlation_window <= Duration::zero()) throw ContractViolation("correlation window must be positive");
  EvidenceSet ev;
  const Instant t = outage.outage_time;
  const NodeId node = outage.node;
  if (in.maintenance != nullptr) {
    for (const auto& w : *in.maintenance) {
      if (w.contains(t) && scope_covers(w.scope, node)) ev.add(Evidence::in_maintenance);
    }
  }
  if (in.outage_db != nullptr) {
    for (const auto& r : *in.outage_db) {
      if (r.contains(t) && scope_covers(r.scope, node)) ev.add(Evidence::in_outage_db);
    }
  }
  // Job evidence is only consulted when the report covers the outage instant.
  if (in.jobs == nullptr || in.jobs->empty() || t < in.jobs->first_start() || t > in.jobs->last_end()) {
    ev.add(Evidence::no_job_info);
    return ev;
  }
  for (auto i : in.jobs->on_node(node)) {
    const auto& j = in.jobs->job(i);
    if (j.status == JobStatus::failed || j.status == JobStatus::node_fail) {
      const auto d = j.end - t;
      if ((d < Duration::zero() ? -d : d) <= in.correlation_window) ev.add(Evidence::jobs_failed_here);
    }
    if (j.status == JobStatus::completed && j.active_at(t)) ev.add(Evidence::jobs_completed_here);
  }
  return ev;
}

inline FailureEvent classify_outage(const OutageEvent& outage, const ClassifierInputs& in) {
  const auto ev = gather_evidence(outage, in);
  return FailureEvent{outage, label_from_evidence(ev), ev};
}

/// Convenience overload over plain lists.
inline FailureEvent classify_outage(const OutageEvent& outage, const std::vector<MaintenanceWindow>& maint,
                                    const std::vector<JobRecord>& jobs, const std::vector<OutageRecord>& odb,
                                    Duration correlation_window = minutes(10)) {
  const JobIndex index(jobs);
  return classify_outage(outage, ClassifierInputs{&maint, &index, &odb, correlation_window});
}

inline std::vector<FailureEvent> classify_all(const std::vector<OutageEvent>& outages, const ClassifierInputs& in) {
  std::vector<FailureEvent> out;
  out.reserve(outages.size());
  for (const auto& o : outages) out.push_back(classify_outage(o, in));
  return out;
}

inline std::vector<FailureEvent> classify_all(const std::vector<OutageEvent>& outages,
                                              const std::vector<MaintenanceWindow>& maint,
                                              const std::vector<JobRecord>& jobs, const std::vector<OutageRecord>& odb,
                                              Duration correlation_window = minutes(10)) {
  const JobIndex index(jobs);
  return classify_all(outages, ClassifierInputs{&maint, &index, &odb, correlation_window});
}

inline std::vector<FailureEvent> regular_failures(const std::vector<FailureEvent>& events) {
  std::vector<FailureEvent> out;
  for (const auto& e : events) {
    if (e.label == FailureLabel::regular_failure) out.push_back(e);
  }
  return out;
}

inline void write_classification(std::ostream& out, const std::vector<FailureEvent>& events) {
  out << "node,outage_time,label,evidence\n";
  for (const auto& e : events) {
    out << e.outage.node.name() << ',' << format_iso(e.outage.outage_time) << ',' << to_string(e.label) << ','
        << e.evidence.str() << '\n';
  }
}

}  // namespace sgscan
