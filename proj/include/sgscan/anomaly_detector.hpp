#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sgscan/chrono.hpp"
#include "sgscan/corpus_index.hpp"
#include "sgscan/datasources.hpp"
#include "sgscan/error.hpp"
#include "sgscan/log_model.hpp"
#include "sgscan/parallel.hpp"
#include "sgscan/vicinity.hpp"

namespace sgscan {

// ---------------------------------------------------------------------------
// SG parameter
// ---------------------------------------------------------------------------

struct SGObservation {
  NodeId node;
  Instant at;
  Duration window{1800};
  std::size_t sg = 0;

  bool operator==(const SGObservation&) const = default;
};

/// Entries of `series` in [at - window, at). `series` must be time-sorted.
inline SGObservation compute_sg(const NodeSeries& series, Instant at, Duration window = minutes(30)) {
  return SGObservation{series.node, at, window, series.count_in(at, window)};
}

inline SGObservation compute_sg(const CorpusIndex& index, NodeId node, Instant at, Duration window = minutes(30)) {
  return SGObservation{node, at, window, index.sg(node, at, window)};
}

// ---------------------------------------------------------------------------
// 1-D 2-means
// ---------------------------------------------------------------------------

/// Two-cluster partition of 1-D values. Cluster 0 holds the lower values.
/// `degenerate` is set when all values are equal (one cluster, wcss 0).
struct KMeansResult {
  std::vector<int> assignment;
  double centers[2] = {0.0, 0.0};
  std::size_t sizes[2] = {0, 0};
  double wcss = 0.0;
  bool degenerate = false;
};

namespace detail {

inline bool small_integers(const std::vector<double>& v) {
  if (v.size() > 4096) return false;
  for (double x : v) {
    if (x != std::floor(x) || std::fabs(x) > 1048576.0) return false;
  }
  return true;
}

inline double sum_squares_about_mean(const std::vector<double>& sorted, std::size_t lo, std::size_t hi) {
  long double sum = 0;
  for (std::size_t i = lo; i < hi; ++i) sum += sorted[i];
  const long double mean = sum / static_cast<long double>(hi - lo);
  long double ss = 0;
  for (std::size_t i = lo; i < hi; ++i) ss += (sorted[i] - mean) * (sorted[i] - mean);
  return static_cast<double>(ss);
}

}  // namespace detail

/// Optimal 2-means in one dimension. The optimum is a split of the sorted values,
/// so every split between distinct values is evaluated and the cheapest is kept;
/// ties go to the split with fewer low values. Integer inputs are compared exactly.
inline KMeansResult kmeans_1d_2(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n < 3) throw ContractViolation("kmeans_1d_2 requires at least 3 values");
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  KMeansResult r;
  r.assignment.assign(n, 0);
  if (sorted.front() == sorted.back()) {
    r.degenerate = true;
    r.centers[0] = r.centers[1] = sorted.front();
    r.sizes[0] = n;
    return r;
  }

  std::size_t best = 0;  // number of values in the low cluster
  if (detail::small_integers(sorted)) {
    using I = __int128;
    std::vector<I> s(n + 1, 0), q(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = static_cast<long long>(sorted[i]);
      s[i + 1] = s[i] + x;
      q[i + 1] = q[i] + static_cast<I>(x) * x;
    }
    // cost(k) = (k*Q1 - S1^2)/k + (m*Q2 - S2^2)/m, m = n - k; kept as num/den.
    I best_num = 0, best_den = 1;
    for (std::size_t k = 1; k < n; ++k) {
      if (sorted[k - 1] == sorted[k]) continue;
      const I kk = static_cast<I>(k), m = static_cast<I>(n - k);
      const I s1 = s[k], q1 = q[k], s2 = s[n] - s[k], q2 = q[n] - q[k];
      const I a = kk * q1 - s1 * s1, b = m * q2 - s2 * s2;
      const I num = a * m + b * kk, den = kk * m;
      if (best == 0 || num * best_den < best_num * den) {
        best = k;
        best_num = num;
        best_den = den;
      }
    }
  } else {
    const long double mean =
        std::accumulate(sorted.begin(), sorted.end(), 0.0L) / static_cast<long double>(n);
    std::vector<long double> s(n + 1, 0), q(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const long double x = sorted[i] - mean;
      s[i + 1] = s[i] + x;
      q[i + 1] = q[i] + x * x;
    }
    long double best_cost = std::numeric_limits<long double>::infinity();
    for (std::size_t k = 1; k < n; ++k) {
      if (sorted[k - 1] == sorted[k]) continue;
      const long double s1 = s[k], s2 = s[n] - s[k];
      const long double cost = (q[k] - s1 * s1 / k) + (q[n] - q[k] - s2 * s2 / (n - k));
      if (cost < best_cost) {
        best_cost = cost;
        best = k;
      }
    }
  }

  const double boundary = sorted[best];  // smallest value of the high cluster
  for (std::size_t i = 0; i < n; ++i) r.assignment[i] = values[i] >= boundary ? 1 : 0;
  r.sizes[0] = best;
  r.sizes[1] = n - best;
  long double lo = 0, hi = 0;
  for (std::size_t i = 0; i < best; ++i) lo += sorted[i];
  for (std::size_t i = best; i < n; ++i) hi += sorted[i];
  r.centers[0] = static_cast<double>(lo / static_cast<long double>(best));
  r.centers[1] = static_cast<double>(hi / static_cast<long double>(n - best));
  r.wcss = detail::sum_squares_about_mean(sorted, 0, best) + detail::sum_squares_about_mean(sorted, best, n);
  return r;
}

// ---------------------------------------------------------------------------
// Threshold and verdicts
// ---------------------------------------------------------------------------

struct ThresholdOptions {
  double alpha = 6.0;
  double tau_min = 1.0;
};

/// Cluster summary for one vicinity group at one moment. `members` is aligned
/// with the observations it was computed from: 0 = minority, 1 = majority.
struct ThresholdReport {
  double c_minor = 0.0;
  double c_major = 0.0;
  std::size_t minor_size = 0;
  std::size_t major_size = 0;
  double wcss = 0.0;
  double tau = 1.0;
  bool degenerate = false;
  std::vector<NodeId> nodes;
  std::vector<int> members;

  /// Abnormal verdicts need a strict minority and a non-zero spread.
  bool separable() const noexcept { return !degenerate && wcss > 0.0 && minor_size < major_size; }
};

/// Returns nullopt for groups with fewer than 3 observations (skip signal).
inline std::optional<ThresholdReport> deviation_threshold(const std::vector<SGObservation>& sgs,
                                                          const ThresholdOptions& opt = {}) {
  if (sgs.size() < 3) return std::nullopt;
  std::vector<double> values;
  values.reserve(sgs.size());
  for (const auto& o : sgs) values.push_back(static_cast<double>(o.sg));
  const auto km = kmeans_1d_2(values);
  ThresholdReport r;
  r.wcss = km.wcss;
  r.degenerate = km.degenerate;
  r.tau = std::max(opt.tau_min, opt.alpha * std::sqrt(km.wcss / static_cast<double>(sgs.size())));
  for (const auto& o : sgs) r.nodes.push_back(o.node);
  if (km.degenerate) {
    r.c_minor = r.c_major = km.centers[0];
    r.major_size = sgs.size();
    r.members.assign(sgs.size(), 1);
    return r;
  }
  // The smaller cluster is the minority; equal sizes fall back to the lower values.
  const int minor = km.sizes[1] < km.sizes[0] ? 1 : 0;
  r.c_minor = km.centers[minor];
  r.c_major = km.centers[1 - minor];
  r.minor_size = km.sizes[minor];
  r.major_size = km.sizes[1 - minor];
  r.members.resize(sgs.size());
  for (std::size_t i = 0; i < sgs.size(); ++i) r.members[i] = km.assignment[i] == minor ? 0 : 1;
  return r;
}

enum class Verdict { normal, abnormal, non_responsive };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::normal: return "normal";
    case Verdict::abnormal: return "abnormal";
    case Verdict::non_responsive: return "non_responsive";
  }
  return "?";
}

struct DetectionResult {
  Instant at;
  std::size_t group = 0;
  std::vector<NodeId> nodes;
  std::vector<std::size_t> sg;
  std::vector<Verdict> verdicts;
  ThresholdReport threshold;

  std::optional<Verdict> verdict_of(NodeId n) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i] == n) return verdicts[i];
    }
    return std::nullopt;
  }
};

/// Non-responsive (sg = 0) first; then abnormal when the node is in the strict
/// minority cluster and deviates from the majority center by more than tau.
inline DetectionResult detect_abnormal(const std::vector<SGObservation>& sgs, const ThresholdReport& report) {
  if (report.members.size() != sgs.size()) throw ContractViolation("threshold report does not match observations");
  DetectionResult d;
  d.at = sgs.empty() ? Instant{} : sgs.front().at;
  d.threshold = report;
  for (std::size_t i = 0; i < sgs.size(); ++i) {
    const auto& o = sgs[i];
    d.nodes.push_back(o.node);
    d.sg.push_back(o.sg);
    Verdict v = Verdict::normal;
    if (o.sg == 0) {
      v = Verdict::non_responsive;
    } else if (report.separable() && report.members[i] == 0 &&
               std::fabs(static_cast<double>(o.sg) - report.c_major) > report.tau) {
      v = Verdict::abnormal;
    }
    d.verdicts.push_back(v);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Frequent-entry filters
// ---------------------------------------------------------------------------

/// Linear-interpolation percentile (the usual "linear" definition) of `values`.
inline double percentile(std::vector<double> values, double pct) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double rank = std::clamp(pct, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (values[hi] - values[lo]) * (rank - static_cast<double>(lo));
}

/// Keys whose corpus-wide count exceeds the given percentile of per-key counts.
inline std::set<std::uint32_t> frequent_keys(const CorpusIndex& index, double pct) {
  std::unordered_map<std::uint32_t, std::size_t> counts;
  for (const auto& s : index.series()) {
    for (auto k : s.keys) ++counts[k];
  }
  std::vector<double> values;
  values.reserve(counts.size());
  for (const auto& [k, c] : counts) values.push_back(static_cast<double>(c));
  const double cut = percentile(values, pct);
  std::set<std::uint32_t> out;
  for (const auto& [k, c] : counts) {
    if (static_cast<double>(c) > cut) out.insert(k);
  }
  return out;
}

struct PeriodicOptions {
  double max_cv = 0.1;
  std::size_t min_gaps = 8;
  double trim_factor = 5.0;  // gaps above trim_factor x median are outages, not period jitter
};

/// Keys whose per-node inter-arrival gaps, pooled over nodes, have a
/// coefficient of variation below `max_cv`.
inline std::set<std::uint32_t> periodic_keys(const CorpusIndex& index, const PeriodicOptions& opt = {}) {
  std::unordered_map<std::uint32_t, std::vector<double>> gaps;
  for (const auto& s : index.series()) {
    std::unordered_map<std::uint32_t, Instant> last;
    for (std::size_t i = 0; i < s.size(); ++i) {
      auto [it, inserted] = last.try_emplace(s.keys[i], s.times[i]);
      if (!inserted) {
        gaps[s.keys[i]].push_back(static_cast<double>((s.times[i] - it->second).count()));
        it->second = s.times[i];
      }
    }
  }
  std::set<std::uint32_t> out;
  for (auto& [k, g] : gaps) {
    if (g.size() < opt.min_gaps) continue;
    std::vector<double> sorted(g);
    std::sort(sorted.begin(), sorted.end());
    const double median = percentile(sorted, 50.0);
    std::vector<double> kept;
    for (double x : g) {
      if (x <= opt.trim_factor * median) kept.push_back(x);
    }
    if (kept.size() < opt.min_gaps) continue;
    const double mean = std::accumulate(kept.begin(), kept.end(), 0.0) / static_cast<double>(kept.size());
    if (mean <= 0.0) continue;
    double var = 0.0;
    for (double x : kept) var += (x - mean) * (x - mean);
    var /= static_cast<double>(kept.size());
    if (std::sqrt(var) / mean < opt.max_cv) out.insert(k);
  }
  return out;
}

inline CorpusIndex drop_keys(const CorpusIndex& index, const std::set<std::uint32_t>& drop) {
  std::vector<NodeSeries> kept;
  for (const auto& s : index.series()) {
    NodeSeries f{s.node, {}, {}};
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (drop.count(s.keys[i]) != 0) continue;
      f.times.push_back(s.times[i]);
      f.keys.push_back(s.keys[i]);
    }
    kept.push_back(std::move(f));
  }
  return index.with_series(std::move(kept));
}

/// Drops entries whose template count exceeds the percentile of per-template counts.
inline CorpusIndex filter_frequent_raw(const CorpusIndex& index, double pct = 99.5) {
  return drop_keys(index, frequent_keys(index, pct));
}

/// As filter_frequent_raw keyed by hash key, plus keys that arrive periodically.
inline CorpusIndex filter_frequent_anonymized(const CorpusIndex& index, double pct = 99.5,
                                              const PeriodicOptions& periodic = {}) {
  auto drop = frequent_keys(index, pct);
  auto per = periodic_keys(index, periodic);
  drop.insert(per.begin(), per.end());
  return drop_keys(index, drop);
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

struct DetectionOptions {
  Duration window = minutes(30);
  Duration cadence = minutes(10);
  ThresholdOptions threshold;
  std::size_t min_group = 3;
};

/// Observation moments: range.start + window, then every cadence up to range.end.
inline std::vector<Instant> sweep_moments(const ObservationRange& range, Duration window, Duration cadence) {
  if (cadence <= Duration::zero() || window <= Duration::zero()) {
    throw ContractViolation("window and cadence must be positive");
  }
  std::vector<Instant> out;
  for (Instant m = range.start + window; m <= range.end; m += cadence) out.push_back(m);
  return out;
}

struct SweepResult {
  std::vector<Instant> moments;
  std::vector<DetectionResult> results;  // ordered by (moment, group)
  std::size_t skipped_groups = 0;        // (moment, group) pairs below min_group
};

using AssignmentProvider = std::function<VicinityAssignment(Instant)>;

inline DetectionResult detect_group(const CorpusIndex& index, const std::vector<NodeId>& group, std::size_t group_id,
                                    Instant at, const DetectionOptions& opt) {
  std::vector<SGObservation> sgs;
  sgs.reserve(group.size());
  for (const auto& n : group) sgs.push_back(compute_sg(index, n, at, opt.window));
  auto report = deviation_threshold(sgs, opt.threshold);
  auto d = detect_abnormal(sgs, *report);
  d.at = at;
  d.group = group_id;
  return d;
}

inline SweepResult run_detection(const CorpusIndex& index, const AssignmentProvider& assignment_at,
                                 const ObservationRange& range, const DetectionOptions& opt = {}, unsigned jobs = 1) {
  SweepResult out;
  out.moments = sweep_moments(range, opt.window, opt.cadence);
  std::vector<std::vector<DetectionResult>> per_moment(out.moments.size());
  std::vector<std::size_t> skipped(out.moments.size(), 0);
  parallel_for(out.moments.size(), jobs, [&](std::size_t i) {
    const Instant at = out.moments[i];
    const auto a = assignment_at(at);
    for (std::size_t g = 0; g < a.groups.size(); ++g) {
      if (a.groups[g].size() < std::max<std::size_t>(3, opt.min_group)) {
        ++skipped[i];
        continue;
      }
      per_moment[i].push_back(detect_group(index, a.groups[g], g, at, opt));
    }
  });
  for (std::size_t i = 0; i < per_moment.size(); ++i) {
    out.skipped_groups += skipped[i];
    for (auto& d : per_moment[i]) out.results.push_back(std::move(d));
  }
  return out;
}

inline SweepResult run_detection(const CorpusIndex& index, const VicinityAssignment& assignment,
                                 const ObservationRange& range, const DetectionOptions& opt = {}, unsigned jobs = 1) {
  return run_detection(
      index, [&](Instant) { return assignment; }, range, opt, jobs);
}

// ---------------------------------------------------------------------------
// Detection events
// ---------------------------------------------------------------------------

struct Detection {
  NodeId node;
  Instant instant;

  bool operator==(const Detection&) const = default;
};

struct ExtractionOptions {
  Duration window = minutes(30);
  /// Flagged runs separated by at most this many unflagged moments are merged.
  std::size_t bridge = 3;
  /// Runs without non-responsive moments need at least this many flagged moments.
  std::size_t min_abnormal_run = 3;
};

/// Turns per-moment verdicts into failure detections. For each node, flagged
/// moments (abnormal or non-responsive) form runs. A run with non-responsive
/// moments is placed at the node's last entry before its last non-responsive
/// moment; otherwise, if it has at least min_abnormal_run moments, at its first
/// flagged moment. Moments inside a maintenance window covering the node, or
/// within one window after it, are ignored.
inline std::vector<Detection> extract_detections(const SweepResult& sweep, const CorpusIndex& index,
                                                 const std::vector<MaintenanceWindow>& maintenance,
                                                 const ExtractionOptions& opt = {}) {
  std::map<Instant, std::size_t> moment_index;
  for (std::size_t i = 0; i < sweep.moments.size(); ++i) moment_index.emplace(sweep.moments[i], i);
  struct Flag {
    std::size_t moment;
    Verdict verdict;
  };
  std::map<NodeId, std::vector<Flag>> flags;
  for (const auto& d : sweep.results) {
    const std::size_t mi = moment_index.at(d.at);
    for (std::size_t k = 0; k < d.nodes.size(); ++k) {
      if (d.verdicts[k] == Verdict::normal) continue;
      const NodeId n = d.nodes[k];
      bool masked = false;
      for (const auto& w : maintenance) {
        if (scope_covers(w.scope, n) && w.start <= d.at && d.at < w.end + opt.window) masked = true;
      }
      if (!masked) flags[n].push_back({mi, d.verdicts[k]});
    }
  }
  std::vector<Detection> out;
  for (auto& [node, fl] : flags) {
    std::sort(fl.begin(), fl.end(), [](const Flag& a, const Flag& b) { return a.moment < b.moment; });
    const auto* series = index.find(node);
    std::size_t i = 0;
    while (i < fl.size()) {
      std::size_t j = i + 1;
      while (j < fl.size() && fl[j].moment - fl[j - 1].moment <= opt.bridge + 1) ++j;
      std::optional<std::size_t> last_nr;
      for (std::size_t k = i; k < j; ++k) {
        if (fl[k].verdict == Verdict::non_responsive) last_nr = fl[k].moment;
      }
      if (!last_nr && j - i < opt.min_abnormal_run) {
        i = j;
        continue;
      }
      Instant instant = sweep.moments[fl[i].moment];
      if (last_nr && series != nullptr) {
        if (auto idx = series->last_before(sweep.moments[*last_nr])) instant = series->times[*idx];
      }
      if (out.empty() || !(out.back().node == node && out.back().instant == instant)) out.push_back({node, instant});
      i = j;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline void write_verdicts(std::ostream& out, const SweepResult& sweep) {
  char tau[32];
  for (const auto& d : sweep.results) {
    std::snprintf(tau, sizeof tau, "%.3f", d.threshold.tau);
    const std::string at = format_iso(d.at);
    for (std::size_t k = 0; k < d.nodes.size(); ++k) {
      out << at << '\t' << d.group << '\t' << d.nodes[k].name() << '\t' << to_string(d.verdicts[k]) << '\t' << d.sg[k]
          << '\t' << tau << '\n';
    }
  }
}

/// Rows are moments, columns are nodes, cells are SG counts ("" when the node
/// was not evaluated at that moment).
inline void write_sg_matrix(std::ostream& out, const SweepResult& sweep) {
  std::set<NodeId> nodes;
  for (const auto& d : sweep.results) nodes.insert(d.nodes.begin(), d.nodes.end());
  std::vector<NodeId> cols(nodes.begin(), nodes.end());
  std::map<NodeId, std::size_t> col_of;
  for (std::size_t c = 0; c < cols.size(); ++c) col_of[cols[c]] = c;
  out << "moment";
  for (const auto& n : cols) out << ',' << n.name();
  out << '\n';
  std::size_t r = 0;
  for (const auto& m : sweep.moments) {
    std::vector<std::string> row(cols.size());
    while (r < sweep.results.size() && sweep.results[r].at == m) {
      const auto& d = sweep.results[r];
      for (std::size_t k = 0; k < d.nodes.size(); ++k) row[col_of[d.nodes[k]]] = std::to_string(d.sg[k]);
      ++r;
    }
    out << format_iso(m);
    for (const auto& cell : row) out << ',' << cell;
    out << '\n';
  }
}

inline void write_detections(std::ostream& out, const std::vector<Detection>& detections) {
  out << "node,instant\n";
  for (const auto& d : detections) out << d.node.name() << ',' << format_iso(d.instant) << '\n';
}

}  // namespace sgscan
