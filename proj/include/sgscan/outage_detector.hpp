#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sgscan/anonymizer.hpp"
#include "sgscan/chrono.hpp"
#include "sgscan/corpus_index.hpp"
#include "sgscan/error.hpp"
#include "sgscan/log_model.hpp"
#include "sgscan/parallel.hpp"
#include "sgscan/text.hpp"

namespace sgscan {

enum class BootConfidence { footprint, burst };

inline std::string_view to_string(BootConfidence c) { return c == BootConfidence::footprint ? "footprint" : "burst"; }

struct BootEvent {
  NodeId node;
  Instant boot_time;
  BootConfidence confidence = BootConfidence::footprint;

  bool operator==(const BootEvent&) const = default;
};

struct OutageEvent {
  NodeId node;
  Instant outage_time;
  std::optional<BootEvent> following_boot;
  bool tail = false;

  bool operator==(const OutageEvent&) const = default;
};

// ---------------------------------------------------------------------------
// Boot footprint
// ---------------------------------------------------------------------------

/// One footprint step, given either as a message template or as a hash key.
struct FootprintStep {
  std::optional<std::string> text;
  std::optional<HashKey> key;
};

struct BootFootprintSpec {
  std::vector<FootprintStep> steps;
  Duration span{120};

  static BootFootprintSpec from_messages(const std::vector<std::string>& messages) {
    BootFootprintSpec spec;
    for (const auto& m : messages) spec.steps.push_back({m, std::nullopt});
    return spec;
  }
};

/// One template or `key:<8hex>` per line, in order. Blank and '#' lines are ignored.
inline BootFootprintSpec parse_footprint(std::istream& in, const std::string& source = "<footprint>") {
  BootFootprintSpec spec;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    if (line.rfind("key:", 0) == 0) {
      auto k = HashKey::parse(trim(std::string_view(line).substr(4)));
      if (!k) throw LoadError(source, row, "malformed hash key");
      spec.steps.push_back({std::nullopt, *k});
    } else {
      spec.steps.push_back({line, std::nullopt});
    }
  }
  return spec;
}

inline BootFootprintSpec load_footprint(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  return parse_footprint(in, path.string());
}

/// Writes the footprint as hash keys, which work on raw and anonymized corpora alike.
inline void write_footprint_keys(std::ostream& out, const BootFootprintSpec& spec, const SubstitutionRuleSet& rules) {
  for (const auto& s : spec.steps) {
    const HashKey k = s.key ? *s.key : rules.key_of(*s.text);
    out << "key:" << k.hex() << '\n';
  }
}

/// Footprint steps translated into the key domain of one corpus index. A step
/// that never occurs in the corpus resolves to nullopt and disables footprint matching.
struct ResolvedFootprint {
  std::vector<std::optional<std::uint32_t>> keys;
  Duration span{120};

  bool usable() const {
    return !keys.empty() && std::all_of(keys.begin(), keys.end(), [](const auto& k) { return k.has_value(); });
  }
};

inline ResolvedFootprint resolve_footprint(const BootFootprintSpec& spec, const CorpusIndex& index,
                                           const SubstitutionRuleSet& rules) {
  ResolvedFootprint out;
  out.span = spec.span;
  for (const auto& s : spec.steps) {
    if (s.key) out.keys.push_back(index.key_for_hash(*s.key));
    else out.keys.push_back(index.key_for_template(rules.deidentify(*s.text)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Detection
// ---------------------------------------------------------------------------

struct BurstOptions {
  bool enabled = true;
  double factor = 5.0;
  int minutes = 2;
  Duration min_gap = sgscan::minutes(10);
};

struct OutageOptions {
  BurstOptions burst;
  Duration silence_threshold = hours(1);
  Duration dedup = Duration{120};
};

namespace detail {

inline void require_sorted(const NodeSeries& s) {
  if (!std::is_sorted(s.times.begin(), s.times.end())) {
    throw ContractViolation("entries for " + s.node.name() + " are not sorted by timestamp");
  }
}

inline std::vector<Instant> footprint_boots(const NodeSeries& s, const ResolvedFootprint& fp) {
  std::vector<Instant> out;
  if (!fp.usable()) return out;
  const auto n = s.size();
  std::size_t i = 0;
  while (i < n) {
    if (s.keys[i] != *fp.keys[0]) {
      ++i;
      continue;
    }
    const Instant limit = s.times[i] + fp.span;
    std::size_t j = i + 1;
    std::size_t step = 1;
    while (step < fp.keys.size() && j < n && s.times[j] <= limit) {
      if (s.keys[j] == *fp.keys[step]) ++step;
      ++j;
    }
    if (step == fp.keys.size()) {
      out.push_back(s.times[i]);
      i = j;
    } else {
      ++i;
    }
  }
  return out;
}

inline std::vector<Instant> burst_boots(const NodeSeries& s, const BurstOptions& opt) {
  std::vector<Instant> out;
  if (!opt.enabled || s.empty() || opt.minutes < 1) return out;
  // Per-minute buckets over active minutes only.
  struct Bucket {
    long long minute;
    std::size_t first;
    std::size_t count;
  };
  std::vector<Bucket> buckets;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const long long m = std::chrono::floor<std::chrono::minutes>(s.times[i]).time_since_epoch().count();
    if (buckets.empty() || buckets.back().minute != m) buckets.push_back({m, i, 0});
    ++buckets.back().count;
  }
  std::vector<std::size_t> counts;
  counts.reserve(buckets.size());
  for (const auto& b : buckets) counts.push_back(b.count);
  const auto mid = counts.begin() + static_cast<std::ptrdiff_t>(counts.size() / 2);
  std::nth_element(counts.begin(), mid, counts.end());
  double median = static_cast<double>(*mid);
  if (counts.size() % 2 == 0) {
    const auto lower = *std::max_element(counts.begin(), mid);
    median = (median + static_cast<double>(lower)) / 2.0;
  }
  const double threshold = opt.factor * median;
  std::size_t b = 0;
  while (b < buckets.size()) {
    if (static_cast<double>(buckets[b].count) <= threshold) {
      ++b;
      continue;
    }
    std::size_t e = b + 1;
    while (e < buckets.size() && buckets[e].minute == buckets[e - 1].minute + 1 &&
           static_cast<double>(buckets[e].count) > threshold) {
      ++e;
    }
    // The boot may start up to a minute before the first bursting minute.
    const std::size_t first = buckets[b].first;
    std::size_t k = first;
    while (k > 0 && s.times[k] - s.times[k - 1] < opt.min_gap && s.times[first] - s.times[k - 1] <= Duration{60}) --k;
    const bool gap_ok = k == 0 || s.times[k] - s.times[k - 1] >= opt.min_gap;
    if (static_cast<int>(e - b) >= opt.minutes && gap_ok) out.push_back(s.times[k]);
    b = e;
  }
  return out;
}

}  // namespace detail

/// Boot events for one node's series, sorted by time. Footprint matches win over
/// burst detections within `opts.dedup` of them.
inline std::vector<BootEvent> detect_boot_events(const NodeSeries& s, const ResolvedFootprint& fp,
                                                 const OutageOptions& opts = {}) {
  detail::require_sorted(s);
  std::vector<BootEvent> boots;
  for (auto t : detail::footprint_boots(s, fp)) boots.push_back({s.node, t, BootConfidence::footprint});
  const std::size_t n_fp = boots.size();
  for (auto t : detail::burst_boots(s, opts.burst)) {
    bool dup = false;
    for (std::size_t k = 0; k < n_fp && !dup; ++k) {
      const auto d = boots[k].boot_time - t;
      dup = (d < Duration::zero() ? -d : d) <= opts.dedup;
    }
    if (!dup) boots.push_back({s.node, t, BootConfidence::burst});
  }
  std::sort(boots.begin(), boots.end(), [](const BootEvent& a, const BootEvent& b) { return a.boot_time < b.boot_time; });
  return boots;
}

/// One outage per boot: the last entry strictly before the boot. Boots with no
/// earlier entry produce nothing.
inline std::vector<OutageEvent> backtrack_outages(const NodeSeries& s, const std::vector<BootEvent>& boots) {
  detail::require_sorted(s);
  std::vector<OutageEvent> out;
  for (const auto& b : boots) {
    auto idx = s.last_before(b.boot_time);
    if (!idx) continue;
    out.push_back({s.node, s.times[*idx], b, false});
  }
  return out;
}

inline std::optional<OutageEvent> detect_tail_outage(const NodeSeries& s, const ObservationRange& range,
                                                     Duration silence_threshold) {
  detail::require_sorted(s);
  if (s.empty()) return std::nullopt;
  const Instant last = s.times.back();
  if (range.end - last > silence_threshold) return OutageEvent{s.node, last, std::nullopt, true};
  return std::nullopt;
}

/// Full detection over a corpus: boots, backtracked outages and tail outages,
/// ordered by (node, outage_time).
inline std::vector<OutageEvent> detect_outages(const CorpusIndex& index, const ResolvedFootprint& fp,
                                               const ObservationRange& range, const OutageOptions& opts = {},
                                               unsigned jobs = 1) {
  const auto& series = index.series();
  std::vector<std::vector<OutageEvent>> per_node(series.size());
  parallel_for(series.size(), jobs, [&](std::size_t i) {
    const auto& s = series[i];
    auto boots = detect_boot_events(s, fp, opts);
    auto outs = backtrack_outages(s, boots);
    if (auto tail = detect_tail_outage(s, range, opts.silence_threshold)) outs.push_back(*tail);
    per_node[i] = std::move(outs);
  });
  std::vector<OutageEvent> all;
  for (auto& v : per_node) all.insert(all.end(), v.begin(), v.end());
  return all;
}

inline void write_outages(std::ostream& out, const std::vector<OutageEvent>& outages) {
  for (const auto& o : outages) {
    out << o.node.name() << '\t' << format_iso(o.outage_time) << '\t';
    if (o.following_boot) out << format_iso(o.following_boot->boot_time) << '\t' << to_string(o.following_boot->confidence);
    else out << "TAIL\ttail";
    out << '\n';
  }
}

inline std::vector<OutageEvent> parse_outages(std::istream& in, const std::string& source = "<outages>") {
  std::vector<OutageEvent> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    auto f = split(line, '\t');
    if (f.size() != 4) throw LoadError(source, row, "expected 4 tab-separated fields");
    auto node = NodeId::parse(f[0]);
    auto t = parse_iso(f[1]);
    if (!node || !t) throw LoadError(source, row, "malformed outage record");
    OutageEvent o{*node, *t, std::nullopt, false};
    if (f[2] == "TAIL") {
      o.tail = true;
    } else {
      auto b = parse_iso(f[2]);
      if (!b || (f[3] != "footprint" && f[3] != "burst")) throw LoadError(source, row, "malformed boot field");
      o.following_boot = BootEvent{*node, *b, f[3] == "footprint" ? BootConfidence::footprint : BootConfidence::burst};
    }
    out.push_back(o);
  }
  return out;
}

inline std::vector<OutageEvent> load_outages(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  return parse_outages(in, path.string());
}

}  // namespace sgscan
