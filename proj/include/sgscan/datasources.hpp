#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sgscan/chrono.hpp"
#include "sgscan/error.hpp"
#include "sgscan/log_model.hpp"
#include "sgscan/text.hpp"

namespace sgscan {

// ---------------------------------------------------------------------------
// Jobs
// ---------------------------------------------------------------------------

enum class JobStatus { completed, failed, cancelled, timeout, node_fail };

inline std::string_view to_string(JobStatus s) {
  switch (s) {
    case JobStatus::completed: return "completed";
    case JobStatus::failed: return "failed";
    case JobStatus::cancelled: return "cancelled";
    case JobStatus::timeout: return "timeout";
    case JobStatus::node_fail: return "node_fail";
  }
  return "?";
}

inline std::optional<JobStatus> parse_job_status(std::string_view s) {
  for (auto st : {JobStatus::completed, JobStatus::failed, JobStatus::cancelled, JobStatus::timeout,
                  JobStatus::node_fail}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

/// A batch job occupying `nodes` over the half-open interval [start, end).
struct JobRecord {
  std::string job_id;
  std::set<NodeId> nodes;
  Instant start;
  Instant end;
  JobStatus status = JobStatus::completed;

  bool active_at(Instant t) const noexcept { return start <= t && t < end; }
  bool runs_on(NodeId n) const { return nodes.count(n) != 0; }
  bool operator==(const JobRecord&) const = default;
};

namespace detail {

inline bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

}  // namespace detail

/// Expands one node spec: a plain name or a bracket range such as
/// `i4r1n[0-9]` or `i1r0n[0-3,5]`. Returns nullopt on malformed input.
inline std::optional<std::vector<NodeId>> expand_node_range(std::string_view spec) {
  spec = trim(spec);
  const auto open = spec.find('[');
  if (open == std::string_view::npos) {
    auto n = NodeId::parse(spec);
    if (!n) return std::nullopt;
    return std::vector<NodeId>{*n};
  }
  if (spec.back() != ']') return std::nullopt;
  const std::string prefix(spec.substr(0, open));
  std::vector<NodeId> out;
  for (auto part : split(spec.substr(open + 1, spec.size() - open - 2), ',')) {
    part = trim(part);
    int lo = 0, hi = 0;
    const auto dash = part.find('-');
    if (dash == std::string_view::npos) {
      if (!detail::parse_int(part, lo)) return std::nullopt;
      hi = lo;
    } else if (!detail::parse_int(part.substr(0, dash), lo) || !detail::parse_int(part.substr(dash + 1), hi) ||
               hi < lo) {
      return std::nullopt;
    }
    for (int v = lo; v <= hi; ++v) {
      auto n = NodeId::parse(prefix + std::to_string(v));
      if (!n) return std::nullopt;
      out.push_back(*n);
    }
  }
  if (out.empty()) return std::nullopt;
  return out;
}

/// Compresses a node set into space-separated specs, using bracket ranges per rack.
inline std::string compress_node_set(const std::set<NodeId>& nodes) {
  std::string out;
  auto it = nodes.begin();
  while (it != nodes.end()) {
    const int island = it->island, rack = it->rack;
    std::vector<std::pair<int, int>> spans;
    while (it != nodes.end() && it->island == island && it->rack == rack) {
      if (!spans.empty() && spans.back().second + 1 == it->position) spans.back().second = it->position;
      else spans.emplace_back(it->position, it->position);
      ++it;
    }
    if (!out.empty()) out += ' ';
    const std::string prefix = "i" + std::to_string(island) + "r" + std::to_string(rack) + "n";
    if (spans.size() == 1 && spans[0].first == spans[0].second) {
      out += prefix + std::to_string(spans[0].first);
      continue;
    }
    out += prefix + "[";
    for (std::size_t k = 0; k < spans.size(); ++k) {
      if (k > 0) out += ',';
      out += std::to_string(spans[k].first);
      if (spans[k].second != spans[k].first) out += "-" + std::to_string(spans[k].second);
    }
    out += "]";
  }
  return out;
}

namespace detail {

// Minimal CSV field splitter: commas separate, double quotes group, "" escapes.
inline std::optional<std::vector<std::string>> split_csv(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) return std::nullopt;
  return fields;
}

}  // namespace detail

/// Reads the job report CSV `job_id,nodes,start,end,status`. A header row whose
/// first field is `job_id` is skipped. The nodes field holds one or more node
/// specs separated by spaces or semicolons.
inline std::vector<JobRecord> parse_job_report(std::istream& in, const std::string& source = "<jobs>") {
  std::vector<JobRecord> jobs;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    auto fields = detail::split_csv(line);
    if (!fields || fields->size() != 5) throw LoadError(source, row, "expected 5 CSV fields");
    auto& f = *fields;
    if (row == 1 && f[0] == "job_id") continue;
    JobRecord job;
    job.job_id = std::string(trim(f[0]));
    if (job.job_id.empty()) throw LoadError(source, row, "empty job id");
    std::string specs = f[1];
    std::replace(specs.begin(), specs.end(), ';', ' ');
    std::istringstream spec_stream(specs);
    std::string spec;
    while (spec_stream >> spec) {
      auto nodes = expand_node_range(spec);
      if (!nodes) throw LoadError(source, row, "malformed node spec '" + spec + "'");
      job.nodes.insert(nodes->begin(), nodes->end());
    }
    if (job.nodes.empty()) throw LoadError(source, row, "job has no nodes");
    auto start = parse_iso(trim(f[2]));
    auto end = parse_iso(trim(f[3]));
    if (!start || !end) throw LoadError(source, row, "malformed timestamp");
    if (*end < *start) throw LoadError(source, row, "job ends before it starts");
    auto status = parse_job_status(trim(f[4]));
    if (!status) throw LoadError(source, row, "unknown job status '" + f[4] + "'");
    job.start = *start;
    job.end = *end;
    job.status = *status;
    jobs.push_back(std::move(job));
  }
  return jobs;
}

inline std::vector<JobRecord> load_job_report(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  return parse_job_report(in, path.string());
}

inline void write_job_report(std::ostream& out, const std::vector<JobRecord>& jobs) {
  out << "job_id,nodes,start,end,status\n";
  for (const auto& j : jobs) {
    std::string nodes = compress_node_set(j.nodes);
    if (nodes.find_first_of(", ") != std::string::npos) nodes = '"' + nodes + '"';
    out << j.job_id << ',' << nodes << ',' << format_iso(j.start) << ',' << format_iso(j.end) << ','
        << to_string(j.status) << '\n';
  }
}

/// Jobs whose [start, end) contains t and which include `node`.
inline std::vector<JobRecord> jobs_active_on(NodeId node, Instant t, const std::vector<JobRecord>& jobs) {
  std::vector<JobRecord> out;
  for (const auto& j : jobs) {
    if (j.active_at(t) && j.runs_on(node)) out.push_back(j);
  }
  return out;
}

/// Per-node job lookup. Answers the same queries as the linear scans above.
class JobIndex {
 public:
  JobIndex() = default;
  explicit JobIndex(const std::vector<JobRecord>& jobs) : jobs_(&jobs) {
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      for (const auto& n : jobs[i].nodes) by_node_[n].push_back(i);
      if (i == 0 || jobs[i].start < first_start_) first_start_ = jobs[i].start;
      if (i == 0 || jobs[i].end > last_end_) last_end_ = jobs[i].end;
    }
  }

  bool empty() const noexcept { return jobs_ == nullptr || jobs_->empty(); }
  /// Earliest start and latest end over all jobs; meaningless when empty().
  Instant first_start() const noexcept { return first_start_; }
  Instant last_end() const noexcept { return last_end_; }

  /// Indices (into the job vector) of jobs that ran on `node`, in input order.
  const std::vector<std::size_t>& on_node(NodeId node) const {
    static const std::vector<std::size_t> none;
    auto it = by_node_.find(node);
    return it == by_node_.end() ? none : it->second;
  }

  const JobRecord& job(std::size_t i) const { return (*jobs_)[i]; }
  const std::vector<JobRecord>& jobs() const {
    static const std::vector<JobRecord> none;
    return jobs_ == nullptr ? none : *jobs_;
  }

  std::vector<JobRecord> active_on(NodeId node, Instant t) const {
    std::vector<JobRecord> out;
    for (auto i : on_node(node)) {
      if (job(i).active_at(t)) out.push_back(job(i));
    }
    return out;
  }

 private:
  const std::vector<JobRecord>* jobs_ = nullptr;
  std::map<NodeId, std::vector<std::size_t>> by_node_;
  Instant first_start_{};
  Instant last_end_{};
};

// ---------------------------------------------------------------------------
// Outage database and maintenance notifications
// ---------------------------------------------------------------------------

struct EntireSystem {
  bool operator==(const EntireSystem&) const = default;
};
struct IslandScope {
  int island = 1;
  bool operator==(const IslandScope&) const = default;
};
using Scope = std::variant<EntireSystem, IslandScope, NodeId>;

inline bool scope_covers(const Scope& scope, NodeId node) {
  if (std::holds_alternative<EntireSystem>(scope)) return true;
  if (const auto* isl = std::get_if<IslandScope>(&scope)) return isl->island == node.island;
  return std::get<NodeId>(scope) == node;
}

inline std::string format_scope(const Scope& scope) {
  if (std::holds_alternative<EntireSystem>(scope)) return "system";
  if (const auto* isl = std::get_if<IslandScope>(&scope)) return "island:" + std::to_string(isl->island);
  return "node:" + std::get<NodeId>(scope).name();
}

inline std::optional<Scope> parse_scope(std::string_view s) {
  s = trim(s);
  if (s == "system" || s == "entire_system") return Scope{EntireSystem{}};
  if (s.rfind("island:", 0) == 0) {
    int island = 0;
    if (!detail::parse_int(s.substr(7), island) || island < 1) return std::nullopt;
    return Scope{IslandScope{island}};
  }
  if (s.rfind("node:", 0) == 0) {
    auto n = NodeId::parse(s.substr(5));
    if (!n) return std::nullopt;
    return Scope{*n};
  }
  return std::nullopt;
}

/// Outage database record. The interval is closed: [start, end].
struct OutageRecord {
  Instant start;
  Instant end;
  Scope scope = EntireSystem{};
  std::string description;

  bool contains(Instant t) const noexcept { return start <= t && t <= end; }
  bool operator==(const OutageRecord&) const = default;
};

/// Scheduled maintenance over the half-open interval [start, end).
struct MaintenanceWindow {
  Instant start;
  Instant end;
  Scope scope = EntireSystem{};
  std::string description;

  bool contains(Instant t) const noexcept { return start <= t && t < end; }
  bool operator==(const MaintenanceWindow&) const = default;
};

namespace detail {

struct IntervalLine {
  Instant start;
  Instant end;
  Scope scope;
  std::string description;
};

// `start..end<TAB>scope<TAB>description?`; whitespace is accepted in place of
// tabs when the line has no tab at all.
inline IntervalLine parse_interval_line(const std::string& line, const std::string& source, std::size_t row) {
  std::vector<std::string> fields;
  if (line.find('\t') != std::string::npos) {
    for (auto f : split(line, '\t')) fields.emplace_back(f);
  } else {
    std::istringstream ss(line);
    std::string tok;
    while (fields.size() < 2 && ss >> tok) fields.push_back(tok);
    std::string rest;
    std::getline(ss, rest);
    if (!trim(rest).empty()) fields.emplace_back(trim(rest));
  }
  if (fields.size() < 2) throw LoadError(source, row, "expected start..end and scope");
  const auto dots = fields[0].find("..");
  if (dots == std::string::npos) throw LoadError(source, row, "expected start..end");
  auto start = parse_iso(trim(std::string_view(fields[0]).substr(0, dots)));
  auto end = parse_iso(trim(std::string_view(fields[0]).substr(dots + 2)));
  if (!start || !end) throw LoadError(source, row, "malformed timestamp");
  auto scope = parse_scope(fields[1]);
  if (!scope) throw LoadError(source, row, "malformed scope '" + fields[1] + "'");
  IntervalLine out{*start, *end, *scope, {}};
  for (std::size_t i = 2; i < fields.size(); ++i) {
    if (i > 2) out.description += '\t';
    out.description += fields[i];
  }
  return out;
}

template <typename Record, typename Check>
std::vector<Record> parse_interval_file(std::istream& in, const std::string& source, Check check) {
  std::vector<Record> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    auto rec = parse_interval_line(line, source, row);
    if (!check(rec.start, rec.end)) throw LoadError(source, row, "interval ends before it starts");
    out.push_back(Record{rec.start, rec.end, rec.scope, rec.description});
  }
  return out;
}

template <typename Record>
void write_interval_file(std::ostream& out, const std::vector<Record>& records) {
  for (const auto& r : records) {
    out << format_iso(r.start) << ".." << format_iso(r.end) << '\t' << format_scope(r.scope);
    if (!r.description.empty()) out << '\t' << r.description;
    out << '\n';
  }
}

}  // namespace detail

inline std::vector<OutageRecord> parse_outage_db(std::istream& in, const std::string& source = "<outages>") {
  return detail::parse_interval_file<OutageRecord>(in, source, [](Instant s, Instant e) { return s <= e; });
}

inline std::vector<MaintenanceWindow> parse_maintenance(std::istream& in, const std::string& source = "<maintenance>") {
  return detail::parse_interval_file<MaintenanceWindow>(in, source, [](Instant s, Instant e) { return s < e; });
}

inline std::vector<OutageRecord> load_outage_db(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  return parse_outage_db(in, path.string());
}

inline std::vector<MaintenanceWindow> load_maintenance(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  return parse_maintenance(in, path.string());
}

inline void write_outage_db(std::ostream& out, const std::vector<OutageRecord>& records) {
  detail::write_interval_file(out, records);
}

inline void write_maintenance(std::ostream& out, const std::vector<MaintenanceWindow>& windows) {
  detail::write_interval_file(out, windows);
}

}  // namespace sgscan
