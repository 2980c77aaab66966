#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sgscan/chrono.hpp"
#include "sgscan/error.hpp"
#include "sgscan/text.hpp"

namespace sgscan {

// ---------------------------------------------------------------------------
// Node identity and hardware classes
// ---------------------------------------------------------------------------

enum class Architecture { haswell, sandy_bridge, westmere, broadwell, gpu };

inline constexpr std::array<Architecture, 5> kArchitectures = {Architecture::haswell, Architecture::sandy_bridge,
                                                               Architecture::westmere, Architecture::broadwell,
                                                               Architecture::gpu};

inline std::string_view to_string(Architecture a) {
  switch (a) {
    case Architecture::haswell: return "Haswell";
    case Architecture::sandy_bridge: return "SandyBridge";
    case Architecture::westmere: return "Westmere";
    case Architecture::broadwell: return "Broadwell";
    case Architecture::gpu: return "GPU";
  }
  return "?";
}

inline std::optional<Architecture> parse_architecture(std::string_view s) {
  for (auto a : kArchitectures) {
    if (to_string(a) == s) return a;
  }
  return std::nullopt;
}

/// A compute node addressed by island, rack and position; canonical text `i<I>r<R>n<N>`.
struct NodeId {
  int island = 1;
  int rack = 0;
  int position = 0;

  auto operator<=>(const NodeId&) const = default;

  std::string name() const {
    return "i" + std::to_string(island) + "r" + std::to_string(rack) + "n" + std::to_string(position);
  }

  static std::optional<NodeId> parse(std::string_view s) {
    NodeId id;
    std::size_t pos = 0;
    auto field = [&](char tag, int& out) {
      if (pos >= s.size() || s[pos] != tag) return false;
      ++pos;
      const char* first = s.data() + pos;
      const char* last = s.data() + s.size();
      if (first == last || *first < '0' || *first > '9') return false;
      auto [p, ec] = std::from_chars(first, last, out);
      if (ec != std::errc{}) return false;
      pos = static_cast<std::size_t>(p - s.data());
      return true;
    };
    if (!field('i', id.island) || !field('r', id.rack) || !field('n', id.position) || pos != s.size()) {
      return std::nullopt;
    }
    if (id.island < 1 || id.rack < 0 || id.position < 0) return std::nullopt;
    return id;
  }
};

struct NodeIdHash {
  std::size_t operator()(const NodeId& n) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(n.island) * 1'000'003ULL;
    h = (h ^ static_cast<std::uint64_t>(n.rack)) * 1'000'033ULL;
    h ^= static_cast<std::uint64_t>(n.position);
    return std::hash<std::uint64_t>{}(h);
  }
};

using RackId = std::pair<int, int>;  // (island, rack)

/// Immutable-after-load node inventory: every node has one architecture and one rack.
class Topology {
 public:
  /// Throws std::invalid_argument if the node is already present.
  void add(NodeId node, Architecture arch) {
    auto [it, inserted] = arch_.emplace(node, arch);
    if (!inserted) throw std::invalid_argument("duplicate node " + node.name());
    nodes_.insert(std::upper_bound(nodes_.begin(), nodes_.end(), node), node);
  }

  const std::vector<NodeId>& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }
  bool contains(NodeId n) const { return arch_.count(n) != 0; }

  Architecture architecture_of(NodeId n) const {
    auto it = arch_.find(n);
    if (it == arch_.end()) throw std::out_of_range("node not in topology: " + n.name());
    return it->second;
  }
  static RackId rack_of(NodeId n) noexcept { return {n.island, n.rack}; }

  std::size_t count(Architecture a) const {
    return static_cast<std::size_t>(
        std::count_if(arch_.begin(), arch_.end(), [a](const auto& kv) { return kv.second == a; }));
  }
  std::set<int> islands() const {
    std::set<int> out;
    for (const auto& n : nodes_) out.insert(n.island);
    return out;
  }
  std::set<RackId> racks() const {
    std::set<RackId> out;
    for (const auto& n : nodes_) out.insert(rack_of(n));
    return out;
  }

  bool operator==(const Topology& other) const { return arch_ == other.arch_; }

 private:
  std::map<NodeId, Architecture> arch_;
  std::vector<NodeId> nodes_;
};

/// Reads the tab-separated topology format: `<node>\t<architecture>\t<island>\t<rack>`.
inline Topology parse_topology(std::istream& in, const std::string& source = "<topology>") {
  Topology topo;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    auto fields = split(line, '\t');
    if (fields.size() != 4) throw LoadError(source, line_no, "expected 4 tab-separated fields");
    auto node = NodeId::parse(fields[0]);
    if (!node) throw LoadError(source, line_no, "malformed node name '" + std::string(fields[0]) + "'");
    auto arch = parse_architecture(fields[1]);
    if (!arch) throw LoadError(source, line_no, "missing or unknown architecture '" + std::string(fields[1]) + "'");
    int island = 0, rack = 0;
    auto [p1, e1] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), island);
    auto [p2, e2] = std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), rack);
    if (e1 != std::errc{} || e2 != std::errc{} || p1 != fields[2].data() + fields[2].size() ||
        p2 != fields[3].data() + fields[3].size()) {
      throw LoadError(source, line_no, "malformed island/rack");
    }
    if (island != node->island || rack != node->rack) {
      throw LoadError(source, line_no, "island/rack columns disagree with node name");
    }
    try {
      topo.add(*node, *arch);
    } catch (const std::invalid_argument&) {
      throw LoadError(source, line_no, "duplicate node " + node->name());
    }
  }
  return topo;
}

inline Topology load_topology(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  return parse_topology(in, path.string());
}

inline void write_topology(std::ostream& out, const Topology& topo) {
  out << "# node\tarchitecture\tisland\track\n";
  for (const auto& n : topo.nodes()) {
    out << n.name() << '\t' << to_string(topo.architecture_of(n)) << '\t' << n.island << '\t' << n.rack << '\n';
  }
}

// ---------------------------------------------------------------------------
// Log records
// ---------------------------------------------------------------------------

struct ObservationRange {
  Instant start;
  Instant end;

  ObservationRange() = default;
  ObservationRange(Instant s, Instant e) : start(s), end(e) {
    if (!(s < e)) throw ContractViolation("observation range requires start < end");
  }
  bool contains(Instant t) const noexcept { return start <= t && t < end; }
  Duration length() const noexcept { return end - start; }
};

struct LogEntry {
  Instant timestamp;
  NodeId node;
  std::string tag;
  std::string message;

  bool operator==(const LogEntry&) const = default;
};

/// Maps syslog hostnames to nodes. Built from a topology, optionally with aliases.
class NodeResolver {
 public:
  NodeResolver() = default;
  explicit NodeResolver(const Topology& topo) {
    for (const auto& n : topo.nodes()) names_.emplace(n.name(), n);
  }

  void add_alias(std::string hostname, NodeId node) { names_[std::move(hostname)] = node; }

  std::optional<NodeId> resolve(std::string_view hostname) const {
    auto it = names_.find(std::string(hostname));
    if (it == names_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::unordered_map<std::string, NodeId> names_;
};

/// The textual pieces of one BSD syslog line.
struct SyslogFields {
  BsdStamp stamp;
  std::string_view hostname;
  std::string_view tag;
  std::string_view message;
};

/// Splits "MMM dd HH:MM:SS host tag: message". The tag is the first token after the
/// hostname when it ends in ':' and contains no spaces; otherwise the tag is empty.
inline SyslogFields split_syslog_line(std::string_view line) {
  if (line.find_first_of("\r\n") != std::string_view::npos) throw ParseError("line terminator inside record", 0);
  std::size_t err = 0;
  auto stamp = parse_bsd_stamp(line, err);
  if (!stamp) throw ParseError("malformed timestamp", err);
  if (line.size() < 17 || line[15] != ' ') throw ParseError("missing hostname", 15);
  SyslogFields f;
  f.stamp = *stamp;
  std::string_view rest = line.substr(16);
  auto sp = rest.find(' ');
  f.hostname = rest.substr(0, sp);
  if (f.hostname.empty()) throw ParseError("missing hostname", 16);
  if (sp == std::string_view::npos) return f;
  rest = rest.substr(sp + 1);
  auto colon = rest.find(": ");
  auto space = rest.find(' ');
  if (colon != std::string_view::npos && colon > 0 && (space == std::string_view::npos || colon < space)) {
    f.tag = rest.substr(0, colon);
    f.message = rest.substr(colon + 2);
  } else if (!rest.empty() && rest.back() == ':' && space == std::string_view::npos) {
    f.tag = rest.substr(0, rest.size() - 1);
  } else {
    f.message = rest;
  }
  return f;
}

/// Parses one line, assigning `default_year`. Year rollover is the stream reader's job.
inline LogEntry parse_syslog_line(std::string_view line, int default_year, const NodeResolver& resolver) {
  auto f = split_syslog_line(line);
  auto ts = f.stamp.in_year(default_year);
  if (!ts) throw ParseError("invalid calendar date", 0);
  auto node = resolver.resolve(f.hostname);
  if (!node) throw UnknownNodeError(std::string(f.hostname));
  return LogEntry{*ts, *node, std::string(f.tag), std::string(f.message)};
}

inline std::string format_syslog_line(const LogEntry& e) {
  std::string out = format_bsd_stamp(e.timestamp);
  out += ' ';
  out += e.node.name();
  out += ' ';
  if (!e.tag.empty()) {
    out += e.tag;
    out += ": ";
  }
  out += e.message;
  return out;
}

struct IngestStats {
  std::size_t lines = 0;
  std::size_t accepted = 0;
  std::size_t unknown_hosts = 0;
  std::size_t malformed = 0;
  std::size_t out_of_range = 0;
  std::size_t rollovers = 0;
};

/// Stateful stream parser. BSD stamps carry no year: each node starts in
/// `default_year`, and when a node's timestamp would jump backwards by more than
/// 180 days its year advances by one.
class SyslogStreamParser {
 public:
  struct Options {
    int default_year = 2017;
    std::optional<ObservationRange> range;
    bool skip_unknown_hosts = true;
    bool skip_malformed = false;
  };

  SyslogStreamParser(Options opts, const NodeResolver& resolver) : opts_(std::move(opts)), resolver_(&resolver) {}

  std::optional<LogEntry> feed(std::string_view line) {
    ++stats_.lines;
    if (trim(line).empty()) return std::nullopt;
    SyslogFields f;
    try {
      f = split_syslog_line(line);
    } catch (const ParseError&) {
      ++stats_.malformed;
      if (opts_.skip_malformed) return std::nullopt;
      throw;
    }
    auto node = resolver_->resolve(f.hostname);
    if (!node) {
      ++stats_.unknown_hosts;
      if (opts_.skip_unknown_hosts) return std::nullopt;
      throw UnknownNodeError(std::string(f.hostname));
    }
    auto& state = nodes_[*node];
    if (state.year == 0) state.year = opts_.default_year;
    auto ts = f.stamp.in_year(state.year);
    if (ts && state.last && *ts < *state.last - days(180)) {
      ++state.year;
      ++stats_.rollovers;
      ts = f.stamp.in_year(state.year);
    }
    if (!ts) {
      ++stats_.malformed;
      if (opts_.skip_malformed) return std::nullopt;
      throw ParseError("invalid calendar date", 0);
    }
    state.last = *ts;
    if (opts_.range && !opts_.range->contains(*ts)) {
      ++stats_.out_of_range;
      return std::nullopt;
    }
    ++stats_.accepted;
    return LogEntry{*ts, *node, std::string(f.tag), std::string(f.message)};
  }

  const IngestStats& stats() const noexcept { return stats_; }

 private:
  struct NodeState {
    int year = 0;
    std::optional<Instant> last;
  };
  Options opts_;
  const NodeResolver* resolver_;
  std::map<NodeId, NodeState> nodes_;
  IngestStats stats_;
};

struct SyslogCorpus {
  std::vector<LogEntry> entries;
  IngestStats stats;
};

/// Reads a syslog file (plain or .gz). Entries are stably sorted by timestamp.
inline SyslogCorpus read_syslog(const std::filesystem::path& path, const NodeResolver& resolver,
                                SyslogStreamParser::Options opts) {
  SyslogStreamParser parser(std::move(opts), resolver);
  LineReader reader(path);
  SyslogCorpus corpus;
  std::string line;
  while (reader.next(line)) {
    try {
      if (auto e = parser.feed(line)) corpus.entries.push_back(std::move(*e));
    } catch (const ParseError& e) {
      throw LoadError(path.string(), reader.line_number(), e.what());
    }
  }
  std::stable_sort(corpus.entries.begin(), corpus.entries.end(),
                   [](const LogEntry& a, const LogEntry& b) { return a.timestamp < b.timestamp; });
  corpus.stats = parser.stats();
  return corpus;
}

inline void write_syslog(std::ostream& out, const std::vector<LogEntry>& entries) {
  for (const auto& e : entries) out << format_syslog_line(e) << '\n';
}

}  // namespace sgscan
