#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sgscan/chrono.hpp"
#include "sgscan/datasources.hpp"
#include "sgscan/failure_classifier.hpp"
#include "sgscan/log_model.hpp"

namespace sgscan {

enum class Perspective { hardware, allocation, location, time_of_failure, combined };

inline std::string_view to_string(Perspective p) {
  switch (p) {
    case Perspective::hardware: return "hardware";
    case Perspective::allocation: return "allocation";
    case Perspective::location: return "location";
    case Perspective::time_of_failure: return "time_of_failure";
    case Perspective::combined: return "combined";
  }
  return "?";
}

inline std::optional<Perspective> parse_perspective(std::string_view s) {
  for (auto p : {Perspective::hardware, Perspective::allocation, Perspective::location, Perspective::time_of_failure,
                 Perspective::combined}) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

/// A partition of nodes into vicinity groups. Groups are sorted internally and
/// ordered by their smallest node.
struct VicinityAssignment {
  Perspective perspective = Perspective::hardware;
  std::optional<Instant> at;
  std::vector<std::vector<NodeId>> groups;
  std::vector<NodeId> ungrouped;

  bool operator==(const VicinityAssignment&) const = default;

  void normalize() {
    for (auto& g : groups) std::sort(g.begin(), g.end());
    groups.erase(std::remove_if(groups.begin(), groups.end(), [](const auto& g) { return g.empty(); }), groups.end());
    std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
    std::sort(ungrouped.begin(), ungrouped.end());
  }

  std::size_t node_count() const {
    std::size_t n = ungrouped.size();
    for (const auto& g : groups) n += g.size();
    return n;
  }
};

/// True when groups are non-empty, pairwise disjoint, disjoint from `ungrouped`,
/// and together cover exactly `universe`.
inline bool is_disjoint_cover(const VicinityAssignment& a, const std::vector<NodeId>& universe) {
  std::set<NodeId> seen;
  for (const auto& g : a.groups) {
    if (g.empty()) return false;
    for (const auto& n : g) {
      if (!seen.insert(n).second) return false;
    }
  }
  for (const auto& n : a.ungrouped) {
    if (!seen.insert(n).second) return false;
  }
  return seen == std::set<NodeId>(universe.begin(), universe.end());
}

namespace detail {

template <typename Key, typename KeyFn>
VicinityAssignment bucket(const Topology& topo, Perspective p, KeyFn key) {
  std::map<Key, std::vector<NodeId>> buckets;
  for (const auto& n : topo.nodes()) buckets[key(n)].push_back(n);
  VicinityAssignment a;
  a.perspective = p;
  for (auto& [k, nodes] : buckets) a.groups.push_back(std::move(nodes));
  a.normalize();
  return a;
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace detail

/// One group per architecture class present in the topology.
inline VicinityAssignment hardware_vicinity(const Topology& topo) {
  return detail::bucket<Architecture>(topo, Perspective::hardware,
                                      [&](NodeId n) { return topo.architecture_of(n); });
}

/// One group per (island, rack).
inline VicinityAssignment location_vicinity(const Topology& topo) {
  return detail::bucket<RackId>(topo, Perspective::location, [](NodeId n) { return Topology::rack_of(n); });
}

/// Racks split by architecture: location vicinities within each hardware vicinity.
inline VicinityAssignment combined_vicinity(const Topology& topo) {
  using Key = std::pair<Architecture, RackId>;
  return detail::bucket<Key>(topo, Perspective::combined,
                             [&](NodeId n) { return Key{topo.architecture_of(n), Topology::rack_of(n)}; });
}

/// Nodes sharing a job active at t are in one group; groups that share a node
/// are merged. Jobs with a single node do not form a group. Without a universe,
/// the covered set is the nodes of jobs active at t; with one, idle nodes are
/// listed as ungrouped too.
inline VicinityAssignment allocation_vicinity(const std::vector<JobRecord>& jobs, Instant t,
                                              const Topology* universe = nullptr) {
  std::vector<NodeId> nodes;
  if (universe != nullptr) nodes = universe->nodes();
  std::vector<const JobRecord*> active;
  for (const auto& j : jobs) {
    if (!j.active_at(t)) continue;
    active.push_back(&j);
    if (universe == nullptr) nodes.insert(nodes.end(), j.nodes.begin(), j.nodes.end());
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  auto index_of = [&](NodeId n) -> std::optional<std::size_t> {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), n);
    if (it == nodes.end() || *it != n) return std::nullopt;
    return static_cast<std::size_t>(it - nodes.begin());
  };
  detail::UnionFind uf(nodes.size());
  std::vector<bool> grouped(nodes.size(), false);
  for (const auto* j : active) {
    if (j->nodes.size() < 2) continue;
    std::optional<std::size_t> first;
    for (const auto& n : j->nodes) {
      auto i = index_of(n);
      if (!i) continue;
      grouped[*i] = true;
      if (first) uf.unite(*first, *i);
      else first = i;
    }
  }
  std::map<std::size_t, std::vector<NodeId>> comps;
  VicinityAssignment a;
  a.perspective = Perspective::allocation;
  a.at = t;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (grouped[i]) comps[uf.find(i)].push_back(nodes[i]);
    else a.ungrouped.push_back(nodes[i]);
  }
  for (auto& [root, g] : comps) a.groups.push_back(std::move(g));
  a.normalize();
  return a;
}

/// Single-linkage chaining of failures whose consecutive gaps are <= interval.
/// Each chain becomes one assignment anchored at its first failure time.
inline std::vector<VicinityAssignment> time_of_failure_vicinity(std::vector<FailureEvent> failures,
                                                                Duration interval = minutes(10)) {
  std::stable_sort(failures.begin(), failures.end(), [](const FailureEvent& a, const FailureEvent& b) {
    if (a.outage.outage_time != b.outage.outage_time) return a.outage.outage_time < b.outage.outage_time;
    return a.outage.node < b.outage.node;
  });
  std::vector<VicinityAssignment> out;
  std::optional<Instant> prev;
  for (const auto& f : failures) {
    const Instant t = f.outage.outage_time;
    if (!prev || t - *prev > interval) {
      VicinityAssignment a;
      a.perspective = Perspective::time_of_failure;
      a.at = t;
      a.groups.emplace_back();
      out.push_back(std::move(a));
    }
    auto& g = out.back().groups.front();
    if (std::find(g.begin(), g.end(), f.outage.node) == g.end()) g.push_back(f.outage.node);
    prev = t;
  }
  for (auto& a : out) a.normalize();
  return out;
}

inline void write_assignment(std::ostream& out, const VicinityAssignment& a) {
  const std::string at = a.at ? format_iso(*a.at) : "-";
  for (std::size_t g = 0; g < a.groups.size(); ++g) {
    for (const auto& n : a.groups[g]) out << to_string(a.perspective) << '\t' << at << '\t' << g << '\t' << n.name() << '\n';
  }
  for (const auto& n : a.ungrouped) out << to_string(a.perspective) << '\t' << at << "\t-\t" << n.name() << '\n';
}

}  // namespace sgscan
