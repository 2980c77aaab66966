#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sgscan/anonymizer.hpp"
#include "sgscan/chrono.hpp"
#include "sgscan/error.hpp"
#include "sgscan/log_model.hpp"

namespace sgscan {

/// One node's time-ordered entries. `keys[i]` identifies the message class of
/// entry i: a template id for raw corpora, the hash key value for anonymized ones.
struct NodeSeries {
  NodeId node;
  std::vector<Instant> times;
  std::vector<std::uint32_t> keys;

  std::size_t size() const noexcept { return times.size(); }
  bool empty() const noexcept { return times.empty(); }

  /// Number of entries with timestamp in [at - window, at).
  std::size_t count_in(Instant at, Duration window) const {
    const auto lo = std::lower_bound(times.begin(), times.end(), at - window);
    const auto hi = std::lower_bound(lo, times.end(), at);
    return static_cast<std::size_t>(hi - lo);
  }

  /// Index of the last entry strictly before t, if any.
  std::optional<std::size_t> last_before(Instant t) const {
    const auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return std::nullopt;
    return static_cast<std::size_t>(it - times.begin()) - 1;
  }
};

enum class CorpusKind { raw, anonymized };

inline std::string_view to_string(CorpusKind k) { return k == CorpusKind::raw ? "raw" : "anonymized"; }

/// Read-only per-node index over a corpus, shared by the outage detector,
/// the SG computation and the frequent-entry filters.
class CorpusIndex {
 public:
  CorpusIndex() = default;

  /// Raw corpus: messages are de-identified and interned to template ids.
  static CorpusIndex from_raw(const std::vector<LogEntry>& entries, const SubstitutionRuleSet& rules) {
    CorpusIndex idx;
    idx.kind_ = CorpusKind::raw;
    std::unordered_map<std::string, std::uint32_t> message_ids;
    std::unordered_map<std::string, std::uint32_t> template_ids;
    std::map<NodeId, NodeSeries> by_node;
    for (const auto& e : entries) {
      auto mit = message_ids.find(e.message);
      if (mit == message_ids.end()) {
        std::string tmpl = rules.deidentify(e.message);
        auto [tit, inserted] = template_ids.emplace(tmpl, static_cast<std::uint32_t>(idx.templates_.size()));
        if (inserted) idx.templates_.push_back(std::move(tmpl));
        mit = message_ids.emplace(e.message, tit->second).first;
      }
      auto& s = by_node[e.node];
      s.node = e.node;
      s.times.push_back(e.timestamp);
      s.keys.push_back(mit->second);
    }
    idx.adopt(std::move(by_node));
    return idx;
  }

  static CorpusIndex from_anonymized(const std::vector<AnonymizedEntry>& entries) {
    CorpusIndex idx;
    idx.kind_ = CorpusKind::anonymized;
    std::map<NodeId, NodeSeries> by_node;
    for (const auto& e : entries) {
      auto& s = by_node[e.node];
      s.node = e.node;
      s.times.push_back(e.timestamp);
      s.keys.push_back(e.key.value);
    }
    idx.adopt(std::move(by_node));
    return idx;
  }

  /// Builds an index with the same key domain from already-grouped series.
  CorpusIndex with_series(std::vector<NodeSeries> series) const {
    CorpusIndex idx;
    idx.kind_ = kind_;
    idx.templates_ = templates_;
    std::map<NodeId, NodeSeries> by_node;
    for (auto& s : series) {
      if (!s.empty()) by_node.emplace(s.node, std::move(s));
    }
    idx.adopt(std::move(by_node));
    return idx;
  }

  CorpusKind kind() const noexcept { return kind_; }
  const std::vector<NodeSeries>& series() const noexcept { return series_; }
  const std::vector<std::string>& templates() const noexcept { return templates_; }

  const NodeSeries* find(NodeId n) const {
    auto it = std::lower_bound(series_.begin(), series_.end(), n,
                               [](const NodeSeries& s, const NodeId& id) { return s.node < id; });
    if (it == series_.end() || it->node != n) return nullptr;
    return &*it;
  }

  std::size_t sg(NodeId n, Instant at, Duration window) const {
    const auto* s = find(n);
    return s == nullptr ? 0 : s->count_in(at, window);
  }

  std::size_t total_entries() const {
    std::size_t n = 0;
    for (const auto& s : series_) n += s.size();
    return n;
  }

  /// Maps a de-identified template to the key value used in this index, if present.
  std::optional<std::uint32_t> key_for_template(const std::string& tmpl) const {
    if (kind_ == CorpusKind::anonymized) return HashKey::of_template(tmpl).value;
    auto it = std::find(templates_.begin(), templates_.end(), tmpl);
    if (it == templates_.end()) return std::nullopt;
    return static_cast<std::uint32_t>(it - templates_.begin());
  }

  /// Maps a hash key to the key value used in this index, if present.
  std::optional<std::uint32_t> key_for_hash(HashKey k) const {
    if (kind_ == CorpusKind::anonymized) return k.value;
    for (std::size_t i = 0; i < templates_.size(); ++i) {
      if (HashKey::of_template(templates_[i]) == k) return static_cast<std::uint32_t>(i);
    }
    return std::nullopt;
  }

 private:
  void adopt(std::map<NodeId, NodeSeries> by_node) {
    series_.clear();
    series_.reserve(by_node.size());
    for (auto& [node, s] : by_node) {
      if (!std::is_sorted(s.times.begin(), s.times.end())) {
        std::vector<std::size_t> order(s.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.times[a] < s.times[b]; });
        NodeSeries sorted{s.node, {}, {}};
        sorted.times.reserve(order.size());
        sorted.keys.reserve(order.size());
        for (auto i : order) {
          sorted.times.push_back(s.times[i]);
          sorted.keys.push_back(s.keys[i]);
        }
        s = std::move(sorted);
      }
      series_.push_back(std::move(s));
    }
  }

  CorpusKind kind_ = CorpusKind::raw;
  std::vector<std::string> templates_;
  std::vector<NodeSeries> series_;
};

}  // namespace sgscan
