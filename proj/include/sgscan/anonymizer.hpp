#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <regex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sgscan/chrono.hpp"
#include "sgscan/error.hpp"
#include "sgscan/log_model.hpp"
#include "sgscan/text.hpp"

namespace sgscan {

// ---------------------------------------------------------------------------
// Hash keys
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t fnv1a32(std::string_view bytes) noexcept {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

/// 32-bit template key, rendered as 8 lowercase hex digits.
struct HashKey {
  std::uint32_t value = 0;

  auto operator<=>(const HashKey&) const = default;

  static HashKey of_template(std::string_view tmpl) noexcept { return HashKey{fnv1a32(tmpl)}; }

  std::string hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(8, '0');
    for (int i = 7; i >= 0; --i) out[static_cast<std::size_t>(7 - i)] = digits[(value >> (4 * i)) & 0xF];
    return out;
  }

  static std::optional<HashKey> parse(std::string_view s) {
    if (s.size() != 8) return std::nullopt;
    std::uint32_t v = 0;
    for (char c : s) {
      v <<= 4;
      if (c >= '0' && c <= '9') v |= static_cast<std::uint32_t>(c - '0');
      else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint32_t>(c - 'a' + 10);
      else return std::nullopt;
    }
    return HashKey{v};
  }
};

struct HashKeyHash {
  std::size_t operator()(HashKey k) const noexcept { return std::hash<std::uint32_t>{}(k.value); }
};

// ---------------------------------------------------------------------------
// Built-in pattern matchers
//
// Each finder returns the leftmost match starting at or after `from`, with the
// same result std::regex (ECMAScript) would give when iterating matches over
// the whole string. The text before `from` is available for \b and ^.
// ---------------------------------------------------------------------------

struct Match {
  std::size_t begin = 0;
  std::size_t end = 0;
};

using Finder = std::optional<Match> (*)(std::string_view, std::size_t);

namespace detail {

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
inline bool is_hex(char c) { return is_digit(c) || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F'); }
inline bool is_word(char c) { return is_digit(c) || is_alpha(c) || c == '_'; }

inline bool word_at(std::string_view s, std::size_t i) { return i < s.size() && is_word(s[i]); }
// \b immediately before a word character at i.
inline bool starts_word(std::string_view s, std::size_t i) { return i == 0 || !is_word(s[i - 1]); }
// \b immediately after a word character ending at i.
inline bool ends_word(std::string_view s, std::size_t i) { return !word_at(s, i); }

inline std::size_t run(std::string_view s, std::size_t i, bool (*pred)(char)) {
  std::size_t j = i;
  while (j < s.size() && pred(s[j])) ++j;
  return j - i;
}

inline bool digits_at(std::string_view s, std::size_t i, std::size_t n) {
  if (i + n > s.size()) return false;
  for (std::size_t k = 0; k < n; ++k) {
    if (!is_digit(s[i + k])) return false;
  }
  return true;
}

inline bool user_first(char c) { return is_alpha(c) || c == '_'; }
inline bool user_rest(char c) { return is_word(c) || c == '.' || c == '-'; }
inline bool path_char(char c) {
  return is_word(c) || c == '.' || c == '+' || c == '@' || c == '~' || c == '-';
}

template <typename AtFn>
std::optional<Match> scan(std::string_view s, std::size_t from, AtFn at) {
  for (std::size_t p = from; p < s.size(); ++p) {
    if (auto end = at(s, p)) return Match{p, *end};
  }
  return std::nullopt;
}

inline std::optional<Match> find_cmd(std::string_view s, std::size_t from) {
  // \bCMD \(.*\)  ->  greedy up to the last ')'
  const auto last_paren = s.rfind(')');
  if (last_paren == std::string_view::npos) return std::nullopt;
  return scan(s, from, [last_paren](std::string_view t, std::size_t p) -> std::optional<std::size_t> {
    if (!starts_word(t, p) || t.substr(p, 5) != "CMD (" || last_paren < p + 5) return std::nullopt;
    return last_paren + 1;
  });
}

inline std::optional<Match> find_paren_user(std::string_view s, std::size_t from) {
  // ^\([A-Za-z_][A-Za-z0-9_.-]*\)
  if (from != 0 || s.size() < 3 || s[0] != '(' || !user_first(s[1])) return std::nullopt;
  const std::size_t end = 2 + run(s, 2, user_rest);
  if (end >= s.size() || s[end] != ')') return std::nullopt;
  return Match{0, end + 1};
}

inline std::optional<Match> find_user_word(std::string_view s, std::size_t from) {
  // \buser [A-Za-z_][A-Za-z0-9_.-]*
  return scan(s, from, [](std::string_view t, std::size_t p) -> std::optional<std::size_t> {
    if (!starts_word(t, p) || t.substr(p, 5) != "user " || p + 5 >= t.size() || !user_first(t[p + 5])) {
      return std::nullopt;
    }
    return p + 6 + run(t, p + 6, user_rest);
  });
}

inline std::optional<Match> find_path(std::string_view s, std::size_t from) {
  // (?:/[A-Za-z0-9_.+@~-]+)+/?
  return scan(s, from, [](std::string_view t, std::size_t p) -> std::optional<std::size_t> {
    std::size_t i = p;
    while (i + 1 < t.size() && t[i] == '/' && path_char(t[i + 1])) i += 1 + run(t, i + 1, path_char);
    if (i == p) return std::nullopt;
    if (i < t.size() && t[i] == '/') ++i;
    return i;
  });
}

inline std::optional<Match> find_iso_time(std::string_view s, std::size_t from) {
  // \d{4}-\d{2}-\d{2}(?:[T ]\d{2}:\d{2}(?::\d{2}(?:\.\d+)?)?(?:Z|[+-]\d{2}:?\d{2})?)?
  return scan(s, from, [](std::string_view t, std::size_t p) -> std::optional<std::size_t> {
    if (!digits_at(t, p, 4) || p + 10 > t.size() || t[p + 4] != '-' || !digits_at(t, p + 5, 2) ||
        t[p + 7] != '-' || !digits_at(t, p + 8, 2)) {
      return std::nullopt;
    }
    std::size_t i = p + 10;
    if (i < t.size() && (t[i] == 'T' || t[i] == ' ') && digits_at(t, i + 1, 2) && i + 3 < t.size() &&
        t[i + 3] == ':' && digits_at(t, i + 4, 2)) {
      i += 6;
      if (i < t.size() && t[i] == ':' && digits_at(t, i + 1, 2)) {
        i += 3;
        if (i + 1 < t.size() && t[i] == '.' && is_digit(t[i + 1])) i += 1 + run(t, i + 1, is_digit);
      }
      if (i < t.size() && t[i] == 'Z') {
        ++i;
      } else if (i < t.size() && (t[i] == '+' || t[i] == '-') && digits_at(t, i + 1, 2)) {
        if (i + 3 < t.size() && t[i + 3] == ':' && digits_at(t, i + 4, 2)) i += 6;
        else if (digits_at(t, i + 3, 2)) i += 5;
      }
    }
    return i;
  });
}

inline std::optional<Match> find_bsd_time(std::string_view s, std::size_t from) {
  // \b(?:Jan|...|Dec) {1,2}\d{1,2} \d{2}:\d{2}:\d{2}\b
  return scan(s, from, [](std::string_view t, std::size_t p) -> std::optional<std::size_t> {
    if (!starts_word(t, p) || p + 3 > t.size()) return std::nullopt;
    bool month = false;
    for (auto m : kMonthAbbrev) month = month || t.substr(p, 3) == m;
    if (!month) return std::nullopt;
    std::size_t i = p + 3;
    const std::size_t spaces = run(t, i, [](char c) { return c == ' '; });
    if (spaces == 0 || spaces > 2) return std::nullopt;
    i += spaces;
    const std::size_t ds = run(t, i, is_digit);
    if (ds == 0 || ds > 2) return std::nullopt;
    i += ds;
    if (i >= t.size() || t[i] != ' ' || !digits_at(t, i + 1, 2) || i + 3 >= t.size() || t[i + 3] != ':' ||
        !digits_at(t, i + 4, 2) || i + 6 >= t.size() || t[i + 6] != ':' || !digits_at(t, i + 7, 2)) {
      return std::nullopt;
    }
    i += 9;
    if (!ends_word(t, i)) return std::nullopt;
    return i;
  });
}

inline std::optional<Match> find_clock(std::string_view s, std::size_t from) {
  // \b\d{2}:\d{2}:\d{2}\b
  return scan(s, from, [](std::string_view t, std::size_t p) -> std::optional<std::size_t> {
    if (!starts_word(t, p) || !digits_at(t, p, 2) || p + 8 > t.size() || t[p + 2] != ':' ||
        !digits_at(t, p + 3, 2) || t[p + 5] != ':' || !digits_at(t, p + 6, 2) || !ends_word(t, p + 8)) {
      return std::nullopt;
    }
    return p + 8;
  });
}

inline std::optional<Match> find_ipv4(std::string_view s, std::size_t from) {
  // \b\d{1,3}(?:\.\d{1,3}){3}\b
  return scan(s, from, [](std::string_view t, std::size_t p) -> std::optional<std::size_t> {
    if (!starts_word(t, p)) return std::nullopt;
    std::size_t i = p;
    for (int part = 0; part < 4; ++part) {
      if (part > 0) {
        if (i >= t.size() || t[i] != '.') return std::nullopt;
        ++i;
      }
      const std::size_t n = run(t, i, is_digit);
      if (n == 0 || n > 3) return std::nullopt;
      i += n;
    }
    if (!ends_word(t, i)) return std::nullopt;
    return i;
  });
}

inline std::optional<Match> find_mac(std::string_view s, std::size_t from) {
  // \b[0-9A-Fa-f]{2}(?::[0-9A-Fa-f]{2}){5}\b
  return scan(s, from, [](std::string_view t, std::size_t p) -> std::optional<std::size_t> {
    if (!starts_word(t, p) || p + 17 > t.size()) return std::nullopt;
    for (std::size_t k = 0; k < 17; ++k) {
      const char c = t[p + k];
      if (k % 3 == 2 ? c != ':' : !is_hex(c)) return std::nullopt;
    }
    if (!ends_word(t, p + 17)) return std::nullopt;
    return p + 17;
  });
}

inline std::optional<Match> find_ipv6(std::string_view s, std::size_t from) {
  // \b[0-9A-Fa-f]{1,4}(?:::?[0-9A-Fa-f]{1,4}){2,7}\b
  // A component can only be a whole hex run of length 1-4 followed by a non-word
  // character; the match keeps the longest valid prefix of up to 7 groups.
  return scan(s, from, [](std::string_view t, std::size_t p) -> std::optional<std::size_t> {
    if (!starts_word(t, p)) return std::nullopt;
    const std::size_t first = run(t, p, is_hex);
    if (first == 0 || first > 4) return std::nullopt;
    std::size_t i = p + first;
    std::size_t end = i;
    int groups = 0;
    while (groups < 7 && i < t.size() && t[i] == ':') {
      std::size_t j = i + 1;
      if (j < t.size() && t[j] == ':') ++j;
      const std::size_t n = run(t, j, is_hex);
      if (n == 0 || n > 4 || word_at(t, j + n)) break;
      i = j + n;
      end = i;
      ++groups;
    }
    if (groups < 2) return std::nullopt;
    return end;
  });
}

inline std::optional<Match> find_0x(std::string_view s, std::size_t from) {
  // \b0[xX][0-9A-Fa-f]+\b
  return scan(s, from, [](std::string_view t, std::size_t p) -> std::optional<std::size_t> {
    if (!starts_word(t, p) || p + 2 >= t.size() || t[p] != '0' || (t[p + 1] != 'x' && t[p + 1] != 'X')) {
      return std::nullopt;
    }
    const std::size_t n = run(t, p + 2, is_hex);
    if (n == 0 || !ends_word(t, p + 2 + n)) return std::nullopt;
    return p + 2 + n;
  });
}

inline std::optional<Match> find_hex_word(std::string_view s, std::size_t from) {
  // \b(?=[0-9A-Fa-f]*[A-Fa-f])(?=[0-9A-Fa-f]*[0-9])[0-9A-Fa-f]{4,}\b
  return scan(s, from, [](std::string_view t, std::size_t p) -> std::optional<std::size_t> {
    if (!starts_word(t, p)) return std::nullopt;
    const std::size_t n = run(t, p, is_hex);
    if (n < 4 || !ends_word(t, p + n)) return std::nullopt;
    bool letter = false, digit = false;
    for (std::size_t k = p; k < p + n; ++k) (is_digit(t[k]) ? digit : letter) = true;
    if (!letter || !digit) return std::nullopt;
    return p + n;
  });
}

inline std::optional<Match> find_number(std::string_view s, std::size_t from) {
  // [0-9]+
  for (std::size_t p = from; p < s.size(); ++p) {
    if (is_digit(s[p])) return Match{p, p + run(s, p, is_digit)};
  }
  return std::nullopt;
}

}  // namespace detail

struct BuiltinPattern {
  std::string_view pattern;
  std::string_view token;
  Finder finder;
};

/// The default rule set, in application order. Patterns are ECMAScript regular
/// expressions; the finders implement exactly these expressions.
inline const std::vector<BuiltinPattern>& builtin_patterns() {
  static const std::vector<BuiltinPattern> table = {
      {R"(\bCMD \(.*\))", "CMD (<CMD>)", &detail::find_cmd},
      {R"(^\([A-Za-z_][A-Za-z0-9_.-]*\))", "(<USER>)", &detail::find_paren_user},
      {R"(\buser [A-Za-z_][A-Za-z0-9_.-]*)", "user <USER>", &detail::find_user_word},
      {R"((?:/[A-Za-z0-9_.+@~-]+)+/?)", "<PATH>", &detail::find_path},
      {R"(\d{4}-\d{2}-\d{2}(?:[T ]\d{2}:\d{2}(?::\d{2}(?:\.\d+)?)?(?:Z|[+-]\d{2}:?\d{2})?)?)", "<TIME>",
       &detail::find_iso_time},
      {R"(\b(?:Jan|Feb|Mar|Apr|May|Jun|Jul|Aug|Sep|Oct|Nov|Dec) {1,2}\d{1,2} \d{2}:\d{2}:\d{2}\b)", "<TIME>",
       &detail::find_bsd_time},
      {R"(\b\d{2}:\d{2}:\d{2}\b)", "<TIME>", &detail::find_clock},
      {R"(\b\d{1,3}(?:\.\d{1,3}){3}\b)", "<ADDR>", &detail::find_ipv4},
      {R"(\b[0-9A-Fa-f]{2}(?::[0-9A-Fa-f]{2}){5}\b)", "<ADDR>", &detail::find_mac},
      {R"(\b[0-9A-Fa-f]{1,4}(?:::?[0-9A-Fa-f]{1,4}){2,7}\b)", "<ADDR>", &detail::find_ipv6},
      {R"(\b0[xX][0-9A-Fa-f]+\b)", "<HEX>", &detail::find_0x},
      {R"(\b(?=[0-9A-Fa-f]*[A-Fa-f])(?=[0-9A-Fa-f]*[0-9])[0-9A-Fa-f]{4,}\b)", "<HEX>", &detail::find_hex_word},
      {R"([0-9]+)", "<NUM>", &detail::find_number},
  };
  return table;
}

// ---------------------------------------------------------------------------
// Rules
// ---------------------------------------------------------------------------

/// One (pattern, token) substitution. Patterns identical to a built-in pattern
/// run on the hand-written matcher unless `Engine::regex` is requested.
class SubstitutionRule {
 public:
  enum class Engine { automatic, regex };

  SubstitutionRule(std::string pattern, std::string token, Engine engine = Engine::automatic)
      : pattern_(std::move(pattern)), token_(std::move(token)) {
    if (engine == Engine::automatic) {
      for (const auto& b : builtin_patterns()) {
        if (b.pattern == pattern_) finder_ = b.finder;
      }
    }
    if (finder_ == nullptr) {
      try {
        regex_ = std::regex(pattern_, std::regex::ECMAScript | std::regex::optimize);
      } catch (const std::regex_error& e) {
        throw Error("invalid rule pattern '" + pattern_ + "': " + e.what());
      }
      for (char c : token_) {
        if (c == '$') format_ += '$';
        format_ += c;
      }
    }
  }

  const std::string& pattern() const noexcept { return pattern_; }
  const std::string& token() const noexcept { return token_; }
  bool native() const noexcept { return finder_ != nullptr; }

  /// Replaces every non-overlapping match, scanning left to right.
  std::string apply(std::string_view text) const {
    if (finder_ == nullptr) return std::regex_replace(std::string(text), *regex_, format_);
    std::string out;
    std::size_t pos = 0;
    while (auto m = finder_(text, pos)) {
      if (out.empty()) out.reserve(text.size());
      out.append(text.substr(pos, m->begin - pos));
      out += token_;
      pos = m->end;
    }
    if (pos == 0) return std::string(text);
    out.append(text.substr(pos));
    return out;
  }

 private:
  std::string pattern_;
  std::string token_;
  Finder finder_ = nullptr;
  std::optional<std::regex> regex_;
  std::string format_;
};

/// Ordered, versioned list of substitution rules.
class SubstitutionRuleSet {
 public:
  SubstitutionRuleSet() = default;
  SubstitutionRuleSet(std::vector<SubstitutionRule> rules, std::string version)
      : rules_(std::move(rules)), version_(std::move(version)) {}

  static SubstitutionRuleSet defaults(SubstitutionRule::Engine engine = SubstitutionRule::Engine::automatic) {
    std::vector<SubstitutionRule> rules;
    for (const auto& b : builtin_patterns()) rules.emplace_back(std::string(b.pattern), std::string(b.token), engine);
    return SubstitutionRuleSet(std::move(rules), "default-1");
  }

  const std::vector<SubstitutionRule>& rules() const noexcept { return rules_; }
  const std::string& version() const noexcept { return version_; }

  /// Applies the rules in order, repeating the whole pass until the text stops
  /// changing. A token can open a word boundary that an earlier rule keys on
  /// ("1user x" becomes "<NUM>user x"), so one pass is not always a fixpoint.
  std::string deidentify(std::string_view message) const {
    std::string current(message);
    for (int pass = 0; pass < 8; ++pass) {
      std::string next = current;
      for (const auto& r : rules_) next = r.apply(next);
      if (next == current) break;
      current = std::move(next);
    }
    return current;
  }

  HashKey key_of(std::string_view message) const { return HashKey::of_template(deidentify(message)); }

 private:
  std::vector<SubstitutionRule> rules_;
  std::string version_;
};

/// Reads `<pattern>\t<token>` lines. `#version <v>` names the set; other '#' lines
/// are comments. Without a version line the version is derived from the content.
inline SubstitutionRuleSet parse_rules(std::istream& in, const std::string& source = "<rules>") {
  std::vector<SubstitutionRule> rules;
  std::string version, line, all;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("#version", 0) == 0) {
      version = std::string(trim(std::string_view(line).substr(8)));
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw LoadError(source, line_no, "expected <pattern>\\t<token>");
    try {
      rules.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    } catch (const Error& e) {
      throw LoadError(source, line_no, e.what());
    }
    all += line;
    all += '\n';
  }
  if (version.empty()) version = "custom-" + HashKey{fnv1a32(all)}.hex();
  return SubstitutionRuleSet(std::move(rules), version);
}

inline SubstitutionRuleSet load_rules(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  return parse_rules(in, path.string());
}

inline void write_rules(std::ostream& out, const SubstitutionRuleSet& rules) {
  out << "#version " << rules.version() << '\n';
  for (const auto& r : rules.rules()) out << r.pattern() << '\t' << r.token() << '\n';
}

// ---------------------------------------------------------------------------
// Anonymized entries
// ---------------------------------------------------------------------------

struct AnonymizedEntry {
  Instant timestamp;
  NodeId node;
  HashKey key;

  bool operator==(const AnonymizedEntry&) const = default;
};

inline AnonymizedEntry anonymize(const LogEntry& entry, const SubstitutionRuleSet& rules) {
  return AnonymizedEntry{entry.timestamp, entry.node, rules.key_of(entry.message)};
}

/// Memoizing anonymizer for streams with repeated messages.
class Anonymizer {
 public:
  explicit Anonymizer(const SubstitutionRuleSet& rules) : rules_(&rules) {}

  HashKey key_of(const std::string& message) {
    auto it = cache_.find(message);
    if (it != cache_.end()) return it->second;
    const HashKey k = rules_->key_of(message);
    if (cache_.size() < kMaxCache) cache_.emplace(message, k);
    return k;
  }

  AnonymizedEntry operator()(const LogEntry& e) { return {e.timestamp, e.node, key_of(e.message)}; }

 private:
  static constexpr std::size_t kMaxCache = 1u << 20;
  const SubstitutionRuleSet* rules_;
  std::unordered_map<std::string, HashKey> cache_;
};

inline std::vector<AnonymizedEntry> anonymize_stream(const std::vector<LogEntry>& entries,
                                                     const SubstitutionRuleSet& rules) {
  std::vector<AnonymizedEntry> out;
  out.reserve(entries.size());
  Anonymizer anon(rules);
  for (const auto& e : entries) out.push_back(anon(e));
  return out;
}

/// Audits a set of messages for distinct templates that share a key.
/// Returns the colliding template pairs (empty when the audit passes).
inline std::vector<std::pair<std::string, std::string>> audit_collisions(const std::vector<std::string>& templates) {
  std::unordered_map<HashKey, std::string, HashKeyHash> seen;
  std::vector<std::pair<std::string, std::string>> collisions;
  for (const auto& t : templates) {
    auto [it, inserted] = seen.emplace(HashKey::of_template(t), t);
    if (!inserted && it->second != t) collisions.emplace_back(it->second, t);
  }
  return collisions;
}

struct AnonymizedCorpus {
  std::string rule_version;
  std::vector<AnonymizedEntry> entries;
};

inline void write_anonymized(std::ostream& out, const std::string& rule_version,
                             const std::vector<AnonymizedEntry>& entries) {
  out << "#pars-lite v" << rule_version << '\n';
  for (const auto& e : entries) out << format_iso(e.timestamp) << '\t' << e.node.name() << '\t' << e.key.hex() << '\n';
}

inline AnonymizedCorpus read_anonymized(const std::filesystem::path& path) {
  LineReader reader(path);
  AnonymizedCorpus corpus;
  std::string line;
  bool header = false;
  while (reader.next(line)) {
    if (line.rfind("#pars-lite v", 0) == 0) {
      corpus.rule_version = line.substr(12);
      header = true;
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line, '\t');
    if (f.size() != 3) throw LoadError(path.string(), reader.line_number(), "expected 3 tab-separated fields");
    auto ts = parse_iso(f[0]);
    auto node = NodeId::parse(f[1]);
    auto key = HashKey::parse(f[2]);
    if (!ts || !node || !key) throw LoadError(path.string(), reader.line_number(), "malformed anonymized record");
    corpus.entries.push_back({*ts, *node, *key});
  }
  if (!header) throw LoadError(path.string(), 1, "missing #pars-lite header");
  std::stable_sort(corpus.entries.begin(), corpus.entries.end(),
                   [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  return corpus;
}

}  // namespace sgscan
