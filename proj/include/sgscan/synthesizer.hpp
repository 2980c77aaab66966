#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sgscan/chrono.hpp"
#include "sgscan/datasources.hpp"
#include "sgscan/error.hpp"
#include "sgscan/log_model.hpp"
#include "sgscan/text.hpp"

namespace sgscan {

// ---------------------------------------------------------------------------
// Topologies
// ---------------------------------------------------------------------------

/// The Taurus-like reference topology: 2046 nodes on 6 islands, 36 nodes per rack.
inline Topology taurus_topology() {
  Topology topo;
  auto fill = [&](int island, std::vector<std::pair<Architecture, int>> classes) {
    int index = 0;
    for (auto [arch, count] : classes) {
      for (int k = 0; k < count; ++k, ++index) topo.add(NodeId{island, index / 36, index % 36}, arch);
    }
  };
  fill(1, {{Architecture::sandy_bridge, 270}});
  fill(2, {{Architecture::gpu, 108}});
  fill(3, {{Architecture::westmere, 180}});
  fill(4, {{Architecture::haswell, 272}, {Architecture::broadwell, 32}});
  fill(5, {{Architecture::haswell, 612}});
  fill(6, {{Architecture::haswell, 572}});
  return topo;
}

/// Keeps round(factor * size) nodes (at least one), apportioned over architecture
/// classes by largest remainder; each class keeps its first nodes in topology order.
inline Topology scale_topology(const Topology& full, double factor) {
  if (!(factor > 0.0 && factor <= 1.0)) throw ContractViolation("scale factor must be in (0, 1]");
  if (full.empty()) return {};
  const auto total = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(factor * full.size())));
  struct Quota {
    Architecture arch;
    std::size_t count;
    std::size_t take;
    double remainder;
  };
  std::vector<Quota> quotas;
  std::size_t assigned = 0;
  for (auto a : kArchitectures) {
    const auto c = full.count(a);
    if (c == 0) continue;
    const double exact = static_cast<double>(total) * static_cast<double>(c) / static_cast<double>(full.size());
    const auto take = static_cast<std::size_t>(std::floor(exact));
    quotas.push_back({a, c, take, exact - static_cast<double>(take)});
    assigned += take;
  }
  std::vector<std::size_t> order(quotas.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (quotas[x].remainder != quotas[y].remainder) return quotas[x].remainder > quotas[y].remainder;
    return quotas[x].count > quotas[y].count;
  });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
    auto& q = quotas[order[k]];
    if (q.take < q.count) {
      ++q.take;
      ++assigned;
    }
  }
  Topology out;
  for (const auto& q : quotas) {
    std::size_t taken = 0;
    for (const auto& n : full.nodes()) {
      if (taken == q.take) break;
      if (full.architecture_of(n) == q.arch) {
        out.add(n, q.arch);
        ++taken;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Deterministic random numbers
// ---------------------------------------------------------------------------

/// mt19937_64 with hand-written transforms, so streams are identical on every
/// standard library (the std distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::uint64_t next() { return eng_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  long long uniform_int(long long lo, long long hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<long long>(eng_());
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x = 0;
    do {
      x = eng_();
    } while (x >= limit);
    return lo + static_cast<long long>(x % span);
  }
  bool bernoulli(double p) { return uniform() < p; }
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }
  Duration seconds_between(Duration lo, Duration hi) { return Duration{uniform_int(lo.count(), hi.count())}; }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[static_cast<std::size_t>(uniform_int(0, static_cast<long long>(i) - 1))]);
  }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(uniform_int(0, static_cast<long long>(v.size()) - 1))];
  }

 private:
  std::mt19937_64 eng_;
};

// ---------------------------------------------------------------------------
// Specification and ground truth
// ---------------------------------------------------------------------------

enum class FailureCause { crash_panic, silent_hang, no_reboot };

inline std::string_view to_string(FailureCause c) {
  switch (c) {
    case FailureCause::crash_panic: return "crash_panic";
    case FailureCause::silent_hang: return "silent_hang";
    case FailureCause::no_reboot: return "no_reboot";
  }
  return "?";
}

inline std::optional<FailureCause> parse_failure_cause(std::string_view s) {
  for (auto c : {FailureCause::crash_panic, FailureCause::silent_hang, FailureCause::no_reboot}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

struct GeneratorSpec {
  Topology topology;
  Instant start = *parse_iso("2017-03-01T00:00:00Z");
  Duration duration = days(7);
  std::uint64_t seed = 7;
  std::map<Architecture, double> base_rate = {{Architecture::haswell, 40.0},
                                              {Architecture::sandy_bridge, 70.0},
                                              {Architecture::westmere, 25.0},
                                              {Architecture::broadwell, 40.0},
                                              {Architecture::gpu, 90.0}};
  std::size_t failure_count = 40;
  double failure_skew = 0.2;   // fraction of failing nodes that are failure-prone
  double skew_share = 0.7;     // share of failures carried by them
  double temporal_cluster_prob = 0.3;
  double rack_affinity = 0.7;
  double crash_share = 0.45;
  double hang_share = 0.45;
  double no_reboot_share = 0.10;
  double precursor_prob = 0.85;
  bool heartbeats = true;
  std::size_t storms = 30;
  std::size_t benign_reboots = 4;
  std::size_t interruptions = 6;
  std::size_t maintenance_windows = 2;
  std::size_t jobs = 600;
  std::size_t common_templates = 40;
  std::size_t rare_templates = 460;
  double rare_share = 0.05;
  double extra_outage_db_prob = 0.3;

  /// 64 nodes (Taurus scaled by 1/32), 7 days, 40 failures.
  static GeneratorSpec desk_default() {
    GeneratorSpec s;
    s.topology = scale_topology(taurus_topology(), 1.0 / 32.0);
    return s;
  }

  ObservationRange range() const { return ObservationRange(start, start + duration); }

  void validate() const {
    auto prob = [](double p, const char* what) {
      if (!(p >= 0.0 && p <= 1.0)) throw Error(std::string("probability out of range: ") + what);
    };
    prob(failure_skew, "failure_skew");
    prob(skew_share, "skew_share");
    prob(temporal_cluster_prob, "temporal_cluster_prob");
    prob(rack_affinity, "rack_affinity");
    prob(precursor_prob, "precursor_prob");
    prob(rare_share, "rare_share");
    prob(extra_outage_db_prob, "extra_outage_db_prob");
    prob(crash_share, "crash_share");
    prob(hang_share, "hang_share");
    prob(no_reboot_share, "no_reboot_share");
    if (std::fabs(crash_share + hang_share + no_reboot_share - 1.0) > 1e-9) throw Error("cause shares must sum to 1");
    if (topology.empty()) throw Error("generator topology is empty");
    if (duration < hours(12)) throw Error("generator duration must be at least 12 hours");
    for (const auto& n : topology.nodes()) {
      auto it = base_rate.find(topology.architecture_of(n));
      if (it == base_rate.end() || !(it->second > 0.0)) throw Error("base rate missing or not positive");
    }
    const double node_hours = static_cast<double>(topology.size()) * static_cast<double>(duration.count()) / 3600.0;
    if (static_cast<double>(failure_count) > node_hours) throw Error("infeasible spec: more failures than node-hours");
    if (common_templates == 0) throw Error("at least one common template is required");
  }
};

struct InjectedFailure {
  NodeId node;
  Instant outage_time;
  bool has_reboot = true;
  FailureCause cause = FailureCause::crash_panic;
  Instant silence_start;            // start of the pre-failure silence (outage_time when none)
  std::optional<Instant> boot_time; // set when has_reboot
};

enum class EventKind { failure, maintenance, benign_reboot, interruption, storm };

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::failure: return "failure";
    case EventKind::maintenance: return "maintenance";
    case EventKind::benign_reboot: return "benign_reboot";
    case EventKind::interruption: return "interruption";
    case EventKind::storm: return "storm";
  }
  return "?";
}

/// Any injected disturbance on one node, as the closed interval it affects the log.
struct InjectedEvent {
  NodeId node;
  EventKind kind = EventKind::failure;
  Instant start;
  Instant end;
};

struct InjectedBoot {
  NodeId node;
  Instant boot_time;
  EventKind reason = EventKind::failure;
};

struct GroundTruth {
  std::vector<InjectedFailure> failures;
  std::vector<MaintenanceWindow> maintenance;
  std::vector<JobRecord> jobs;
  std::vector<OutageRecord> outage_db;
  std::vector<InjectedBoot> boots;
  std::vector<InjectedEvent> events;
  /// Outage instants of maintenance shutdowns and benign reboots (not failures).
  std::vector<std::pair<NodeId, Instant>> non_failure_outages;
};

struct SyntheticCorpus {
  Topology topology;
  ObservationRange range;
  std::vector<LogEntry> entries;
  GroundTruth truth;
  std::vector<std::string> footprint;  // boot footprint messages, in order
};

inline void write_truth(std::ostream& out, const std::vector<InjectedFailure>& failures) {
  out << "node,outage_time,has_reboot,cause\n";
  for (const auto& f : failures) {
    out << f.node.name() << ',' << format_iso(f.outage_time) << ',' << (f.has_reboot ? "true" : "false") << ','
        << to_string(f.cause) << '\n';
  }
}

inline std::vector<InjectedFailure> parse_truth(std::istream& in, const std::string& source = "<truth>") {
  std::vector<InjectedFailure> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#' || (row == 1 && line.rfind("node,", 0) == 0)) continue;
    auto f = split(line, ',');
    if (f.size() != 4) throw LoadError(source, row, "expected 4 CSV fields");
    auto node = NodeId::parse(f[0]);
    auto t = parse_iso(f[1]);
    auto cause = parse_failure_cause(f[3]);
    if (!node || !t || !cause || (f[2] != "true" && f[2] != "false")) throw LoadError(source, row, "malformed truth row");
    InjectedFailure inj;
    inj.node = *node;
    inj.outage_time = *t;
    inj.has_reboot = f[2] == "true";
    inj.cause = *cause;
    inj.silence_start = *t;
    out.push_back(inj);
  }
  return out;
}

inline std::vector<InjectedFailure> load_truth(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  return parse_truth(in, path.string());
}

// ---------------------------------------------------------------------------
// Message templates
// ---------------------------------------------------------------------------

namespace synth {

/// A message pattern with placeholders: {n} decimal, {hex} 8 hex digits with a
/// letter and a digit, {ip} IPv4, {user} user name, {time} clock time,
/// {date} ISO date. Every rendering de-identifies to the same template.
struct Template {
  std::string tag;
  std::string format;
};

inline const std::vector<std::string>& user_names() {
  static const std::vector<std::string> names = {"siavash", "florina", "akiyama", "mbrandt", "jkowal", "lrossi",
                                                 "pnguyen", "tsato",   "ewagner", "okim",    "dhall",  "rgupta"};
  return names;
}

inline std::string render(std::string_view format, Rng& rng, Instant now) {
  std::string out;
  out.reserve(format.size() + 16);
  for (std::size_t i = 0; i < format.size(); ++i) {
    if (format[i] != '{') {
      out += format[i];
      continue;
    }
    const auto close = format.find('}', i);
    const auto name = format.substr(i + 1, close - i - 1);
    i = close;
    if (name == "n") {
      out += std::to_string(rng.uniform_int(1, 99999));
    } else if (name == "hex") {
      static constexpr char digits[] = "0123456789abcdef";
      std::string h(8, '0');
      for (auto& c : h) c = digits[rng.uniform_int(0, 15)];
      h[static_cast<std::size_t>(rng.uniform_int(0, 3))] = digits[rng.uniform_int(10, 15)];
      h[static_cast<std::size_t>(rng.uniform_int(4, 7))] = digits[rng.uniform_int(0, 9)];
      out += h;
    } else if (name == "ip") {
      out += "10." + std::to_string(rng.uniform_int(1, 254)) + "." + std::to_string(rng.uniform_int(1, 254)) + "." +
             std::to_string(rng.uniform_int(1, 254));
    } else if (name == "user") {
      out += rng.pick(user_names());
    } else if (name == "time") {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", rng.uniform_int(0, 23), rng.uniform_int(0, 59),
                    rng.uniform_int(0, 59));
      out += buf;
    } else if (name == "date") {
      out += format_iso(now).substr(0, 10);
    } else {
      out += '{';
      out += name;
      out += '}';
    }
  }
  return out;
}

inline const std::vector<Template>& common_templates() {
  static const std::vector<Template> t = {
      {"sshd", "Accepted publickey for user {user} from {ip} port {n} ssh2"},
      {"sshd", "pam_unix(sshd:session): session opened for user {user} by (uid={n})"},
      {"sshd", "pam_unix(sshd:session): session closed for user {user}"},
      {"sshd", "Received disconnect from {ip} port {n}: disconnected by user"},
      {"systemd", "Started Session {n} of user {user}."},
      {"systemd", "Removed slice of user {user}."},
      {"systemd", "Starting Cleanup of Temporary Directories..."},
      {"systemd-logind", "New session {n} of user {user}."},
      {"systemd-logind", "Removed session {n}."},
      {"slurmd", "launch task {n}.{n} request from uid {n} at {ip}"},
      {"slurmd", "_run_prolog: run job script took usec={n}"},
      {"slurmd", "_run_prolog: prolog with lock for job {n} ran for {n} seconds"},
      {"slurmd", "error: Munge decode failed: Expired credential"},
      {"slurmd", "Warning: Note very large processing time from _rpc_terminate_job: usecs={n} began={time}"},
      {"slurmstepd", "done with job"},
      {"slurmstepd", "task {n} ({n}) exited with exit code {n}."},
      {"kernel", "nfs: server fs{n} OK"},
      {"kernel", "nfs: server fs{n} not responding, still trying"},
      {"kernel", "perf: interrupt took too long ({n} > {n}), lowering kernel.perf_event_max_sample_rate to {n}"},
      {"kernel", "TCP: request_sock_TCP: Possible SYN flooding on port {n}. Sending cookies."},
      {"kernel", "CPU{n}: Core temperature above threshold, cpu clock throttled (total events = {n})"},
      {"kernel", "CPU{n}: Core temperature/speed normal"},
      {"kernel", "mlx4_core 0000:{n}:00.0: command 0x{hex} timed out"},
      {"kernel", "EXT4-fs (sda{n}): mounted filesystem with ordered data mode. Opts: (null)"},
      {"kernel", "LustreError: {n}:0:(ldlm_request.c) ldlm_cli_enqueue: -{n}"},
      {"kernel", "device-mapper: uevent: version 1.0.3"},
      {"ntpd", "adjusting local clock by {n}.{n}s"},
      {"ntpd", "synchronized to {ip}, stratum {n}"},
      {"chronyd", "Selected source {ip}"},
      {"rsyslogd", "imjournal: {n} messages lost due to rate-limiting"},
      {"anacron", "Anacron started on {date}"},
      {"anacron", "Jobs will be executed sequentially"},
      {"anacron", "Normal exit ({n} jobs run)"},
      {"run-parts(/etc/cron.hourly)", "starting 0anacron"},
      {"run-parts(/etc/cron.hourly)", "finished 0anacron"},
      {"dbus", "[system] Successfully activated service 'org.freedesktop.problems'"},
      {"postfix/pickup", "{hex}: uid={n} from=<root>"},
      {"smartd", "Device: /dev/sda [SAT], SMART Usage Attribute: 194 Temperature_Celsius changed from {n} to {n}"},
      {"auditd", "Audit daemon rotating log files"},
      {"kernel", "ib0: received packet with bad checksum from {ip}"},
      {"slurmd", "debug: Waiting for job {n}'s prolog to complete"},
      {"systemd", "Started Process Core Dump (PID {n}/UID {n})."},
  };
  return t;
}

/// Procedurally named rare messages; distinct word triples give distinct templates.
inline std::vector<Template> rare_templates(std::size_t count, Rng& rng) {
  static const std::vector<std::string> subjects = {"firmware", "scheduler", "daemon",  "controller", "adapter",
                                                    "fabric",   "mount",     "journal", "watchdog",   "sensor",
                                                    "quota",    "resolver",  "spooler", "collector"};
  static const std::vector<std::string> verbs = {"reported", "rejected", "deferred", "recovered", "skipped",
                                                 "flushed",  "retried",  "dropped",  "throttled", "resumed"};
  static const std::vector<std::string> objects = {"request",   "handle",  "lease",   "probe",    "session",
                                                   "transfer",  "update",  "lookup",  "snapshot", "heartbeat",
                                                   "interrupt", "channel", "mapping", "token"};
  static const std::vector<std::string> tags = {"kernel", "systemd", "slurmd", "lustre", "smartd", "ipmid", "nhc"};
  static const std::vector<std::string> suffixes = {"", " ({n})", " at 0x{hex}", " after {n} ms", " from {ip}"};
  std::vector<Template> all;
  for (const auto& s : subjects) {
    for (const auto& v : verbs) {
      for (const auto& o : objects) all.push_back({"", s + " " + v + " " + o});
    }
  }
  rng.shuffle(all);
  if (count < all.size()) all.resize(count);
  for (auto& t : all) {
    t.tag = rng.pick(tags);
    t.format += rng.pick(suffixes);
  }
  return all;
}

inline const std::vector<Template>& boot_storm_templates() {
  static const std::vector<Template> t = {
      {"kernel", "e820: BIOS-provided physical RAM map:"},
      {"kernel", "ACPI: Core revision {n}"},
      {"kernel", "PCI: Using configuration type {n} for base access"},
      {"kernel", "NUMA: Initialized distance table, cnt={n}"},
      {"kernel", "Memory: {n}k/{n}k available"},
      {"kernel", "smpboot: Booting Node {n} Processor {n}"},
      {"kernel", "clocksource: Switched to clocksource tsc"},
      {"kernel", "NET: Registered protocol family {n}"},
      {"kernel", "Freeing unused kernel memory: {n}k freed"},
      {"kernel", "mlx4_en: ib0: Link Up"},
      {"systemd", "Mounted Huge Pages File System."},
      {"systemd", "Reached target Local File Systems."},
      {"systemd", "Started udev Kernel Device Manager."},
      {"systemd", "Starting Network Manager..."},
      {"systemd", "Started Network Manager."},
      {"systemd", "Reached target Network."},
      {"systemd", "Started OpenSSH server daemon."},
      {"systemd", "Started Slurm node daemon."},
      {"systemd", "Started NTP client/server."},
      {"systemd", "Mounting /home via NFS..."},
  };
  return t;
}

inline constexpr std::string_view kFootprintKernel = "Linux version 3.10.0-514.el7.x86_64 (mockbuild@kbuilder) #1 SMP";
inline constexpr std::string_view kFootprintInit = "Initializing machine ID from random generator.";
inline constexpr std::string_view kFootprintStartup =
    "Startup finished in {n}ms (kernel) + {n}ms (initrd) + {n}ms (userspace) = {n}ms.";
inline constexpr std::string_view kHeartbeat = "(root) CMD (/usr/lib64/sa/sa1 1 1)";
inline constexpr std::string_view kHealthCheck = "Node Health Check completed successfully ({n}s).";
inline constexpr std::string_view kStorm = "ib0: multicast join failed for ff12:401b:ffff::1, status -22";
inline constexpr std::string_view kPanic = "Kernel panic - not syncing: Fatal Exception";
inline constexpr std::string_view kHang = "INFO: task jbd2/sda1-8:{n} blocked for more than 120 seconds.";
inline constexpr std::string_view kEdac = "EDAC MC0: 1 UE memory read error on CPU_SrcID#0_Ha#0_Chan#1_DIMM#0";
inline constexpr std::string_view kWatchdog = "watchdog: watchdog0: watchdog did not stop! Initiating system reboot.";
inline constexpr std::string_view kShutdown = "System is rebooting for scheduled maintenance.";

/// Time intervals reserved per node so injected events never overlap.
class Reservations {
 public:
  bool free(NodeId n, Instant a, Instant b) const {
    auto it = busy_.find(n);
    if (it == busy_.end()) return true;
    for (const auto& [s, e] : it->second) {
      if (a < e && s < b) return false;
    }
    return true;
  }
  void reserve(NodeId n, Instant a, Instant b) { busy_[n].emplace_back(a, b); }

 private:
  std::map<NodeId, std::vector<std::pair<Instant, Instant>>> busy_;
};

struct NodePlan {
  std::vector<std::pair<Instant, Instant>> mask;  // background suppressed in [a, b)
  std::vector<LogEntry> lines;                    // explicit event lines
  std::optional<Instant> dead_from;
};

}  // namespace synth

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

namespace detail {

inline void emit_boot(synth::NodePlan& plan, NodeId node, Instant boot, Rng& rng) {
  using namespace synth;
  plan.lines.push_back({boot, node, "kernel", std::string(kFootprintKernel)});
  plan.lines.push_back({boot + Duration{rng.uniform_int(2, 20)}, node, "systemd", std::string(kFootprintInit)});
  plan.lines.push_back(
      {boot + Duration{rng.uniform_int(30, 90)}, node, "systemd", render(kFootprintStartup, rng, boot)});
  const auto storm = rng.uniform_int(120, 200);
  const auto& tpl = boot_storm_templates();
  for (long long k = 0; k < storm; ++k) {
    const auto& t = rng.pick(tpl);
    plan.lines.push_back({boot + Duration{rng.uniform_int(0, 179)}, node, t.tag, render(t.format, rng, boot)});
  }
}

}  // namespace detail

/// Generates a corpus with ground truth. Deterministic for a given spec.
/// Boot footprint of generated nodes, as concrete messages.
inline std::vector<std::string> synthetic_footprint() {
  return {std::string(synth::kFootprintKernel), std::string(synth::kFootprintInit),
          "Startup finished in 2113ms (kernel) + 1810ms (initrd) + 9102ms (userspace) = 13025ms."};
}

inline SyntheticCorpus generate(const GeneratorSpec& spec) {
  using namespace synth;
  spec.validate();
  SyntheticCorpus out;
  out.topology = spec.topology;
  out.range = spec.range();
  out.footprint = synthetic_footprint();
  auto& truth = out.truth;
  const Instant t0 = out.range.start;
  const Instant t1 = out.range.end;
  const auto& nodes = spec.topology.nodes();
  Rng rng(Rng::mix(spec.seed));
  Reservations busy;
  std::map<NodeId, NodePlan> plans;
  const Duration margin = minutes(30);

  auto random_instant = [&](Instant lo, Instant hi) {
    return lo + Duration{rng.uniform_int(0, std::max<long long>(0, (hi - lo).count()))};
  };

  // Maintenance: one system-wide window, then island windows.
  for (std::size_t w = 0; w < spec.maintenance_windows; ++w) {
    const bool system = w == 0;
    const Duration len = system ? minutes(rng.uniform_int(240, 360)) : minutes(rng.uniform_int(120, 240));
    std::optional<Instant> start;
    for (int attempt = 0; attempt < 200 && !start; ++attempt) {
      const Instant s = random_instant(t0 + hours(6), t1 - hours(8) - len);
      bool clash = false;
      for (const auto& m : truth.maintenance) clash = clash || (s < m.end + hours(6) && m.start < s + len + hours(6));
      if (!clash) start = s;
    }
    if (!start) throw Error("cannot place maintenance windows in the observation range");
    Scope scope = EntireSystem{};
    if (!system) scope = IslandScope{rng.pick(nodes).island};
    truth.maintenance.push_back({*start, *start + len, scope, system ? "system update" : "island service"});
  }
  auto maintenance_near = [&](NodeId n, Instant a, Instant b, Duration pad) {
    for (const auto& m : truth.maintenance) {
      if (scope_covers(m.scope, n) && a < m.end + pad && m.start - pad < b) return true;
    }
    return false;
  };

  // Failure slots: a few failure-prone nodes carry skew_share of all failures.
  std::vector<NodeId> shuffled = nodes;
  rng.shuffle(shuffled);
  const std::size_t count = spec.failure_count;
  std::size_t cold = static_cast<std::size_t>(std::llround((1.0 - spec.skew_share) * static_cast<double>(count)));
  std::size_t hot = cold == 0 ? 1
                              : static_cast<std::size_t>(std::llround(spec.failure_skew * static_cast<double>(cold) /
                                                                      std::max(1e-9, 1.0 - spec.failure_skew)));
  hot = std::max<std::size_t>(1, hot);
  if (count == 0) cold = hot = 0;
  if (hot + cold > nodes.size()) {
    cold = nodes.size() > hot ? nodes.size() - hot : 0;
    hot = std::min(hot, nodes.size());
  }
  std::vector<NodeId> slots;
  for (std::size_t i = 0; i < cold; ++i) slots.push_back(shuffled[hot + i]);
  for (std::size_t i = 0; slots.size() < count; ++i) slots.push_back(shuffled[i % hot]);
  std::map<NodeId, std::size_t> failures_per_node;
  for (const auto& n : slots) ++failures_per_node[n];

  // Causes: no_reboot only for nodes with a single failure (the node stays down).
  const auto n_no_reboot = static_cast<std::size_t>(std::llround(spec.no_reboot_share * static_cast<double>(count)));
  std::vector<FailureCause> causes(slots.size(), FailureCause::crash_panic);
  std::vector<std::size_t> single;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (failures_per_node[slots[i]] == 1) single.push_back(i);
  }
  rng.shuffle(single);
  std::set<std::size_t> dead_slots(single.begin(), single.begin() + static_cast<std::ptrdiff_t>(std::min(n_no_reboot, single.size())));
  const double crash_p = spec.crash_share / std::max(1e-9, spec.crash_share + spec.hang_share);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    causes[i] = dead_slots.count(i) != 0 ? FailureCause::no_reboot
                : rng.bernoulli(crash_p)  ? FailureCause::crash_panic
                                          : FailureCause::silent_hang;
  }

  // Placement, with temporal companions.
  struct Placed {
    std::size_t slot;
    InjectedFailure f;
  };
  std::vector<Placed> placed;
  auto try_place = [&](std::size_t slot, Instant t) -> bool {
    const NodeId n = slots[slot];
    const bool reboot = causes[slot] != FailureCause::no_reboot;
    const bool precursor = rng.bernoulli(spec.precursor_prob);
    const Duration silence = precursor ? minutes(rng.uniform_int(40, 55)) : Duration::zero();
    const Duration down = minutes(rng.uniform_int(45, 120));
    const Instant a = t - silence - minutes(15);
    const Instant b = reboot ? t + down + minutes(15) : t1 + days(1);
    if (t < t0 + hours(2) || (reboot ? t + down > t1 - hours(2) : t > t1 - hours(3))) return false;
    if (!busy.free(n, a - margin, b + margin) || maintenance_near(n, a, b, hours(2))) return false;
    InjectedFailure f;
    f.node = n;
    f.outage_time = t;
    f.has_reboot = reboot;
    f.cause = causes[slot];
    f.silence_start = t - silence;
    if (reboot) f.boot_time = t + down;
    busy.reserve(n, a, b);
    placed.push_back({slot, f});
    return true;
  };
  std::vector<std::size_t> order(slots.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<bool> done(slots.size(), false);
  for (auto s : order) {
    if (done[s]) continue;
    bool ok = false;
    for (int attempt = 0; attempt < 5000 && !ok; ++attempt) ok = try_place(s, random_instant(t0 + hours(2), t1 - hours(3)));
    if (!ok) throw Error("infeasible spec: cannot place failure on " + slots[s].name());
    done[s] = true;
    if (!rng.bernoulli(spec.temporal_cluster_prob)) continue;
    const Instant anchor = placed.back().f.outage_time;
    const NodeId anchor_node = slots[s];
    std::vector<std::size_t> same_rack, other;
    for (auto c : order) {
      if (done[c] || slots[c] == anchor_node) continue;
      (Topology::rack_of(slots[c]) == Topology::rack_of(anchor_node) ? same_rack : other).push_back(c);
    }
    std::vector<std::size_t> candidates;
    if (rng.bernoulli(spec.rack_affinity)) {
      candidates = same_rack;
      candidates.insert(candidates.end(), other.begin(), other.end());
    } else {
      candidates = other;
      candidates.insert(candidates.end(), same_rack.begin(), same_rack.end());
    }
    for (auto c : candidates) {
      if (try_place(c, anchor + minutes(rng.uniform_int(1, 9)))) {
        done[c] = true;
        break;
      }
    }
  }
  std::sort(placed.begin(), placed.end(), [](const Placed& a, const Placed& b) {
    if (a.f.outage_time != b.f.outage_time) return a.f.outage_time < b.f.outage_time;
    return a.f.node < b.f.node;
  });
  for (const auto& p : placed) truth.failures.push_back(p.f);

  auto near_failure = [&](Instant a, Instant b, Duration pad) {
    for (const auto& f : truth.failures) {
      const Instant end = f.boot_time ? *f.boot_time : f.outage_time;
      if (a < end + pad && f.silence_start - pad < b) return true;
    }
    return false;
  };
  auto dead_at = [&](NodeId n, Instant t) {
    for (const auto& f : truth.failures) {
      if (f.node == n && !f.has_reboot && f.outage_time <= t) return true;
    }
    return false;
  };

  // Benign reboots, interruptions and storms on random nodes.
  struct Simple {
    EventKind kind;
    NodeId node;
    Instant a;
    Instant b;
  };
  std::vector<Simple> simple;
  auto place_simple = [&](EventKind kind, std::size_t n_events, Duration lo, Duration hi) {
    for (std::size_t k = 0; k < n_events; ++k) {
      bool ok = false;
      for (int attempt = 0; attempt < 5000 && !ok; ++attempt) {
        const NodeId n = rng.pick(nodes);
        const Duration len = rng.seconds_between(lo, hi);
        const Instant a = random_instant(t0 + hours(2), t1 - hours(3));
        const Instant b = a + len;
        if (dead_at(n, b) || !busy.free(n, a - margin, b + margin) || maintenance_near(n, a, b, hours(1))) continue;
        if (kind == EventKind::benign_reboot && near_failure(a, b, hours(1))) continue;
        busy.reserve(n, a, b);
        simple.push_back({kind, n, a, b});
        ok = true;
      }
      if (!ok) throw Error("cannot place injected " + std::string(to_string(kind)) + " events");
    }
  };
  place_simple(EventKind::benign_reboot, spec.benign_reboots, minutes(3), minutes(10));
  place_simple(EventKind::interruption, spec.interruptions, minutes(35), minutes(60));
  place_simple(EventKind::storm, spec.storms, minutes(10), minutes(20));

  // Per-node event lines and background masks.
  for (const auto& f : truth.failures) {
    auto& plan = plans[f.node];
    const Instant mask_end = f.boot_time ? *f.boot_time : t1 + days(1);
    plan.mask.emplace_back(f.silence_start, mask_end);
    std::string_view last = f.cause == FailureCause::crash_panic   ? kPanic
                            : f.cause == FailureCause::silent_hang ? kHang
                                                                   : kEdac;
    plan.lines.push_back({f.outage_time, f.node, "kernel", render(last, rng, f.outage_time)});
    if (f.boot_time) {
      detail::emit_boot(plan, f.node, *f.boot_time, rng);
      truth.boots.push_back({f.node, *f.boot_time, EventKind::failure});
      truth.events.push_back({f.node, EventKind::failure, f.silence_start, *f.boot_time + minutes(3)});
    } else {
      plan.dead_from = f.outage_time;
      truth.events.push_back({f.node, EventKind::failure, f.silence_start, t1});
    }
  }
  for (const auto& m : truth.maintenance) {
    const Instant shutdown_base = m.start;
    for (const auto& n : nodes) {
      if (!scope_covers(m.scope, n) || dead_at(n, m.start)) continue;
      auto& plan = plans[n];
      const Instant shutdown = shutdown_base + Duration{rng.uniform_int(60, 600)};
      const Instant boot = m.end - Duration{rng.uniform_int(20 * 60, 60 * 60)};
      plan.mask.emplace_back(shutdown, boot);
      plan.lines.push_back({shutdown, n, "systemd", std::string(kShutdown)});
      detail::emit_boot(plan, n, boot, rng);
      truth.boots.push_back({n, boot, EventKind::maintenance});
      truth.non_failure_outages.emplace_back(n, shutdown);
      truth.events.push_back({n, EventKind::maintenance, m.start, m.end});
    }
  }
  for (const auto& e : simple) {
    auto& plan = plans[e.node];
    switch (e.kind) {
      case EventKind::benign_reboot:
        plan.mask.emplace_back(e.a, e.b);
        plan.lines.push_back({e.a, e.node, "kernel", std::string(kWatchdog)});
        detail::emit_boot(plan, e.node, e.b, rng);
        truth.boots.push_back({e.node, e.b, EventKind::benign_reboot});
        truth.non_failure_outages.emplace_back(e.node, e.a);
        truth.events.push_back({e.node, e.kind, e.a, e.b + minutes(3)});
        break;
      case EventKind::interruption:
        plan.mask.emplace_back(e.a, e.b);
        truth.events.push_back({e.node, e.kind, e.a, e.b});
        break;
      case EventKind::storm:
        for (Instant t = e.a; t < e.b; t += Duration{1}) plan.lines.push_back({t, e.node, "kernel", std::string(kStorm)});
        truth.events.push_back({e.node, e.kind, e.a, e.b});
        break;
      default:
        break;
    }
  }

  // Jobs.
  std::map<Architecture, std::vector<NodeId>> by_arch;
  for (const auto& n : nodes) by_arch[spec.topology.architecture_of(n)].push_back(n);
  for (std::size_t j = 0; j < spec.jobs; ++j) {
    const NodeId seed_node = rng.pick(nodes);
    auto pool = by_arch[spec.topology.architecture_of(seed_node)];
    rng.shuffle(pool);
    const auto width = static_cast<std::size_t>(rng.uniform_int(1, 8));
    JobRecord job;
    job.job_id = std::to_string(100000 + j);
    job.nodes.insert(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(std::min(width, pool.size())));
    job.start = random_instant(t0 - hours(12), t1 - minutes(10));
    const double secs = std::clamp(rng.exponential(1.0 / 7200.0), 600.0, 86400.0);
    job.end = job.start + Duration{static_cast<long long>(secs)};
    const double u = rng.uniform();
    job.status = u < 0.85 ? JobStatus::completed
                 : u < 0.93 ? JobStatus::failed
                 : u < 0.97 ? JobStatus::cancelled
                            : JobStatus::timeout;
    // Jobs never run into a maintenance window on any of their nodes.
    bool drop = false;
    for (const auto& m : truth.maintenance) {
      bool covered = false;
      for (const auto& n : job.nodes) covered = covered || scope_covers(m.scope, n);
      if (!covered || !(job.start < m.end && m.start < job.end)) continue;
      if (job.start >= m.start - hours(1)) {
        drop = true;
      } else {
        job.end = m.start - hours(1);
        if (job.end < job.start + minutes(10)) drop = true;
      }
    }
    if (!drop) truth.jobs.push_back(std::move(job));
  }
  // Failures end the jobs running on the node; jobs starting while it is down lose it.
  std::vector<bool> has_job_evidence(truth.failures.size(), false);
  for (std::size_t k = 0; k < truth.failures.size(); ++k) {
    const auto& f = truth.failures[k];
    const Instant down_until = f.boot_time ? *f.boot_time : t1 + days(365);
    for (auto& job : truth.jobs) {
      if (!job.runs_on(f.node)) continue;
      if (job.active_at(f.outage_time)) {
        job.end = f.outage_time + Duration{rng.uniform_int(0, 300)};
        job.status = JobStatus::node_fail;
        has_job_evidence[k] = true;
      } else if (job.start > f.outage_time && job.start < down_until) {
        job.nodes.erase(f.node);
      }
    }
  }
  truth.jobs.erase(std::remove_if(truth.jobs.begin(), truth.jobs.end(), [](const JobRecord& j) { return j.nodes.empty(); }),
                   truth.jobs.end());
  // Recompute evidence after removals, then keep failed jobs away from non-failure outages.
  for (std::size_t k = 0; k < truth.failures.size(); ++k) {
    const auto& f = truth.failures[k];
    has_job_evidence[k] = false;
    for (const auto& job : truth.jobs) {
      if (job.runs_on(f.node) && job.status == JobStatus::node_fail && job.end >= f.outage_time &&
          job.end - f.outage_time <= minutes(10)) {
        has_job_evidence[k] = true;
      }
    }
  }
  for (const auto& [n, t] : truth.non_failure_outages) {
    for (auto& job : truth.jobs) {
      if (!job.runs_on(n) || (job.status != JobStatus::failed && job.status != JobStatus::node_fail)) continue;
      const auto d = job.end - t;
      if ((d < Duration::zero() ? -d : d) <= minutes(15)) job.status = JobStatus::cancelled;
    }
  }
  // Outage database: failures without job evidence, and some with.
  for (std::size_t k = 0; k < truth.failures.size(); ++k) {
    const auto& f = truth.failures[k];
    const bool extra = rng.bernoulli(spec.extra_outage_db_prob);
    if (has_job_evidence[k] && !extra) continue;
    const Instant end = f.boot_time ? *f.boot_time : f.outage_time + hours(2);
    truth.outage_db.push_back({f.outage_time, end, f.node, "node unreachable"});
  }

  // Background streams and assembly.
  Rng template_rng(Rng::mix(spec.seed ^ 0x5eedULL));
  std::vector<Template> commons(common_templates().begin(),
                                common_templates().begin() +
                                    static_cast<std::ptrdiff_t>(std::min(spec.common_templates, common_templates().size())));
  std::vector<double> weights;
  for (std::size_t i = 0; i < commons.size(); ++i) weights.push_back(template_rng.uniform(0.5, 1.5));
  std::vector<double> cumulative(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
  const auto rares = rare_templates(spec.rare_templates, template_rng);

  std::vector<std::vector<LogEntry>> per_node(nodes.size());
  for (std::size_t ni = 0; ni < nodes.size(); ++ni) {
    const NodeId n = nodes[ni];
    Rng nrng(Rng::mix(spec.seed * 1000003ULL + ni + 1));
    auto& plan = plans[n];
    auto masked = [&](Instant t) {
      if (plan.dead_from && t >= *plan.dead_from) return true;
      for (const auto& [a, b] : plan.mask) {
        if (a <= t && t < b) return true;
      }
      return false;
    };
    auto& lines = per_node[ni];
    const double rate = spec.base_rate.at(spec.topology.architecture_of(n)) / 3600.0;
    double clock = static_cast<double>(t0.time_since_epoch().count());
    const double stop = static_cast<double>(t1.time_since_epoch().count());
    for (;;) {
      clock += nrng.exponential(rate);
      if (clock >= stop) break;
      const Instant t{Duration{static_cast<long long>(clock)}};
      const Template* tpl = nullptr;
      if (!rares.empty() && nrng.bernoulli(spec.rare_share)) {
        tpl = &nrng.pick(rares);
      } else {
        const double u = nrng.uniform() * cumulative.back();
        tpl = &commons[static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                                cumulative.begin())];
      }
      if (masked(t)) continue;
      lines.push_back({t, n, tpl->tag, render(tpl->format, nrng, t)});
    }
    if (spec.heartbeats) {
      for (Instant t = t0 + Duration{nrng.uniform_int(0, 299)}; t < t1; t += Duration{300}) {
        const Instant jittered = t + Duration{nrng.uniform_int(-2, 2)};
        if (jittered < t0 || jittered >= t1 || masked(jittered)) continue;
        lines.push_back({jittered, n, "CROND", std::string(kHeartbeat)});
      }
      for (Instant t = t0 + Duration{nrng.uniform_int(0, 3599)}; t < t1; t += hours(1)) {
        if (masked(t)) continue;
        lines.push_back({t, n, "nhc", render(kHealthCheck, nrng, t)});
      }
    }
    for (auto& l : plan.lines) {
      if (l.timestamp >= t0 && l.timestamp < t1) lines.push_back(std::move(l));
    }
    std::stable_sort(lines.begin(), lines.end(), [](const LogEntry& a, const LogEntry& b) { return a.timestamp < b.timestamp; });
  }
  std::size_t total = 0;
  for (const auto& v : per_node) total += v.size();
  out.entries.reserve(total);
  for (auto& v : per_node) {
    for (auto& e : v) out.entries.push_back(std::move(e));
  }
  std::stable_sort(out.entries.begin(), out.entries.end(),
                   [](const LogEntry& a, const LogEntry& b) { return a.timestamp < b.timestamp; });
  std::sort(truth.boots.begin(), truth.boots.end(), [](const InjectedBoot& a, const InjectedBoot& b) {
    return std::tie(a.node, a.boot_time) < std::tie(b.node, b.boot_time);
  });
  return out;
}

/// Writes the corpus and its auxiliary files into `dir`.
inline void write_synthetic(const std::filesystem::path& dir, const SyntheticCorpus& c) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "syslog.log", [&](std::ostream& o) { write_syslog(o, c.entries); });
  write_file_atomic(dir / "topology.tsv", [&](std::ostream& o) { write_topology(o, c.topology); });
  write_file_atomic(dir / "jobs.csv", [&](std::ostream& o) { write_job_report(o, c.truth.jobs); });
  write_file_atomic(dir / "outages.db", [&](std::ostream& o) { write_outage_db(o, c.truth.outage_db); });
  write_file_atomic(dir / "maintenance.txt", [&](std::ostream& o) { write_maintenance(o, c.truth.maintenance); });
  write_file_atomic(dir / "truth.csv", [&](std::ostream& o) { write_truth(o, c.truth.failures); });
  write_file_atomic(dir / "footprint.txt", [&](std::ostream& o) {
    for (const auto& f : c.footprint) o << f << '\n';
  });
}

}  // namespace sgscan
