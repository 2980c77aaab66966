// Command-line front end for the sgscan library.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "sgscan/sgscan.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace sgscan;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

std::vector<std::string> g_argv;
std::string g_manifest;  // explicit --manifest path, overrides the default location

const CLI::App* root_app(const CLI::App& app) {
  const CLI::App* a = &app;
  while (a->get_parent() != nullptr) a = a->get_parent();
  return a;
}

// ----------------------------------------------------------------------------
// Helpers
// ----------------------------------------------------------------------------

Duration require_duration(const std::string& text, const char* what, bool allow_zero = false) {
  auto d = parse_duration(text);
  if (!d || *d < Duration::zero() || (!allow_zero && *d == Duration::zero())) {
    throw CLI::ValidationError(what, "expected a positive duration such as 30m or 1h");
  }
  return *d;
}

/// Effective configuration of `command` in --config syntax. Unset string
/// options are left out so the file loads back cleanly.
std::string effective_config(const CLI::App& root, const std::string& command) {
  std::istringstream in(root.config_to_str(true, false));
  std::string out, line;
  while (std::getline(in, line)) {
    if (ends_with(line, "=\"\"") || line.rfind("config=", 0) == 0) continue;
    const auto eq = line.find('=');
    const auto dot = line.find('.');
    if (dot < eq && line.rfind(command + ".", 0) != 0) continue;
    out += line + '\n';
  }
  return out;
}

Instant require_instant(const std::string& text, const char* what) {
  auto t = parse_iso(text);
  if (!t) throw CLI::ValidationError(what, "expected an ISO-8601 UTC instant");
  return *t;
}

void emit(const std::string& path, const std::function<void(std::ostream&)>& body) {
  if (path.empty() || path == "-") {
    body(std::cout);
    std::cout.flush();
  } else {
    write_file_atomic(path, body);
  }
}

void write_manifest(fs::path path, const std::string& command, const CLI::App& app, json extra = json::object()) {
  if (!g_manifest.empty()) path = g_manifest;
  if (path.empty()) return;
  json m;
  m["tool"] = "sgscan";
  m["version"] = kVersion;
  m["command"] = command;
  m["argv"] = g_argv;
  m["config"] = effective_config(*root_app(app), command);
  for (auto& [k, v] : extra.items()) m[k] = v;
  write_file_atomic(path, [&](std::ostream& o) { o << m.dump(2) << '\n'; });
}

/// Manifest beside `out`, or at --manifest; stdout-only runs without
/// --manifest write none.
void manifest_next_to(const std::string& out, const std::string& command, const CLI::App& app, json extra = json::object()) {
  const bool to_stdout = out.empty() || out == "-";
  write_manifest(to_stdout ? fs::path{} : fs::path(out + ".manifest.json"), command, app, std::move(extra));
}

SubstitutionRuleSet rules_from(const std::string& path) {
  return path.empty() ? SubstitutionRuleSet::defaults() : load_rules(path);
}

bool is_anonymized_file(const fs::path& path) {
  LineReader reader(path);
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    return line.rfind("#pars-lite v", 0) == 0;
  }
  return false;
}

/// A corpus loaded from either a syslog file or an anonymized file.
struct LoadedCorpus {
  std::vector<LogEntry> raw;
  std::optional<AnonymizedCorpus> anonymized;
  IngestStats stats;

  bool empty() const { return anonymized ? anonymized->entries.empty() : raw.empty(); }
  Instant first() const { return anonymized ? anonymized->entries.front().timestamp : raw.front().timestamp; }
  Instant last() const { return anonymized ? anonymized->entries.back().timestamp : raw.back().timestamp; }

  CorpusIndex index(const SubstitutionRuleSet& rules) const {
    return anonymized ? CorpusIndex::from_anonymized(anonymized->entries) : CorpusIndex::from_raw(raw, rules);
  }
};

LoadedCorpus load_corpus(const fs::path& path, const Topology& topo, int year) {
  LoadedCorpus c;
  if (is_anonymized_file(path)) {
    c.anonymized = read_anonymized(path);
    return c;
  }
  NodeResolver resolver(topo);
  SyslogStreamParser::Options opts;
  opts.default_year = year;
  auto s = read_syslog(path, resolver, opts);
  c.raw = std::move(s.entries);
  c.stats = s.stats;
  return c;
}

/// Range from flags, or from the corpus: midnight before the first entry to one
/// second after the last.
ObservationRange range_for(const LoadedCorpus& c, const std::string& start, const std::string& end) {
  std::optional<Instant> s, e;
  if (!start.empty()) s = require_instant(start, "--start");
  if (!end.empty()) e = require_instant(end, "--end");
  if ((!s || !e) && c.empty()) throw Error("cannot derive the observation range from an empty corpus");
  if (!s) s = std::chrono::floor<std::chrono::days>(c.first());
  if (!e) e = c.last() + Duration{1};
  if (!(*s < *e)) throw Error("observation range start must precede its end");
  return ObservationRange(*s, *e);
}

json report_json(const EvaluationReport& r) {
  return json{{"variant", std::string(to_string(r.variant))},
              {"true_positives", r.true_positives},
              {"false_positives", r.false_positives},
              {"false_negatives", r.false_negatives},
              {"precision", r.precision},
              {"recall", r.recall},
              {"match_tolerance_s", r.match_tolerance.count()},
              {"no_detections", r.no_detections}};
}

void write_reports(std::ostream& o, const std::vector<EvaluationReport>& reports, const std::string& format) {
  if (format == "csv") {
    write_reports_csv(o, reports);
  } else if (format == "json") {
    json arr = json::array();
    for (const auto& r : reports) arr.push_back(report_json(r));
    o << arr.dump(2) << '\n';
  } else {
    write_reports_table(o, reports);
  }
}

std::vector<Detection> load_detections(const fs::path& path) {
  // Accepts `node,instant` CSV (detections) or `node,outage_time,...` (truth, classification).
  std::istringstream in(read_text_file(path));
  std::vector<Detection> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty() || line[0] == '#' || line.rfind("node,", 0) == 0) continue;
    auto f = split(line, ',');
    if (f.size() < 2) throw LoadError(path.string(), row, "expected node,instant");
    auto node = NodeId::parse(f[0]);
    auto t = parse_iso(f[1]);
    if (!node || !t) throw LoadError(path.string(), row, "malformed detection row");
    // Classification files carry a label; only regular failures count.
    if (f.size() >= 3 && parse_failure_label(f[2]) && f[2] != "regular_failure") continue;
    out.push_back({*node, *t});
  }
  return out;
}

std::vector<FailureEvent> load_classification(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<FailureEvent> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty() || line.rfind("node,", 0) == 0) continue;
    auto f = split(line, ',');
    if (f.size() != 4) throw LoadError(path.string(), row, "expected node,outage_time,label,evidence");
    auto node = NodeId::parse(f[0]);
    auto t = parse_iso(f[1]);
    auto label = parse_failure_label(f[2]);
    if (!node || !t || !label) throw LoadError(path.string(), row, "malformed classification row");
    FailureEvent e;
    e.outage = OutageEvent{*node, *t, std::nullopt, false};
    e.label = *label;
    out.push_back(e);
  }
  return out;
}

BootFootprintSpec default_footprint() {
  return BootFootprintSpec::from_messages(synthetic_footprint());
}

// ----------------------------------------------------------------------------
// Shared option groups
// ----------------------------------------------------------------------------

struct DetectFlags {
  std::string window = "30m";
  std::string cadence = "10m";
  double alpha = ThresholdOptions{}.alpha;
  double tau_min = ThresholdOptions{}.tau_min;
  std::string vicinity = "combined";
  double percentile = 99.5;
  std::size_t bridge = ExtractionOptions{}.bridge;
  std::size_t min_run = ExtractionOptions{}.min_abnormal_run;

  void add(CLI::App* app) {
    app->add_option("--window", window, "SG window")->capture_default_str();
    app->add_option("--cadence", cadence, "Observation cadence")->capture_default_str();
    app->add_option("--alpha", alpha, "Threshold multiplier")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--tau-min", tau_min, "Threshold floor")->capture_default_str()->check(CLI::NonNegativeNumber);
    app->add_option("--vicinity", vicinity, "hardware|location|combined|allocation|time_of_failure")
        ->capture_default_str()
        ->check(CLI::IsMember({"hardware", "location", "combined", "allocation", "time_of_failure"}));
    app->add_option("--percentile", percentile, "Frequent-entry percentile")->capture_default_str()->check(CLI::Range(0.0, 100.0));
    app->add_option("--bridge", bridge, "Unflagged moments bridged inside a run")->capture_default_str();
    app->add_option("--min-run", min_run, "Flagged moments needed for a run without silence")->capture_default_str();
  }

  void apply(PipelineConfig& cfg) const {
    cfg.detection.window = require_duration(window, "--window");
    cfg.detection.cadence = require_duration(cadence, "--cadence");
    cfg.detection.threshold.alpha = alpha;
    cfg.detection.threshold.tau_min = tau_min;
    cfg.vicinity = *parse_perspective(vicinity);
    cfg.percentile = percentile;
    cfg.extraction.bridge = bridge;
    cfg.extraction.min_abnormal_run = min_run;
  }
};

struct SourceFlags {
  std::string corpus, topology, job_report, maintenance, outage_db, footprint, rules, start, end;
  int year = 2017;

  void add(CLI::App* app, bool corpus_required) {
    auto* c = app->add_option("--corpus", corpus, "Syslog (.log/.gz) or anonymized corpus")->check(CLI::ExistingFile);
    if (corpus_required) c->required();
    app->add_option("--topology", topology, "Topology file")->check(CLI::ExistingFile);
    app->add_option("--job-report", job_report, "Job report CSV")->check(CLI::ExistingFile);
    app->add_option("--maintenance", maintenance, "Maintenance windows")->check(CLI::ExistingFile);
    app->add_option("--outage-db", outage_db, "Outage database")->check(CLI::ExistingFile);
    app->add_option("--footprint", footprint, "Boot footprint spec")->check(CLI::ExistingFile);
    app->add_option("--rules", rules, "Substitution rules")->check(CLI::ExistingFile);
    app->add_option("--start", start, "Observation start (ISO-8601)");
    app->add_option("--end", end, "Observation end (ISO-8601)");
    app->add_option("--year", year, "Year of the first syslog entries")->capture_default_str();
  }

  Topology load_topo() const {
    if (topology.empty()) throw Error("--topology is required");
    return load_topology(topology);
  }
};

// ----------------------------------------------------------------------------
// Subcommands
// ----------------------------------------------------------------------------

struct GenerateFlags {
  std::uint64_t seed = 7;
  double scale = 1.0 / 32.0;
  std::string topology;
  std::string days = "7d";
  std::size_t failures = 40;
  std::size_t job_count = 600;
  bool no_heartbeats = false;

  void add(CLI::App* app) {
    app->add_option("--seed", seed, "Random seed")->capture_default_str();
    app->add_option("--scale", scale, "Fraction of the Taurus topology")->capture_default_str()->check(CLI::Range(1e-6, 1.0));
    app->add_option("--gen-topology", topology, "Topology to generate for (overrides --scale)")->check(CLI::ExistingFile);
    app->add_option("--duration", days, "Observation span")->capture_default_str();
    app->add_option("--failures", failures, "Injected failures")->capture_default_str();
    app->add_option("--job-count", job_count, "Generated jobs")->capture_default_str();
    app->add_flag("--no-heartbeats", no_heartbeats, "Disable periodic templates");
  }

  GeneratorSpec spec() const {
    GeneratorSpec s;
    s.topology = topology.empty() ? scale_topology(taurus_topology(), scale) : load_topology(topology);
    s.seed = seed;
    s.duration = require_duration(days, "--duration");
    s.failure_count = failures;
    s.jobs = job_count;
    s.heartbeats = !no_heartbeats;
    return s;
  }
};

int run(int argc, char** argv) {
  g_argv.assign(argv, argv + argc);
  CLI::App app{"HPC node-failure detection from syslog generation frequency"};
  app.set_config("--config", "", "key=value configuration file; flags win");
  app.require_subcommand(1);
  unsigned jobs = default_jobs();
  std::string format = "table";
  app.add_option("--jobs", jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--manifest", g_manifest, "Write the run manifest here");
  app.add_option("--format", format, "Report format")->capture_default_str()->check(CLI::IsMember({"table", "csv", "json"}));
  std::function<int()> action;

  // generate
  GenerateFlags gen;
  std::string gen_out;
  auto* c_gen = app.add_subcommand("generate", "Generate a synthetic corpus with ground truth");
  gen.add(c_gen);
  c_gen->add_option("--out", gen_out, "Output directory")->required();
  c_gen->callback([&] {
    action = [&] {
      auto spec = gen.spec();
      auto corpus = generate(spec);
      write_synthetic(gen_out, corpus);
      write_manifest(fs::path(gen_out) / "manifest.json", "generate", *c_gen,
                     {{"seed", spec.seed}, {"entries", corpus.entries.size()}, {"failures", corpus.truth.failures.size()},
                      {"jobs", corpus.truth.jobs.size()}});
      std::cerr << "wrote " << corpus.entries.size() << " entries, " << corpus.truth.failures.size() << " failures to "
                << gen_out << '\n';
      return 0;
    };
  });

  // topology
  bool taurus = false;
  double topo_scale = 1.0;
  std::string topo_out;
  auto* c_topo = app.add_subcommand("topology", "Write the reference topology fixture");
  c_topo->add_flag("--taurus", taurus, "Taurus reference topology")->required();
  c_topo->add_option("--scale", topo_scale, "Scale factor")->capture_default_str()->check(CLI::Range(1e-6, 1.0));
  c_topo->add_option("--out", topo_out, "Output file (default stdout)");
  c_topo->callback([&] {
    action = [&] {
      const auto t = scale_topology(taurus_topology(), topo_scale);
      emit(topo_out, [&](std::ostream& o) { write_topology(o, t); });
      manifest_next_to(topo_out, "topology", *c_topo, {{"nodes", t.nodes().size()}});
      return 0;
    };
  });

  // parse
  SourceFlags parse_src;
  std::string parse_out;
  auto* c_parse = app.add_subcommand("parse", "Parse a syslog file and report ingestion statistics");
  parse_src.add(c_parse, true);
  c_parse->add_option("--out", parse_out, "Normalized syslog output");
  c_parse->callback([&] {
    action = [&] {
      const auto topo = parse_src.load_topo();
      NodeResolver resolver(topo);
      SyslogStreamParser::Options opts;
      opts.default_year = parse_src.year;
      if (!parse_src.start.empty() || !parse_src.end.empty()) {
        opts.range = ObservationRange(require_instant(parse_src.start, "--start"), require_instant(parse_src.end, "--end"));
      }
      auto c = read_syslog(parse_src.corpus, resolver, opts);
      if (!parse_out.empty()) emit(parse_out, [&](std::ostream& o) { write_syslog(o, c.entries); });
      json stats{{"lines", c.stats.lines},           {"accepted", c.stats.accepted},
                 {"unknown_hosts", c.stats.unknown_hosts}, {"malformed", c.stats.malformed},
                 {"out_of_range", c.stats.out_of_range},   {"rollovers", c.stats.rollovers}};
      if (format == "json") {
        std::cout << stats.dump(2) << '\n';
      } else {
        for (auto& [k, v] : stats.items()) std::cout << k << (format == "csv" ? "," : "\t") << v << '\n';
      }
      manifest_next_to(parse_out, "parse", *c_parse, {{"stats", stats}});
      return 0;
    };
  });

  // anonymize
  SourceFlags anon_src;
  std::string anon_out;
  bool audit = false;
  auto* c_anon = app.add_subcommand("anonymize", "Replace messages by template hash keys");
  anon_src.add(c_anon, true);
  c_anon->add_option("--out", anon_out, "Anonymized corpus output");
  c_anon->add_flag("--audit", audit, "Fail when two distinct templates share a key");
  c_anon->callback([&] {
    action = [&] {
      const auto topo = anon_src.load_topo();
      const auto rules = rules_from(anon_src.rules);
      auto c = load_corpus(anon_src.corpus, topo, anon_src.year);
      if (c.anonymized) throw Error("corpus is already anonymized");
      const auto anon = anonymize_stream(c.raw, rules);
      if (audit) {
        std::set<std::string> templates;
        for (const auto& e : c.raw) templates.insert(rules.deidentify(e.message));
        auto coll = audit_collisions({templates.begin(), templates.end()});
        if (!coll.empty()) throw Error("hash collision between \"" + coll.front().first + "\" and \"" + coll.front().second + "\"");
      }
      emit(anon_out, [&](std::ostream& o) { write_anonymized(o, rules.version(), anon); });
      manifest_next_to(anon_out, "anonymize", *c_anon, {{"rule_version", rules.version()}, {"entries", anon.size()}});
      return 0;
    };
  });

  // detect-outages
  SourceFlags out_src;
  std::string outages_out, silence = "1h";
  bool no_burst = false;
  auto* c_out = app.add_subcommand("detect-outages", "Detect boots and backtrack outage instants");
  out_src.add(c_out, true);
  c_out->add_option("--silence", silence, "Tail silence threshold")->capture_default_str();
  c_out->add_flag("--no-burst", no_burst, "Disable the burst heuristic");
  c_out->add_option("--out", outages_out, "Outage output");
  c_out->callback([&] {
    action = [&] {
      const auto topo = out_src.load_topo();
      const auto rules = rules_from(out_src.rules);
      auto c = load_corpus(out_src.corpus, topo, out_src.year);
      const auto range = range_for(c, out_src.start, out_src.end);
      const auto index = c.index(rules);
      const auto spec = out_src.footprint.empty() ? default_footprint() : load_footprint(out_src.footprint);
      OutageOptions opts;
      opts.silence_threshold = require_duration(silence, "--silence");
      opts.burst.enabled = !no_burst;
      const auto outs = detect_outages(index, resolve_footprint(spec, index, rules), range, opts, jobs);
      emit(outages_out, [&](std::ostream& o) { write_outages(o, outs); });
      manifest_next_to(outages_out, "detect-outages", *c_out, {{"outages", outs.size()}});
      return 0;
    };
  });

  // classify
  std::string cls_outages, cls_jobs, cls_maint, cls_odb, cls_out, cls_window = "10m";
  auto* c_cls = app.add_subcommand("classify", "Label outages using maintenance, jobs and the outage database");
  c_cls->add_option("--outages", cls_outages, "Outages from detect-outages")->required()->check(CLI::ExistingFile);
  c_cls->add_option("--job-report", cls_jobs, "Job report CSV")->check(CLI::ExistingFile);
  c_cls->add_option("--maintenance", cls_maint, "Maintenance windows")->check(CLI::ExistingFile);
  c_cls->add_option("--outage-db", cls_odb, "Outage database")->check(CLI::ExistingFile);
  c_cls->add_option("--correlation-window", cls_window, "Job correlation window")->capture_default_str();
  c_cls->add_option("--out", cls_out, "Classification CSV");
  c_cls->callback([&] {
    action = [&] {
      const auto outs = load_outages(cls_outages);
      const auto jr = cls_jobs.empty() ? std::vector<JobRecord>{} : load_job_report(cls_jobs);
      const auto mw = cls_maint.empty() ? std::vector<MaintenanceWindow>{} : load_maintenance(cls_maint);
      const auto odb = cls_odb.empty() ? std::vector<OutageRecord>{} : load_outage_db(cls_odb);
      const auto events = classify_all(outs, mw, jr, odb, require_duration(cls_window, "--correlation-window"));
      emit(cls_out, [&](std::ostream& o) { write_classification(o, events); });
      manifest_next_to(cls_out, "classify", *c_cls, {{"events", events.size()}});
      return 0;
    };
  });

  // vicinity
  std::string vic_perspective = "combined", vic_topology, vic_jobs, vic_at, vic_failures, vic_out, vic_interval = "10m";
  auto* c_vic = app.add_subcommand("vicinity", "Dump vicinity groups for one perspective");
  c_vic->add_option("--perspective", vic_perspective, "hardware|location|combined|allocation|time_of_failure")
      ->capture_default_str()
      ->check(CLI::IsMember({"hardware", "location", "combined", "allocation", "time_of_failure"}));
  c_vic->add_option("--topology", vic_topology, "Topology file")->check(CLI::ExistingFile);
  c_vic->add_option("--job-report", vic_jobs, "Job report (allocation)")->check(CLI::ExistingFile);
  c_vic->add_option("--at", vic_at, "Instant (allocation)");
  c_vic->add_option("--failures", vic_failures, "Classification CSV (time_of_failure)")->check(CLI::ExistingFile);
  c_vic->add_option("--interval", vic_interval, "Chaining interval (time_of_failure)")->capture_default_str();
  c_vic->add_option("--out", vic_out, "Output file");
  c_vic->callback([&] {
    action = [&] {
      const auto p = *parse_perspective(vic_perspective);
      std::vector<VicinityAssignment> as;
      auto topo = [&] {
        if (vic_topology.empty()) throw Error("--topology is required for this perspective");
        return load_topology(vic_topology);
      };
      switch (p) {
        case Perspective::hardware: as.push_back(hardware_vicinity(topo())); break;
        case Perspective::location: as.push_back(location_vicinity(topo())); break;
        case Perspective::combined: as.push_back(combined_vicinity(topo())); break;
        case Perspective::allocation: {
          if (vic_jobs.empty() || vic_at.empty()) throw Error("allocation needs --job-report and --at");
          const auto jr = load_job_report(vic_jobs);
          if (vic_topology.empty()) {
            as.push_back(allocation_vicinity(jr, require_instant(vic_at, "--at")));
          } else {
            const auto t = topo();
            as.push_back(allocation_vicinity(jr, require_instant(vic_at, "--at"), &t));
          }
          break;
        }
        case Perspective::time_of_failure: {
          if (vic_failures.empty()) throw Error("time_of_failure needs --failures");
          as = time_of_failure_vicinity(regular_failures(load_classification(vic_failures)),
                                        require_duration(vic_interval, "--interval"));
          break;
        }
      }
      emit(vic_out, [&](std::ostream& o) {
        for (const auto& a : as) write_assignment(o, a);
      });
      manifest_next_to(vic_out, "vicinity", *c_vic, {{"assignments", as.size()}});
      return 0;
    };
  });

  // detect-anomalies
  SourceFlags da_src;
  DetectFlags da_flags;
  std::string da_filter = "none", da_out, da_matrix, da_detections;
  auto* c_da = app.add_subcommand("detect-anomalies", "Sweep SG values and emit per-node verdicts");
  da_src.add(c_da, true);
  da_flags.add(c_da);
  c_da->add_option("--filter", da_filter, "none|frequent")->capture_default_str()->check(CLI::IsMember({"none", "frequent"}));
  c_da->add_option("--failures", vic_failures, "Classification CSV (time_of_failure)")->check(CLI::ExistingFile);
  c_da->add_option("--out", da_out, "Verdict lines");
  c_da->add_option("--matrix", da_matrix, "SG matrix CSV");
  c_da->add_option("--detections", da_detections, "Failure detections CSV");
  c_da->callback([&] {
    action = [&] {
      PipelineConfig cfg;
      da_flags.apply(cfg);
      cfg.jobs = jobs;
      cfg.rules = rules_from(da_src.rules);
      cfg.validate();
      const auto topo = da_src.load_topo();
      auto c = load_corpus(da_src.corpus, topo, da_src.year);
      const auto range = range_for(c, da_src.start, da_src.end);
      auto index = c.index(cfg.rules);
      if (da_filter == "frequent") {
        index = index.kind() == CorpusKind::anonymized ? filter_frequent_anonymized(index, cfg.percentile, cfg.periodic)
                                                        : filter_frequent_raw(index, cfg.percentile);
      }
      const auto jr = da_src.job_report.empty() ? std::vector<JobRecord>{} : load_job_report(da_src.job_report);
      const auto mw = da_src.maintenance.empty() ? std::vector<MaintenanceWindow>{} : load_maintenance(da_src.maintenance);
      const auto failures = vic_failures.empty() ? std::vector<FailureEvent>{} : load_classification(vic_failures);
      if (cfg.vicinity == Perspective::allocation && jr.empty()) throw Error("allocation vicinity needs --job-report");
      const auto provider = make_assignment_provider(cfg.vicinity, topo, jr, failures, cfg);
      const auto sweep = run_detection(index, provider, range, cfg.detection, cfg.jobs);
      emit(da_out, [&](std::ostream& o) { write_verdicts(o, sweep); });
      if (!da_matrix.empty()) emit(da_matrix, [&](std::ostream& o) { write_sg_matrix(o, sweep); });
      const auto dets = extract_detections(sweep, index, mw, extraction_options(cfg));
      if (!da_detections.empty()) emit(da_detections, [&](std::ostream& o) { write_detections(o, dets); });
      manifest_next_to(da_out, "detect-anomalies", *c_da,
                       {{"moments", sweep.moments.size()}, {"skipped_groups", sweep.skipped_groups}, {"detections", dets.size()}});
      return 0;
    };
  });

  // evaluate
  std::string ev_detections, ev_truth, ev_tolerance = "10m", ev_variant = "raw", ev_out;
  auto* c_ev = app.add_subcommand("evaluate", "Match detections against reference failures");
  c_ev->add_option("--detections", ev_detections, "Detections CSV (node,instant)")->required()->check(CLI::ExistingFile);
  c_ev->add_option("--truth", ev_truth, "truth.csv or classification CSV")->required()->check(CLI::ExistingFile);
  c_ev->add_option("--tolerance", ev_tolerance, "Match tolerance")->capture_default_str();
  c_ev->add_option("--variant", ev_variant, "Variant label for the report")
      ->capture_default_str()
      ->check(CLI::IsMember({"raw", "anonymized", "filtered_raw", "filtered_anonymized"}));
  c_ev->add_option("--out", ev_out, "Report output");
  c_ev->callback([&] {
    action = [&] {
      const auto r = evaluate(*parse_variant(ev_variant), load_detections(ev_detections), load_detections(ev_truth),
                              require_duration(ev_tolerance, "--tolerance", true));
      emit(ev_out, [&](std::ostream& o) { write_reports(o, {r}, format); });
      manifest_next_to(ev_out, "evaluate", *c_ev, {{"report", report_json(r)}});
      return 0;
    };
  });

  // pipeline
  SourceFlags pl_src;
  DetectFlags pl_flags;
  GenerateFlags pl_gen;
  bool pl_generate = false;
  std::string pl_truth, pl_variant = "all", pl_out_dir, pl_tolerance = "10m";
  auto* c_pl = app.add_subcommand("pipeline", "Ingest or generate, then detect and evaluate all data-format variants");
  pl_src.add(c_pl, false);
  pl_flags.add(c_pl);
  pl_gen.add(c_pl);
  c_pl->add_flag("--generate", pl_generate, "Use a generated corpus instead of --corpus");
  c_pl->add_option("--truth", pl_truth, "Reference failures (truth.csv)")->check(CLI::ExistingFile);
  c_pl->add_option("--variant", pl_variant, "raw|anonymized|filtered_raw|filtered_anonymized|all")
      ->capture_default_str()
      ->check(CLI::IsMember({"raw", "anonymized", "filtered_raw", "filtered_anonymized", "all"}));
  c_pl->add_option("--tolerance", pl_tolerance, "Match tolerance")->capture_default_str();
  c_pl->add_option("--out-dir", pl_out_dir, "Directory for intermediate outputs and the manifest");
  c_pl->callback([&] {
    action = [&] {
      PipelineConfig cfg;
      pl_flags.apply(cfg);
      cfg.jobs = jobs;
      cfg.tolerance = require_duration(pl_tolerance, "--tolerance", true);
      cfg.rules = rules_from(pl_src.rules);
      PipelineInputs in;
      std::vector<LogEntry> entries;
      json extra;
      if (pl_generate) {
        const auto spec = pl_gen.spec();
        auto corpus = generate(spec);
        if (!pl_out_dir.empty()) write_synthetic(pl_out_dir, corpus);
        entries = std::move(corpus.entries);
        in.topology = corpus.topology;
        in.range = corpus.range;
        in.jobs = corpus.truth.jobs;
        in.maintenance = corpus.truth.maintenance;
        in.outage_db = corpus.truth.outage_db;
        std::vector<Detection> truth;
        for (const auto& f : corpus.truth.failures) truth.push_back({f.node, f.outage_time});
        in.truth = truth;
        cfg.footprint = BootFootprintSpec::from_messages(corpus.footprint);
        extra["seed"] = spec.seed;
      } else {
        if (pl_src.corpus.empty()) throw CLI::ValidationError("--corpus", "required unless --generate is given");
        in.topology = pl_src.load_topo();
        auto c = load_corpus(pl_src.corpus, in.topology, pl_src.year);
        if (c.anonymized) throw Error("pipeline needs a raw syslog corpus to derive all variants");
        in.range = range_for(c, pl_src.start, pl_src.end);
        entries = std::move(c.raw);
        if (!pl_src.job_report.empty()) in.jobs = load_job_report(pl_src.job_report);
        if (!pl_src.maintenance.empty()) in.maintenance = load_maintenance(pl_src.maintenance);
        if (!pl_src.outage_db.empty()) in.outage_db = load_outage_db(pl_src.outage_db);
        cfg.footprint = pl_src.footprint.empty() ? default_footprint() : load_footprint(pl_src.footprint);
        if (!pl_truth.empty()) in.truth = load_detections(pl_truth);
      }
      cfg.validate();
      in.entries = &entries;
      std::vector<Variant> variants;
      if (pl_variant == "all") variants.assign(std::begin(kVariants), std::end(kVariants));
      else variants.push_back(*parse_variant(pl_variant));
      const auto prepared = prepare_corpus(entries, cfg.rules);
      const auto runs = evaluate_variants(prepared, in, cfg, variants);
      std::vector<EvaluationReport> reports;
      for (const auto& r : runs) reports.push_back(r.report);
      write_reports(std::cout, reports, format);
      if (!pl_out_dir.empty()) {
        fs::create_directories(pl_out_dir);
        const fs::path dir(pl_out_dir);
        for (const auto& r : runs) {
          const std::string v(to_string(r.variant));
          write_file_atomic(dir / (v + ".outages.tsv"), [&](std::ostream& o) { write_outages(o, r.outages); });
          write_file_atomic(dir / (v + ".classification.csv"), [&](std::ostream& o) { write_classification(o, r.failures); });
          write_file_atomic(dir / (v + ".detections.csv"), [&](std::ostream& o) { write_detections(o, r.detections); });
        }
        write_file_atomic(dir / "report.csv", [&](std::ostream& o) { write_reports_csv(o, reports); });
      }
      json reps = json::array();
      for (const auto& r : reports) reps.push_back(report_json(r));
      extra["reports"] = reps;
      extra["rule_version"] = cfg.rules.version();
      write_manifest(pl_out_dir.empty() ? fs::path{} : fs::path(pl_out_dir) / "manifest.json", "pipeline", *c_pl, extra);
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }
  try {
    return action ? action() : kExitUsage;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ContractViolation& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  } catch (const std::logic_error& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
