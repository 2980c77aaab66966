#include <sys/wait.h>

#include <cstdio>
#include <json.hpp>

#include "test_support.hpp"

using namespace sgscan;
using namespace sgscan::test;

namespace {

struct Run {
  int rc = -1;
  std::string out;
};

Run sgscan_cli(const std::string& args, const std::filesystem::path& cwd = std::filesystem::temp_directory_path()) {
  const std::string cmd = "cd '" + cwd.string() + "' && '" SGSCAN_CLI "' " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// A small generated corpus shared by the whole suite.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir;
    const auto r = sgscan_cli("generate --seed 3 --duration 2d --failures 6 --job-count 100 --out g", dir_->path);
    ASSERT_EQ(r.rc, 0);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::filesystem::path cwd() { return dir_->path; }
  static std::string sources() {
    return "--topology g/topology.tsv --footprint g/footprint.txt --job-report g/jobs.csv "
           "--maintenance g/maintenance.txt --outage-db g/outages.db";
  }
  static TempDir* dir_;
};

TempDir* Cli::dir_ = nullptr;

}  // namespace

TEST_F(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(sgscan_cli("--help").rc, 0);
  EXPECT_EQ(sgscan_cli("pipeline --help").rc, 0);
  EXPECT_EQ(sgscan_cli("").rc, 1);  // a subcommand is required
  EXPECT_EQ(sgscan_cli("detect-outages --bogus").rc, 1);
  EXPECT_EQ(sgscan_cli("detect-outages --corpus /nonexistent/syslog.log").rc, 1);
  EXPECT_EQ(sgscan_cli("detect-anomalies --corpus g/syslog.log --topology g/topology.tsv --window 0m", cwd()).rc, 1);
  EXPECT_EQ(sgscan_cli("detect-anomalies --corpus g/syslog.log --topology g/topology.tsv --alpha -1", cwd()).rc, 1);
}

TEST_F(Cli, MalformedDataIsExitTwo) {
  write_text(cwd() / "bad.log", "Mar  1 00:00:01 i1r0n0 kernel: fine\nthis is not syslog\n");
  EXPECT_EQ(sgscan_cli("parse --corpus bad.log --topology g/topology.tsv", cwd()).rc, 2);
  write_text(cwd() / "bad.topology", "i1r0n0 nope\n");
  EXPECT_EQ(sgscan_cli("vicinity --topology bad.topology", cwd()).rc, 2);
}

TEST_F(Cli, GenerateWritesCorpusAndManifest) {
  for (const char* f : {"syslog.log", "topology.tsv", "jobs.csv", "outages.db", "maintenance.txt", "truth.csv", "footprint.txt"}) {
    EXPECT_TRUE(std::filesystem::exists(cwd() / "g" / f)) << f;
  }
  const auto m = nlohmann::json::parse(read_file(cwd() / "g" / "manifest.json"));
  EXPECT_EQ(m["tool"], "sgscan");
  EXPECT_EQ(m["command"], "generate");
  EXPECT_EQ(m["version"], kVersion);
  EXPECT_NE(m["config"].get<std::string>().find("generate.seed=3"), std::string::npos);
  EXPECT_EQ(load_truth(cwd() / "g" / "truth.csv").size(), 6u);
}

TEST_F(Cli, ConfigReproducesTheRun) {
  const auto m = nlohmann::json::parse(read_file(cwd() / "g" / "manifest.json"));
  write_text(cwd() / "run.conf", m["config"].get<std::string>());
  ASSERT_EQ(sgscan_cli("--config run.conf generate --out g2", cwd()).rc, 0);
  EXPECT_EQ(read_file(cwd() / "g2" / "syslog.log"), read_file(cwd() / "g" / "syslog.log"));
  EXPECT_EQ(read_file(cwd() / "g2" / "truth.csv"), read_file(cwd() / "g" / "truth.csv"));
}

TEST_F(Cli, AnonymizedCorpusGivesSameOutagesAndDetections) {
  ASSERT_EQ(sgscan_cli("anonymize --corpus g/syslog.log --topology g/topology.tsv --out anon.txt", cwd()).rc, 0);
  EXPECT_EQ(read_file(cwd() / "anon.txt").rfind("#pars-lite v", 0), 0u);
  const auto raw = sgscan_cli("detect-outages --corpus g/syslog.log " + sources(), cwd());
  const auto anon = sgscan_cli("detect-outages --corpus anon.txt " + sources(), cwd());
  ASSERT_EQ(raw.rc, 0);
  EXPECT_FALSE(raw.out.empty());
  EXPECT_EQ(raw.out, anon.out);
  const auto det_raw = sgscan_cli("detect-anomalies --corpus g/syslog.log " + sources() + " --detections dr.csv --out vr.tsv", cwd());
  const auto det_anon = sgscan_cli("detect-anomalies --corpus anon.txt " + sources() + " --detections da.csv --out va.tsv", cwd());
  ASSERT_EQ(det_raw.rc, 0);
  ASSERT_EQ(det_anon.rc, 0);
  EXPECT_EQ(read_file(cwd() / "dr.csv"), read_file(cwd() / "da.csv"));
  EXPECT_EQ(read_file(cwd() / "vr.tsv"), read_file(cwd() / "va.tsv"));
}

TEST_F(Cli, PipelineReportsAllVariants) {
  const auto r = sgscan_cli("--format csv pipeline --corpus g/syslog.log " + sources() + " --truth g/truth.csv --out-dir p", cwd());
  ASSERT_EQ(r.rc, 0);
  std::map<std::string, std::string> rows;
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) rows[line.substr(0, line.find(','))] = line.substr(line.find(','));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows["raw"], rows["anonymized"]);
  EXPECT_EQ(rows["filtered_raw"], rows["filtered_anonymized"]);
  EXPECT_EQ(read_file(cwd() / "p" / "report.csv"), r.out);
  const auto m = nlohmann::json::parse(read_file(cwd() / "p" / "manifest.json"));
  EXPECT_EQ(m["command"], "pipeline");
  EXPECT_EQ(m["reports"].size(), 4u);
  const auto json = sgscan_cli("--format json pipeline --corpus g/syslog.log " + sources() + " --truth g/truth.csv --variant raw", cwd());
  ASSERT_EQ(json.rc, 0);
  const auto j = nlohmann::json::parse(json.out);
  ASSERT_TRUE(j.is_array());
  EXPECT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["variant"], "raw");
}

TEST_F(Cli, EvaluateMatchesPipelineReport) {
  ASSERT_EQ(sgscan_cli("pipeline --corpus g/syslog.log " + sources() + " --truth g/truth.csv --out-dir p2", cwd()).rc, 0);
  const auto r = sgscan_cli("--format csv evaluate --detections p2/raw.detections.csv --truth g/truth.csv --variant raw", cwd());
  ASSERT_EQ(r.rc, 0);
  const auto report = read_file(cwd() / "p2" / "report.csv");
  std::istringstream in(r.out);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_NE(report.find(row), std::string::npos) << row;
}

TEST_F(Cli, LocationVicinityOnConstantCorpusIsQuiet) {
  std::ostringstream log;
  const auto t0 = at("2017-03-01T00:00:00Z");
  std::vector<LogEntry> entries;
  for (Instant t = t0; t < t0 + hours(4); t += Duration{20}) {
    for (int n = 0; n < 5; ++n) entries.push_back({t, NodeId{1, 0, n}, "CRON", "(root) CMD (run-parts /etc/cron.hourly)"});
  }
  write_syslog(log, entries);
  write_text(cwd() / "flat.log", log.str());
  Topology topo;
  for (int n = 0; n < 5; ++n) topo.add(NodeId{1, 0, n}, Architecture::haswell);
  std::ostringstream t;
  write_topology(t, topo);
  write_text(cwd() / "flat.topology", t.str());
  const auto r = sgscan_cli("detect-anomalies --corpus flat.log --topology flat.topology --vicinity location", cwd());
  ASSERT_EQ(r.rc, 0);
  EXPECT_FALSE(r.out.empty());
  EXPECT_EQ(r.out.find("abnormal"), std::string::npos);
  EXPECT_EQ(r.out.find("non_responsive"), std::string::npos);
}

TEST_F(Cli, CombinedVicinityMatchesLibrary) {
  const auto r = sgscan_cli("vicinity --topology g/topology.tsv --perspective combined", cwd());
  ASSERT_EQ(r.rc, 0);
  const auto expected = combined_vicinity(load_topology(cwd() / "g" / "topology.tsv"));
  std::ostringstream want;
  write_assignment(want, expected);
  EXPECT_EQ(r.out, want.str());
  const auto taurus = sgscan_cli("vicinity --topology '" + data_path("taurus.topology").string() + "' --perspective hardware");
  std::set<std::string> groups;
  std::istringstream in(taurus.out);
  std::string line;
  while (std::getline(in, line)) {
    const auto parts = split(line, '\t');
    groups.insert(std::string(parts[2]));
  }
  EXPECT_EQ(groups.size(), 5u);
}

TEST_F(Cli, TopologyFixtureIsReproducible) {
  const auto r = sgscan_cli("topology --taurus");
  ASSERT_EQ(r.rc, 0);
  EXPECT_EQ(r.out, read_file(data_path("taurus.topology")));
}
