#include "test_support.hpp"

using namespace sgscan;
using namespace sgscan::test;

namespace {

struct Fixture {
  PipelineConfig cfg;
  PipelineInputs in;
  PreparedCorpus corpus;
  std::vector<VariantRun> runs;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    const auto& c = desk_corpus();
    Fixture x;
    x.cfg.footprint = BootFootprintSpec::from_messages(c.footprint);
    x.in.entries = &c.entries;
    x.in.topology = c.topology;
    x.in.range = c.range;
    x.in.jobs = c.truth.jobs;
    x.in.maintenance = c.truth.maintenance;
    x.in.outage_db = c.truth.outage_db;
    std::vector<Detection> truth;
    for (const auto& e : c.truth.failures) truth.push_back({e.node, e.outage_time});
    x.in.truth = truth;
    x.corpus = prepare_corpus(c.entries, x.cfg.rules);
    x.runs = evaluate_variants(x.corpus, x.in, x.cfg);
    return x;
  }();
  return f;
}

const VariantRun& run(Variant v) {
  for (const auto& r : fixture().runs) {
    if (r.variant == v) return r;
  }
  throw std::logic_error("variant missing");
}

EvaluationReport without_variant(EvaluationReport r) {
  r.variant = Variant::raw;
  return r;
}

}  // namespace

TEST(Pipeline, RawAndAnonymizedAgree) {
  EXPECT_EQ(run(Variant::raw).detections, run(Variant::anonymized).detections);
  EXPECT_EQ(without_variant(run(Variant::raw).report), without_variant(run(Variant::anonymized).report));
  EXPECT_EQ(run(Variant::raw).outages, run(Variant::anonymized).outages);
}

TEST(Pipeline, AllInjectedFailuresRecovered) {
  const auto& c = desk_corpus();
  for (auto v : kVariants) {
    const auto found = failures_as_detections(run(v).failures);
    std::vector<Detection> truth;
    for (const auto& e : c.truth.failures) truth.push_back({e.node, e.outage_time});
    const auto m = match_detections(found, truth, Duration::zero());
    EXPECT_EQ(m.true_positives, truth.size()) << to_string(v);
  }
}

TEST(Pipeline, FilteringDoesNotLowerPrecision) {
  EXPECT_GE(run(Variant::filtered_raw).report.precision, run(Variant::raw).report.precision);
  EXPECT_GE(run(Variant::filtered_anonymized).report.precision, run(Variant::anonymized).report.precision);
  EXPECT_LE(run(Variant::filtered_anonymized).report.recall, run(Variant::filtered_raw).report.recall);
}

TEST(Pipeline, DetectsMostFailures) {
  for (auto v : kVariants) EXPECT_GE(run(v).report.recall, 0.7) << to_string(v);
}

TEST(Pipeline, ParallelMatchesSerial) {
  auto cfg = fixture().cfg;
  cfg.jobs = 3;
  const auto again = run_variant(fixture().corpus, Variant::filtered_raw, fixture().in, cfg);
  EXPECT_EQ(again.detections, run(Variant::filtered_raw).detections);
  EXPECT_EQ(again.report, run(Variant::filtered_raw).report);
}

TEST(Pipeline, ConfigValidation) {
  PipelineConfig cfg;
  cfg.percentile = 101;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.detection.threshold.alpha = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.detection.cadence = Duration::zero();
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Pipeline, TimeOfFailureProviderOnlyGroupsNearbyChains) {
  const auto& f = fixture();
  const auto provider = make_assignment_provider(Perspective::time_of_failure, f.in.topology, f.in.jobs,
                                                 run(Variant::raw).failures, f.cfg);
  const auto chains = time_of_failure_vicinity(regular_failures(run(Variant::raw).failures));
  ASSERT_FALSE(chains.empty());
  const auto a = provider(*chains.front().at);
  ASSERT_FALSE(a.groups.empty());
  EXPECT_EQ(a.groups.front(), chains.front().groups.front());
  EXPECT_TRUE(provider(f.in.range.start - days(30)).groups.empty());
}
