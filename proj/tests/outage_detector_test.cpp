#include "test_support.hpp"

using namespace sgscan;
using namespace sgscan::test;

namespace {

const SubstitutionRuleSet& rules() {
  static const auto r = SubstitutionRuleSet::defaults();
  return r;
}

const std::vector<std::string> kFootprint = {"Linux version 3.10.0 (builder) #1 SMP", "Initializing machine ID.",
                                             "Startup finished in 1000ms."};

struct Stream {
  NodeId n = NodeId{1, 0, 0};
  std::vector<LogEntry> entries;

  void add(Instant t, const std::string& msg) { entries.push_back({t, n, "x", msg}); }
  void steady(Instant from, Instant to, Duration step, const std::string& msg = "routine message") {
    for (Instant t = from; t < to; t += step) add(t, msg);
  }
  void boot(Instant t) {
    add(t, kFootprint[0]);
    add(t + Duration{5}, kFootprint[1]);
    add(t + Duration{40}, kFootprint[2]);
  }
  CorpusIndex index() {
    std::stable_sort(entries.begin(), entries.end(), [](auto& a, auto& b) { return a.timestamp < b.timestamp; });
    return CorpusIndex::from_raw(entries, rules());
  }
};

ResolvedFootprint footprint_for(const CorpusIndex& idx) {
  return resolve_footprint(BootFootprintSpec::from_messages(kFootprint), idx, rules());
}

OutageOptions no_burst() {
  OutageOptions o;
  o.burst.enabled = false;
  return o;
}

}  // namespace

TEST(DetectBootEvents, HealthyBootWithFullFootprint) {
  Stream s;
  const Instant t0 = at("2017-03-01T00:00:00Z");
  s.boot(t0 + hours(1));
  s.steady(t0 + hours(1) + minutes(2), t0 + hours(3), minutes(1));
  const auto idx = s.index();
  const auto boots = detect_boot_events(*idx.find(s.n), footprint_for(idx));
  ASSERT_EQ(boots.size(), 1u);
  EXPECT_EQ(boots[0].confidence, BootConfidence::footprint);
  EXPECT_EQ(boots[0].boot_time, t0 + hours(1));
}

TEST(DetectBootEvents, FootprintMustFitInSpan) {
  Stream s;
  const Instant t0 = at("2017-03-01T00:00:00Z");
  s.add(t0, kFootprint[0]);
  s.add(t0 + Duration{5}, kFootprint[1]);
  s.add(t0 + Duration{130}, kFootprint[2]);
  const auto idx = s.index();
  EXPECT_TRUE(detect_boot_events(*idx.find(s.n), footprint_for(idx), no_burst()).empty());
}

TEST(DetectBootEvents, ConstantRateStreamHasNoBoots) {
  Stream s;
  const Instant t0 = at("2017-03-01T00:00:00Z");
  s.steady(t0, t0 + days(1), Duration{20});
  const auto idx = s.index();
  EXPECT_TRUE(detect_boot_events(*idx.find(s.n), footprint_for(idx)).empty());
}

TEST(DetectBootEvents, BurstAfterGapWithoutFootprint) {
  Stream s;
  const Instant t0 = at("2017-03-01T00:00:00Z");
  s.steady(t0, t0 + hours(2), minutes(1));
  // 30 minutes of silence, then three minutes at 20 entries per minute.
  s.steady(t0 + hours(2) + minutes(30), t0 + hours(2) + minutes(33), Duration{3}, "boot chatter");
  s.steady(t0 + hours(2) + minutes(33), t0 + hours(5), minutes(1));
  const auto idx = s.index();
  const auto boots = detect_boot_events(*idx.find(s.n), footprint_for(idx));
  ASSERT_EQ(boots.size(), 1u);
  EXPECT_EQ(boots[0].confidence, BootConfidence::burst);
  EXPECT_EQ(boots[0].boot_time, t0 + hours(2) + minutes(30));
}

TEST(DetectBootEvents, FootprintWinsOverNearbyBurst) {
  Stream s;
  const Instant t0 = at("2017-03-01T00:00:00Z");
  s.steady(t0, t0 + hours(2), minutes(1));
  const Instant b = t0 + hours(3);
  s.boot(b);
  s.steady(b + Duration{1}, b + minutes(3), Duration{2}, "boot chatter");
  s.steady(b + minutes(3), b + hours(2), minutes(1));
  const auto idx = s.index();
  const auto boots = detect_boot_events(*idx.find(s.n), footprint_for(idx));
  ASSERT_EQ(boots.size(), 1u);
  EXPECT_EQ(boots[0].confidence, BootConfidence::footprint);
}

TEST(DetectBootEvents, UnsortedInputIsAContractViolation) {
  NodeSeries s{node("i1r0n0"), {at("2017-03-01T00:00:10Z"), at("2017-03-01T00:00:00Z")}, {0, 0}};
  EXPECT_THROW(detect_boot_events(s, ResolvedFootprint{}), ContractViolation);
}

TEST(BacktrackOutages, LastEntryBeforeBoot) {
  Stream s;
  const Instant t = at("2017-03-01T12:00:00Z");
  s.add(t - Duration{7200}, "a");
  s.add(t - Duration{3600}, "b");
  s.boot(t);
  const auto idx = s.index();
  const auto& series = *idx.find(s.n);
  const auto outs = backtrack_outages(series, detect_boot_events(series, footprint_for(idx), no_burst()));
  ASSERT_EQ(outs.size(), 1u);
  EXPECT_EQ(outs[0].outage_time, t - Duration{3600});
  EXPECT_FALSE(outs[0].tail);
  ASSERT_TRUE(outs[0].following_boot);
}

TEST(BacktrackOutages, FirstBootYieldsNothing) {
  Stream s;
  s.boot(at("2017-03-01T00:00:00Z"));
  s.steady(at("2017-03-01T00:01:00Z"), at("2017-03-01T02:00:00Z"), minutes(1));
  const auto idx = s.index();
  const auto& series = *idx.find(s.n);
  const auto boots = detect_boot_events(series, footprint_for(idx), no_burst());
  ASSERT_EQ(boots.size(), 1u);
  EXPECT_TRUE(backtrack_outages(series, boots).empty());
}

TEST(DetectTailOutage, Threshold) {
  const ObservationRange range(at("2017-03-01T00:00:00Z"), at("2017-03-02T00:00:00Z"));
  NodeSeries near{node("i1r0n0"), {at("2017-03-01T23:59:50Z")}, {0}};
  EXPECT_FALSE(detect_tail_outage(near, range, hours(1)));
  NodeSeries far{node("i1r0n0"), {at("2017-03-01T10:00:00Z"), at("2017-03-01T22:00:00Z")}, {0, 0}};
  const auto o = detect_tail_outage(far, range, hours(1));
  ASSERT_TRUE(o);
  EXPECT_TRUE(o->tail);
  EXPECT_EQ(o->outage_time, at("2017-03-01T22:00:00Z"));
  EXPECT_FALSE(o->following_boot);
  EXPECT_FALSE(detect_tail_outage(NodeSeries{node("i1r0n0"), {}, {}}, range, hours(1)));
}

TEST(FootprintFile, TemplatesAndKeys) {
  std::istringstream in("# footprint\nLinux version 1\nkey:0000abcd\n");
  const auto spec = parse_footprint(in);
  ASSERT_EQ(spec.steps.size(), 2u);
  EXPECT_EQ(*spec.steps[0].text, "Linux version 1");
  EXPECT_EQ(spec.steps[1].key->value, 0xabcdu);
  std::istringstream bad("key:xyz\n");
  EXPECT_THROW(parse_footprint(bad), LoadError);
  const auto fixture = load_footprint(data_path("footprint.txt"));
  EXPECT_EQ(fixture.steps.size(), 3u);
}

TEST(OutagesFile, RoundTrip) {
  std::vector<OutageEvent> outs = {
      {node("i1r0n0"), at("2017-03-01T00:00:00Z"), BootEvent{node("i1r0n0"), at("2017-03-01T01:00:00Z"), BootConfidence::burst}, false},
      {node("i2r1n3"), at("2017-03-02T00:00:00Z"), std::nullopt, true}};
  std::ostringstream out;
  write_outages(out, outs);
  std::istringstream in(out.str());
  EXPECT_EQ(parse_outages(in), outs);
}

// ---------------------------------------------------------------------------
// Against generator ground truth
// ---------------------------------------------------------------------------

class SyntheticOutages : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const auto& c = desk_corpus();
    raw_ = new CorpusIndex(CorpusIndex::from_raw(c.entries, rules()));
    const auto spec = BootFootprintSpec::from_messages(c.footprint);
    fp_ = new ResolvedFootprint(resolve_footprint(spec, *raw_, rules()));
    outages_ = new std::vector<OutageEvent>(detect_outages(*raw_, *fp_, c.range));
  }
  static void TearDownTestSuite() {
    delete raw_;
    delete fp_;
    delete outages_;
  }
  static CorpusIndex* raw_;
  static ResolvedFootprint* fp_;
  static std::vector<OutageEvent>* outages_;
};

CorpusIndex* SyntheticOutages::raw_ = nullptr;
ResolvedFootprint* SyntheticOutages::fp_ = nullptr;
std::vector<OutageEvent>* SyntheticOutages::outages_ = nullptr;

TEST_F(SyntheticOutages, BootsMatchInjectedSchedule) {
  const auto& c = desk_corpus();
  std::map<NodeId, std::vector<Instant>> expected;
  for (const auto& b : c.truth.boots) expected[b.node].push_back(b.boot_time);
  std::size_t total = 0;
  for (const auto& s : raw_->series()) {
    const auto boots = detect_boot_events(s, *fp_);
    auto want = expected[s.node];
    std::sort(want.begin(), want.end());
    ASSERT_EQ(boots.size(), want.size()) << s.node.name();
    for (std::size_t i = 0; i < boots.size(); ++i) {
      const auto d = boots[i].boot_time - want[i];
      EXPECT_LE(std::abs(d.count()), 60) << s.node.name();
    }
    total += boots.size();
  }
  EXPECT_EQ(total, c.truth.boots.size());
}

TEST_F(SyntheticOutages, OutageTimeEqualsInjectedLastEntry) {
  const auto& c = desk_corpus();
  std::set<std::pair<NodeId, Instant>> found;
  for (const auto& o : *outages_) found.insert({o.node, o.outage_time});
  for (const auto& f : c.truth.failures) {
    EXPECT_TRUE(found.count({f.node, f.outage_time})) << f.node.name() << " " << format_iso(f.outage_time);
  }
}

TEST_F(SyntheticOutages, TailOutagesAreTheNoRebootFailures) {
  const auto& c = desk_corpus();
  std::set<std::pair<NodeId, Instant>> tails, expected;
  for (const auto& o : *outages_) {
    if (o.tail) tails.insert({o.node, o.outage_time});
  }
  for (const auto& f : c.truth.failures) {
    if (!f.has_reboot) expected.insert({f.node, f.outage_time});
  }
  EXPECT_FALSE(expected.empty());
  EXPECT_EQ(tails, expected);
}

TEST_F(SyntheticOutages, OutageIntervalsAreSilent) {
  for (const auto& o : *outages_) {
    EXPECT_EQ(o.tail, !o.following_boot.has_value());
    if (!o.following_boot) continue;
    const auto& s = *raw_->find(o.node);
    EXPECT_LT(o.outage_time, o.following_boot->boot_time);
    for (auto t : s.times) EXPECT_FALSE(o.outage_time < t && t < o.following_boot->boot_time);
  }
}

TEST_F(SyntheticOutages, OutageCountBoundedByBoots) {
  std::map<NodeId, std::size_t> outs;
  for (const auto& o : *outages_) ++outs[o.node];
  for (const auto& s : raw_->series()) {
    const auto boots = detect_boot_events(s, *fp_).size();
    EXPECT_LE(outs[s.node], boots + 1);
    EXPECT_GE(outs[s.node] + 1, boots);
  }
}

TEST_F(SyntheticOutages, KeyFootprintGivesIdenticalOutagesOnAnonymizedStream) {
  const auto& c = desk_corpus();
  std::ostringstream keys;
  write_footprint_keys(keys, BootFootprintSpec::from_messages(c.footprint), rules());
  std::istringstream in(keys.str());
  const auto key_spec = parse_footprint(in);
  const auto anon = CorpusIndex::from_anonymized(anonymize_stream(c.entries, rules()));
  const auto from_anon = detect_outages(anon, resolve_footprint(key_spec, anon, rules()), c.range);
  const auto from_raw_keys = detect_outages(*raw_, resolve_footprint(key_spec, *raw_, rules()), c.range);
  EXPECT_EQ(from_anon, *outages_);
  EXPECT_EQ(from_raw_keys, *outages_);
}

TEST_F(SyntheticOutages, ParallelDetectionMatchesSerial) {
  const auto& c = desk_corpus();
  EXPECT_EQ(detect_outages(*raw_, *fp_, c.range, {}, 4), *outages_);
}
