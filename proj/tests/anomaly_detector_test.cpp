#include "test_support.hpp"

using namespace sgscan;
using namespace sgscan::test;

namespace {

std::vector<SGObservation> observations(const std::vector<std::size_t>& sgs) {
  std::vector<SGObservation> out;
  for (std::size_t i = 0; i < sgs.size(); ++i) {
    out.push_back({NodeId{1, 0, static_cast<int>(i)}, at("2017-03-01T01:00:00Z"), minutes(30), sgs[i]});
  }
  return out;
}

std::vector<Verdict> verdicts(const std::vector<std::size_t>& sgs, ThresholdOptions opt = {}) {
  const auto obs = observations(sgs);
  return detect_abnormal(obs, *deviation_threshold(obs, opt)).verdicts;
}

// Exhaustive 2-partition minimum of the within-cluster sum of squares.
double brute_force_wcss(const std::vector<double>& v) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = v.size();
  for (std::uint32_t mask = 1; mask + 1 < (1u << n); ++mask) {
    double s[2] = {0, 0}, c[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      const int k = (mask >> i) & 1;
      s[k] += v[i];
      c[k] += 1;
    }
    double w = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const int k = (mask >> i) & 1;
      const double m = s[k] / c[k];
      w += (v[i] - m) * (v[i] - m);
    }
    best = std::min(best, w);
  }
  return best;
}

std::vector<Instant> ticks(Instant from, Instant to, Duration step) {
  std::vector<Instant> out;
  for (Instant t = from; t < to; t += step) out.push_back(t);
  return out;
}

}  // namespace

TEST(ComputeSg, HalfOpenWindow) {
  const auto t0 = at("2017-03-01T00:00:00Z");
  const NodeSeries s{node("i1r0n0"), {t0, t0 + minutes(10), t0 + minutes(30)}, {0, 0, 0}};
  EXPECT_EQ(compute_sg(s, t0 + minutes(30)).sg, 2u);  // [t0, t0+30m)
  EXPECT_EQ(compute_sg(s, t0 + minutes(31)).sg, 2u);  // t0 just left the window
  EXPECT_EQ(compute_sg(s, t0).sg, 0u);
  EXPECT_EQ(compute_sg(s, t0 + Duration{1}, Duration{1}).sg, 1u);
}

TEST(ComputeSg, MatchesBruteForceCount) {
  Rng rng(21);
  const auto t0 = at("2017-03-01T00:00:00Z");
  for (int round = 0; round < 100; ++round) {
    std::vector<Instant> times;
    const auto n = rng.uniform_int(0, 200);
    for (int k = 0; k < n; ++k) times.push_back(t0 + Duration{rng.uniform_int(0, 7200)});
    std::sort(times.begin(), times.end());
    const NodeSeries s{node("i1r0n0"), times, std::vector<std::uint32_t>(times.size(), 0)};
    for (int q = 0; q < 1000; ++q) {
      const auto m = t0 + Duration{rng.uniform_int(-600, 8000)};
      const auto w = Duration{rng.uniform_int(1, 3600)};
      const auto brute = static_cast<std::size_t>(
          std::count_if(times.begin(), times.end(), [&](Instant t) { return m - w <= t && t < m; }));
      ASSERT_EQ(compute_sg(s, m, w).sg, brute);
    }
  }
}

TEST(KMeans, SmallExamples) {
  const auto r = kmeans_1d_2({50, 52, 49, 51, 200});
  EXPECT_EQ(r.assignment, (std::vector<int>{0, 0, 0, 0, 1}));
  EXPECT_DOUBLE_EQ(r.centers[0], 50.5);
  EXPECT_DOUBLE_EQ(r.centers[1], 200.0);
  EXPECT_DOUBLE_EQ(r.wcss, 5.0);
  EXPECT_TRUE(kmeans_1d_2({7, 7, 7}).degenerate);
  EXPECT_THROW(kmeans_1d_2({1, 2}), ContractViolation);
}

TEST(KMeans, MatchesExhaustiveSearch) {
  Rng rng(22);
  for (int round = 0; round < 1000; ++round) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(3, 12));
    std::vector<double> v;
    const bool integers = rng.bernoulli(0.5);
    for (std::size_t i = 0; i < n; ++i) {
      v.push_back(integers ? static_cast<double>(rng.uniform_int(0, 300)) : rng.uniform() * 1000.0);
    }
    const auto r = kmeans_1d_2(v);
    if (r.degenerate) continue;
    const double brute = brute_force_wcss(v);
    EXPECT_NEAR(r.wcss, brute, 1e-6 * std::max(1.0, brute));
    EXPECT_EQ(r.sizes[0] + r.sizes[1], n);
    EXPECT_LE(r.centers[0], r.centers[1]);
  }
}

TEST(DeviationThreshold, SingleOutlierIsAbnormal) {
  EXPECT_EQ(verdicts({50, 52, 49, 51, 200}),
            (std::vector<Verdict>{Verdict::normal, Verdict::normal, Verdict::normal, Verdict::normal, Verdict::abnormal}));
  const auto report = *deviation_threshold(observations({50, 52, 49, 51, 200}));
  EXPECT_DOUBLE_EQ(report.tau, 6.0);
  EXPECT_EQ(report.minor_size, 1u);
  EXPECT_TRUE(report.separable());
}

TEST(DeviationThreshold, EqualClustersGiveNoAbnormal) {
  const auto v = verdicts({10, 10, 10, 10, 10, 100, 100, 100, 100, 100});
  EXPECT_EQ(std::count(v.begin(), v.end(), Verdict::abnormal), 0);
}

TEST(DeviationThreshold, SilentNodeIsNonResponsive) {
  EXPECT_EQ(verdicts({0, 50, 51, 52}),
            (std::vector<Verdict>{Verdict::non_responsive, Verdict::normal, Verdict::normal, Verdict::normal}));
  const auto all_zero = verdicts({0, 0, 0});
  EXPECT_EQ(std::count(all_zero.begin(), all_zero.end(), Verdict::non_responsive), 3);
}

TEST(DeviationThreshold, TooFewObservationsIsSkipped) {
  EXPECT_FALSE(deviation_threshold(observations({1, 2})));
  EXPECT_FALSE(deviation_threshold({}));
}

TEST(DeviationThreshold, ScaleInvariantAndMinorityOnly) {
  Rng rng(23);
  ThresholdOptions opt;
  opt.tau_min = 0.0;
  std::size_t abnormal_seen = 0;
  for (int round = 0; round < 2000; ++round) {
    const auto n = rng.uniform_int(3, 20);
    std::vector<std::size_t> sgs;
    for (int i = 0; i < n; ++i) {
      sgs.push_back(static_cast<std::size_t>(rng.bernoulli(0.15) ? rng.uniform_int(1, 1000) : rng.uniform_int(40, 60)));
    }
    const auto obs = observations(sgs);
    const auto report = *deviation_threshold(obs, opt);
    const auto base = detect_abnormal(obs, report).verdicts;
    for (std::size_t i = 0; i < base.size(); ++i) {
      if (base[i] != Verdict::abnormal) continue;
      ++abnormal_seen;
      EXPECT_EQ(report.members[i], 0);
      EXPECT_LT(report.minor_size, report.major_size);
    }
    const std::size_t c = static_cast<std::size_t>(rng.uniform_int(2, 9));
    std::vector<std::size_t> scaled;
    for (auto x : sgs) scaled.push_back(x * c);
    EXPECT_EQ(verdicts(scaled, opt), base);
  }
  EXPECT_GT(abnormal_seen, 0u);
}

TEST(Percentile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(percentile({}, 50), 0.0);
  EXPECT_DOUBLE_EQ(percentile({4, 1, 3, 2}, 50), 2.5);
  EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4, 5}, 100), 5.0);
  EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4, 5}, 0), 1.0);
  EXPECT_DOUBLE_EQ(percentile({10, 20}, 25), 12.5);
}

TEST(FrequentFilter, DropsOnlyTemplatesAboveCut) {
  const auto t0 = at("2017-03-01T00:00:00Z");
  std::vector<LogEntry> entries;
  for (int i = 0; i < 100; ++i) entries.push_back({t0 + Duration{i}, node("i1r0n0"), "x", "very common"});
  for (int i = 0; i < 3; ++i) entries.push_back({t0 + Duration{i}, node("i1r0n1"), "x", "rare one"});
  for (int i = 0; i < 2; ++i) entries.push_back({t0 + Duration{i}, node("i1r0n1"), "x", "rare two"});
  std::stable_sort(entries.begin(), entries.end(), [](auto& a, auto& b) { return a.timestamp < b.timestamp; });
  const auto idx = CorpusIndex::from_raw(entries, SubstitutionRuleSet::defaults());
  const auto kept = filter_frequent_raw(idx, 50.0);  // counts {100, 3, 2}: median 3
  EXPECT_EQ(kept.total_entries(), 5u);
  EXPECT_EQ(kept.find(node("i1r0n0")), nullptr);  // nodes left without entries are dropped
  EXPECT_EQ(filter_frequent_raw(idx, 100.0).total_entries(), idx.total_entries());
}

TEST(FrequentFilter, MatchesBruteForcePercentileCut) {
  const auto& c = desk_corpus();
  const auto idx = CorpusIndex::from_raw(c.entries, SubstitutionRuleSet::defaults());
  std::map<std::uint32_t, std::size_t> counts;
  for (const auto& s : idx.series()) {
    for (auto k : s.keys) ++counts[k];
  }
  std::vector<double> sorted;
  for (const auto& [k, n] : counts) sorted.push_back(static_cast<double>(n));
  std::sort(sorted.begin(), sorted.end());
  const double rank = 0.995 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(rank);
  const double cut = sorted[lo] + (sorted[std::min(lo + 1, sorted.size() - 1)] - sorted[lo]) * (rank - static_cast<double>(lo));
  std::set<std::uint32_t> expected;
  for (const auto& [k, n] : counts) {
    if (static_cast<double>(n) > cut) expected.insert(k);
  }
  EXPECT_EQ(frequent_keys(idx, 99.5), expected);
  EXPECT_FALSE(expected.empty());
}

TEST(FrequentFilter, FilteringNeverRaisesAnySg) {
  const auto& c = desk_corpus();
  const auto rules = SubstitutionRuleSet::defaults();
  const auto raw = CorpusIndex::from_raw(c.entries, rules);
  const auto anon = CorpusIndex::from_anonymized(anonymize_stream(c.entries, rules));
  const auto fr = filter_frequent_raw(raw);
  const auto fa = filter_frequent_anonymized(anon);
  EXPECT_LT(fr.total_entries(), raw.total_entries());
  EXPECT_LE(fa.total_entries(), fr.total_entries());
  Rng rng(24);
  for (int i = 0; i < 3000; ++i) {
    const auto n = rng.pick(c.topology.nodes());
    const auto t = c.range.start + Duration{rng.uniform_int(0, c.range.length().count())};
    const auto s = raw.sg(n, t, minutes(30));
    EXPECT_LE(fr.sg(n, t, minutes(30)), s);
    EXPECT_LE(fa.sg(n, t, minutes(30)), fr.sg(n, t, minutes(30)));
  }
}

TEST(PeriodicKeys, FindsHeartbeatOnly) {
  const auto t0 = at("2017-03-01T00:00:00Z");
  Rng rng(25);
  std::vector<LogEntry> entries;
  for (int i = 0; i < 50; ++i) entries.push_back({t0 + minutes(5 * i), node("i1r0n0"), "x", "heartbeat"});
  Instant t = t0;
  for (int i = 0; i < 50; ++i) {
    t += Duration{rng.uniform_int(1, 900)};
    entries.push_back({t, node("i1r0n0"), "x", "irregular"});
  }
  std::stable_sort(entries.begin(), entries.end(), [](auto& a, auto& b) { return a.timestamp < b.timestamp; });
  const auto rules = SubstitutionRuleSet::defaults();
  const auto idx = CorpusIndex::from_raw(entries, rules);
  EXPECT_EQ(periodic_keys(idx), std::set<std::uint32_t>{*idx.key_for_template("heartbeat")});
}

TEST(SweepMoments, CadenceAndBounds) {
  const ObservationRange r(at("2017-03-01T00:00:00Z"), at("2017-03-01T01:00:00Z"));
  const auto m = sweep_moments(r, minutes(30), minutes(10));
  ASSERT_EQ(m.size(), 4u);
  EXPECT_EQ(m.front(), at("2017-03-01T00:30:00Z"));
  EXPECT_EQ(m.back(), r.end);
  EXPECT_THROW(sweep_moments(r, minutes(30), Duration::zero()), ContractViolation);
}

TEST(RunDetection, EmptyCorpusIsAllNonResponsive) {
  const auto topo = [] {
    Topology t;
    for (int n = 0; n < 4; ++n) t.add(NodeId{1, 0, n}, Architecture::haswell);
    return t;
  }();
  const ObservationRange r(at("2017-03-01T00:00:00Z"), at("2017-03-01T02:00:00Z"));
  const auto sweep = run_detection(index_of({}), location_vicinity(topo), r);
  ASSERT_EQ(sweep.results.size(), sweep.moments.size());
  for (const auto& d : sweep.results) {
    for (auto v : d.verdicts) EXPECT_EQ(v, Verdict::non_responsive);
  }
}

TEST(RunDetection, ConstantRateCorpusHasNoAbnormal) {
  Topology topo;
  const auto t0 = at("2017-03-01T00:00:00Z");
  std::vector<std::pair<NodeId, std::vector<Instant>>> series;
  for (int r = 0; r < 2; ++r) {
    for (int n = 0; n < 6; ++n) {
      topo.add(NodeId{1, r, n}, Architecture::haswell);
      series.push_back({NodeId{1, r, n}, ticks(t0, t0 + hours(6), Duration{30 + 10 * r})});
    }
  }
  const auto idx = index_of(series);
  const auto sweep = run_detection(idx, location_vicinity(topo), ObservationRange(t0, t0 + hours(6)), {}, 2);
  EXPECT_EQ(sweep.results.size(), 2 * sweep.moments.size());
  for (const auto& d : sweep.results) {
    for (auto v : d.verdicts) EXPECT_EQ(v, Verdict::normal);
  }
  EXPECT_TRUE(extract_detections(sweep, idx, {}).empty());
}

TEST(RunDetection, SmallGroupsAreSkipped) {
  Topology topo;
  topo.add(node("i1r0n0"), Architecture::haswell);
  topo.add(node("i1r0n1"), Architecture::haswell);
  const ObservationRange r(at("2017-03-01T00:00:00Z"), at("2017-03-01T01:00:00Z"));
  const auto sweep = run_detection(index_of({}), location_vicinity(topo), r);
  EXPECT_TRUE(sweep.results.empty());
  EXPECT_EQ(sweep.skipped_groups, sweep.moments.size());
}

TEST(ExtractDetections, SilentNodeDetectedAtLastEntry) {
  const auto t0 = at("2017-03-01T00:00:00Z");
  Topology topo;
  std::vector<std::pair<NodeId, std::vector<Instant>>> series;
  for (int n = 0; n < 6; ++n) {
    topo.add(NodeId{1, 0, n}, Architecture::haswell);
    const auto stop = n == 0 ? t0 + hours(3) + Duration{7} : t0 + hours(6);
    series.push_back({NodeId{1, 0, n}, ticks(t0, stop, Duration{10})});
  }
  const auto idx = index_of(series);
  const auto sweep = run_detection(idx, location_vicinity(topo), ObservationRange(t0, t0 + hours(6)));
  const auto det = extract_detections(sweep, idx, {});
  ASSERT_EQ(det.size(), 1u);
  EXPECT_EQ(det[0].node, node("i1r0n0"));
  EXPECT_EQ(det[0].instant, t0 + hours(3));  // last tick before silence
  const std::vector<MaintenanceWindow> maint = {{t0 + hours(2), t0 + hours(7), IslandScope{1}, ""}};
  EXPECT_TRUE(extract_detections(sweep, idx, maint).empty());
}

TEST(ExtractDetections, SustainedLowRateNeedsMinimumRun) {
  const auto t0 = at("2017-03-01T00:00:00Z");
  Topology topo;
  std::vector<std::pair<NodeId, std::vector<Instant>>> series;
  for (int n = 0; n < 8; ++n) {
    topo.add(NodeId{1, 0, n}, Architecture::haswell);
    auto times = ticks(t0, t0 + hours(6), Duration{10 + n % 3});  // peers differ a little
    if (n == 0) {
      // A slowdown to one entry per 5 minutes between 2h and 2h40m.
      std::erase_if(times, [&](Instant t) {
        return t >= t0 + hours(2) && t < t0 + hours(2) + minutes(40) && (t - t0).count() % 300 != 0;
      });
    }
    series.push_back({NodeId{1, 0, n}, times});
  }
  const auto idx = index_of(series);
  const auto sweep = run_detection(idx, location_vicinity(topo), ObservationRange(t0, t0 + hours(6)));
  std::size_t flagged = 0;
  std::optional<Instant> first;
  for (const auto& d : sweep.results) {
    if (d.verdict_of(node("i1r0n0")) != Verdict::abnormal) continue;
    ++flagged;
    if (!first) first = d.at;
  }
  EXPECT_GE(flagged, 3u);
  const auto det = extract_detections(sweep, idx, {});
  ASSERT_EQ(det.size(), 1u);
  EXPECT_EQ(det[0].instant, *first);
  EXPECT_GT(det[0].instant, t0 + hours(2));
  EXPECT_LE(det[0].instant, t0 + hours(2) + minutes(40));
  ExtractionOptions strict;
  strict.min_abnormal_run = flagged + 1;
  EXPECT_TRUE(extract_detections(sweep, idx, {}, strict).empty());
}
