#include "test_support.hpp"

using namespace sgscan;
using namespace sgscan::test;

namespace {

// Maximum bipartite matching by augmenting paths; edges join same-node pairs within tolerance.
std::size_t max_matching(const std::vector<Detection>& d, const std::vector<Detection>& t, Duration tol) {
  std::vector<int> match_t(t.size(), -1);
  std::function<bool(std::size_t, std::vector<bool>&)> augment = [&](std::size_t i, std::vector<bool>& seen) {
    for (std::size_t j = 0; j < t.size(); ++j) {
      const auto gap = d[i].instant - t[j].instant;
      if (d[i].node != t[j].node || std::abs(gap.count()) > tol.count() || seen[j]) continue;
      seen[j] = true;
      if (match_t[j] < 0 || augment(static_cast<std::size_t>(match_t[j]), seen)) {
        match_t[j] = static_cast<int>(i);
        return true;
      }
    }
    return false;
  };
  std::size_t n = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::vector<bool> seen(t.size(), false);
    n += augment(i, seen);
  }
  return n;
}

std::vector<Detection> random_events(Rng& rng, std::size_t max) {
  std::vector<Detection> out;
  const auto n = rng.uniform_int(0, static_cast<long long>(max));
  for (int k = 0; k < n; ++k) {
    out.push_back({NodeId{1, 0, static_cast<int>(rng.uniform_int(0, 2))},
                   at("2017-03-01T00:00:00Z") + minutes(rng.uniform_int(0, 60))});
  }
  return out;
}

}  // namespace

TEST(MatchDetections, IdenticalListsArePerfect) {
  const std::vector<Detection> d = {{node("i1r0n0"), at("2017-03-01T00:00:00Z")}, {node("i1r0n1"), at("2017-03-01T01:00:00Z")}};
  const auto r = evaluate(Variant::raw, d, d);
  EXPECT_EQ(r.true_positives, 2u);
  EXPECT_DOUBLE_EQ(r.precision, 1.0);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);
}

TEST(MatchDetections, DisjointListsScoreZero) {
  const std::vector<Detection> d = {{node("i1r0n0"), at("2017-03-01T00:00:00Z")}};
  const std::vector<Detection> t = {{node("i1r0n1"), at("2017-03-01T00:00:00Z")},
                                    {node("i1r0n0"), at("2017-03-01T00:10:01Z")}};
  const auto r = evaluate(Variant::raw, d, t);
  EXPECT_EQ(r.true_positives, 0u);
  EXPECT_EQ(r.false_positives, 1u);
  EXPECT_EQ(r.false_negatives, 2u);
  EXPECT_DOUBLE_EQ(r.precision, 0.0);
  EXPECT_DOUBLE_EQ(r.recall, 0.0);
}

TEST(MatchDetections, ToleranceIsInclusiveAndOneToOne) {
  const std::vector<Detection> d = {{node("i1r0n0"), at("2017-03-01T00:10:00Z")},
                                    {node("i1r0n0"), at("2017-03-01T00:11:00Z")}};
  const std::vector<Detection> t = {{node("i1r0n0"), at("2017-03-01T00:00:00Z")}};
  const auto m = match_detections(d, t);
  EXPECT_EQ(m.true_positives, 1u);
  EXPECT_EQ(m.false_positives, 1u);
  EXPECT_EQ(m.pairs, (std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}}));
  EXPECT_THROW(match_detections(d, t, Duration{-1}), ContractViolation);
}

TEST(Evaluate, EmptyConventions) {
  const auto none = evaluate(Variant::raw, {}, {});
  EXPECT_DOUBLE_EQ(none.precision, 1.0);
  EXPECT_DOUBLE_EQ(none.recall, 1.0);
  EXPECT_TRUE(none.no_detections);
  const std::vector<Detection> t = {{node("i1r0n0"), at("2017-03-01T00:00:00Z")}};
  const auto missed = evaluate(Variant::raw, {}, t);
  EXPECT_DOUBLE_EQ(missed.precision, 1.0);
  EXPECT_DOUBLE_EQ(missed.recall, 0.0);
  EXPECT_TRUE(missed.no_detections);
  const auto spurious = evaluate(Variant::raw, t, {});
  EXPECT_DOUBLE_EQ(spurious.precision, 0.0);
  EXPECT_DOUBLE_EQ(spurious.recall, 1.0);
}

TEST(MatchDetections, GreedyEqualsMaximumBipartiteMatching) {
  Rng rng(31);
  for (int round = 0; round < 2000; ++round) {
    const auto d = random_events(rng, 10);
    const auto t = random_events(rng, 10);
    const auto tol = minutes(rng.uniform_int(0, 15));
    const auto m = match_detections(d, t, tol);
    ASSERT_EQ(m.true_positives, max_matching(d, t, tol));
    for (auto [i, j] : m.pairs) {
      EXPECT_EQ(d[i].node, t[j].node);
      EXPECT_LE(std::abs((d[i].instant - t[j].instant).count()), tol.count());
    }
  }
}

TEST(MatchDetections, SymmetricInRoles) {
  Rng rng(32);
  for (int round = 0; round < 500; ++round) {
    const auto a = random_events(rng, 10);
    const auto b = random_events(rng, 10);
    const auto ab = match_detections(a, b);
    const auto ba = match_detections(b, a);
    EXPECT_EQ(ab.true_positives, ba.true_positives);
    EXPECT_EQ(ab.false_positives, ba.false_negatives);
  }
}

TEST(Reports, CsvAndTable) {
  const std::vector<Detection> t = {{node("i1r0n0"), at("2017-03-01T00:00:00Z")}};
  const std::vector<EvaluationReport> reports = {evaluate(Variant::raw, t, t), evaluate(Variant::filtered_anonymized, {}, t)};
  std::ostringstream csv, table;
  write_reports_csv(csv, reports);
  write_reports_table(table, reports);
  EXPECT_NE(csv.str().find("raw,1,0,0,1.0000,1.0000,600,false"), std::string::npos);
  EXPECT_NE(csv.str().find("filtered_anonymized,0,0,1,1.0000,0.0000,600,true"), std::string::npos);
  EXPECT_NE(table.str().find("(no detections)"), std::string::npos);
  for (auto v : kVariants) EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_FALSE(parse_variant("all"));
}
