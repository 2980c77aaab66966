#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sgscan/anomaly_detector.hpp"
#include "sgscan/anonymizer.hpp"
#include "sgscan/corpus_index.hpp"
#include "sgscan/datasources.hpp"
#include "sgscan/evaluator.hpp"
#include "sgscan/failure_classifier.hpp"
#include "sgscan/log_model.hpp"
#include "sgscan/outage_detector.hpp"
#include "sgscan/parallel.hpp"
#include "sgscan/vicinity.hpp"

namespace sgscan {

struct PipelineConfig {
  SubstitutionRuleSet rules = SubstitutionRuleSet::defaults();
  BootFootprintSpec footprint;
  OutageOptions outage;
  Duration correlation_window = minutes(10);
  Perspective vicinity = Perspective::combined;
  Duration failure_interval = minutes(10);
  DetectionOptions detection;
  ExtractionOptions extraction;
  double percentile = 99.5;
  PeriodicOptions periodic;
  Duration tolerance = minutes(10);
  unsigned jobs = 1;

  void validate() const {
    if (detection.window <= Duration::zero() || detection.cadence <= Duration::zero() ||
        tolerance < Duration::zero() || correlation_window <= Duration::zero() ||
        failure_interval <= Duration::zero() || outage.silence_threshold <= Duration::zero()) {
      throw Error("pipeline durations must be positive");
    }
    if (!(detection.threshold.alpha > 0.0) || detection.threshold.tau_min < 0.0) throw Error("alpha must be positive");
    if (!(percentile >= 0.0 && percentile <= 100.0)) throw Error("percentile must be in [0, 100]");
  }
};

struct PipelineInputs {
  const std::vector<LogEntry>* entries = nullptr;
  Topology topology;
  ObservationRange range{Instant{}, Instant{} + Duration{1}};
  std::vector<JobRecord> jobs;
  std::vector<MaintenanceWindow> maintenance;
  std::vector<OutageRecord> outage_db;
  /// Reference failures; when absent, the classifier's regular failures are used.
  std::optional<std::vector<Detection>> truth;
};

struct VariantRun {
  Variant variant = Variant::raw;
  std::vector<OutageEvent> outages;
  std::vector<FailureEvent> failures;
  SweepResult sweep;
  std::vector<Detection> detections;
  std::vector<Detection> truth;
  EvaluationReport report;
};

/// The two unfiltered indices built from one raw corpus.
struct PreparedCorpus {
  CorpusIndex raw;
  CorpusIndex anonymized;
};

inline PreparedCorpus prepare_corpus(const std::vector<LogEntry>& entries, const SubstitutionRuleSet& rules) {
  PreparedCorpus p;
  p.raw = CorpusIndex::from_raw(entries, rules);
  p.anonymized = CorpusIndex::from_anonymized(anonymize_stream(entries, rules));
  return p;
}

inline AssignmentProvider make_assignment_provider(Perspective p, const Topology& topo,
                                                   const std::vector<JobRecord>& jobs,
                                                   const std::vector<FailureEvent>& failures,
                                                   const PipelineConfig& cfg) {
  switch (p) {
    case Perspective::hardware: {
      auto a = hardware_vicinity(topo);
      return [a](Instant) { return a; };
    }
    case Perspective::location: {
      auto a = location_vicinity(topo);
      return [a](Instant) { return a; };
    }
    case Perspective::combined: {
      auto a = combined_vicinity(topo);
      return [a](Instant) { return a; };
    }
    case Perspective::allocation:
      return [&jobs, &topo](Instant t) { return allocation_vicinity(jobs, t, &topo); };
    case Perspective::time_of_failure: {
      // Chains whose failures fall within one window of the moment form its groups.
      auto chains = time_of_failure_vicinity(regular_failures(failures), cfg.failure_interval);
      const Duration w = cfg.detection.window;
      return [chains, w](Instant t) {
        VicinityAssignment a;
        a.perspective = Perspective::time_of_failure;
        a.at = t;
        for (const auto& c : chains) {
          if (*c.at <= t + w && t - w <= *c.at) a.groups.push_back(c.groups.front());
        }
        return a;
      };
    }
  }
  throw ContractViolation("unknown perspective");
}

/// Outage detection and classification on one index.
inline std::vector<FailureEvent> detect_and_classify(const CorpusIndex& index, const PipelineInputs& in,
                                                     const PipelineConfig& cfg, std::vector<OutageEvent>* outages_out = nullptr) {
  const auto fp = resolve_footprint(cfg.footprint, index, cfg.rules);
  auto outages = detect_outages(index, fp, in.range, cfg.outage, cfg.jobs);
  const JobIndex job_index(in.jobs);
  auto failures = classify_all(outages, ClassifierInputs{&in.maintenance, &job_index, &in.outage_db, cfg.correlation_window});
  if (outages_out != nullptr) *outages_out = std::move(outages);
  return failures;
}

inline std::vector<Detection> failures_as_detections(const std::vector<FailureEvent>& failures) {
  std::vector<Detection> out;
  for (const auto& f : failures) {
    if (f.label == FailureLabel::regular_failure) out.push_back({f.outage.node, f.outage.outage_time});
  }
  return out;
}

inline ExtractionOptions extraction_options(const PipelineConfig& cfg) {
  auto e = cfg.extraction;
  e.window = cfg.detection.window;
  return e;
}

/// One data-format variant end to end: (filter) → outages → classification →
/// vicinity → SG sweep → detections → evaluation.
inline VariantRun run_variant(const PreparedCorpus& corpus, Variant v, const PipelineInputs& in,
                              const PipelineConfig& cfg) {
  cfg.validate();
  VariantRun run;
  run.variant = v;
  const CorpusIndex& base = is_anonymized(v) ? corpus.anonymized : corpus.raw;
  // Outages come from the unfiltered data: filtering must not hide boots.
  run.failures = detect_and_classify(base, in, cfg, &run.outages);
  std::optional<CorpusIndex> filtered;
  if (v == Variant::filtered_raw) filtered = filter_frequent_raw(base, cfg.percentile);
  if (v == Variant::filtered_anonymized) filtered = filter_frequent_anonymized(base, cfg.percentile, cfg.periodic);
  const CorpusIndex& index = filtered ? *filtered : base;
  const auto provider = make_assignment_provider(cfg.vicinity, in.topology, in.jobs, run.failures, cfg);
  run.sweep = run_detection(index, provider, in.range, cfg.detection, cfg.jobs);
  run.detections = extract_detections(run.sweep, index, in.maintenance, extraction_options(cfg));
  run.truth = in.truth ? *in.truth : failures_as_detections(run.failures);
  run.report = evaluate(v, run.detections, run.truth, cfg.tolerance);
  return run;
}

inline std::vector<VariantRun> evaluate_variants(const PreparedCorpus& corpus, const PipelineInputs& in,
                                                 const PipelineConfig& cfg,
                                                 const std::vector<Variant>& variants = {std::begin(kVariants),
                                                                                         std::end(kVariants)}) {
  std::vector<VariantRun> runs(variants.size());
  PipelineConfig inner = cfg;
  const unsigned outer = std::min<unsigned>(cfg.jobs, static_cast<unsigned>(variants.size()));
  inner.jobs = std::max(1u, cfg.jobs / std::max(1u, outer));
  parallel_for(variants.size(), outer, [&](std::size_t i) { runs[i] = run_variant(corpus, variants[i], in, inner); });
  return runs;
}

}  // namespace sgscan
