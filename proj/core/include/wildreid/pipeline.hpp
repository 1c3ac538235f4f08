#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wildreid/catalog.hpp"
#include "wildreid/evaluation.hpp"
#include "wildreid/features.hpp"
#include "wildreid/geomverify.hpp"
#include "wildreid/matchgraph.hpp"
#include "wildreid/splitgen.hpp"
#include "wildreid/synthgen.hpp"

namespace wildreid {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message)
      : std::runtime_error("stage '" + stage + "': " + message),
        stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct SplitSpec {
  std::string name;
  SplitPolicy policy = SplitPolicy::time_proportion;
  double proportion = 0.5;
  std::optional<Date> cutoff;
  std::optional<long> window_days = 365;
  std::string template_name;  // random_matched only
  std::uint64_t seed = 0;
};

struct PipelineConfig {
  // Exactly one catalog source.
  std::optional<std::string> manifest_path;
  std::optional<SynthConfig> synth;

  std::vector<SplitSpec> splits;
  FeatureParams features;
  VerifyThresholds verify;
  std::string out_dir = "wildreid-run";
  unsigned workers = 0;  // 0 = hardware concurrency
  std::uint64_t seed = 1;

  // Optional candidate-pair blocking: verify only the blocking_k nearest
  // images by mean descriptor instead of all pairs. An approximation; off
  // by default.
  bool pair_blocking = false;
  int blocking_k = 50;

  std::optional<std::size_t> max_hops;  // identity-propagation hop limit
};

/// Reads a JSON pipeline config; see README for the schema.
PipelineConfig load_pipeline_config(const std::string& path);

struct SplitOutcome {
  Split split;
  ProblemKind kind;
  ClosedSetReport closed;
  OpenSetReport open;
};

struct RunResult {
  std::string out_dir;
  Catalog catalog;
  std::map<std::string, SplitOutcome> splits;
  TimeGapCurve curve;
  std::size_t cached_features = 0;   // cache hits
  std::size_t cached_decisions = 0;  // 1 when the decision file was reused
};

/// Runs synth/ingest -> split -> extract -> verify -> predict -> score and
/// writes all artifacts under out_dir (catalog/, splits/, features/,
/// decisions/, graph/, reports/). Feature and decision caches are keyed by
/// content+parameter hashes; set WILDREID_CACHE_ROOT to share them across
/// runs. `out_dir_override` replaces config.out_dir when nonempty.
RunResult run_pipeline(const PipelineConfig& config,
                       const std::string& out_dir_override = {});

struct MetricSummary {
  double precision = 0;
  double recall = 0;
  long n_query = 0;
};

MetricSummary metrics_of(const ClosedSetReport& r);
MetricSummary metrics_of(const OpenSetReport& r);

struct BiasSummary {
  double precision_a = 0, precision_b = 0;
  double recall_a = 0, recall_b = 0;
  double recall_delta = 0;          // a - b
  double overestimation_ratio = 0;  // recall_a / recall_b
};

/// a is conventionally the time-unaware split, b the time-aware one.
/// Throws ConfigError when the query universes differ in size.
BiasSummary compare_splits(const MetricSummary& a, const MetricSummary& b);

void save_bias_summary(const BiasSummary& summary, const std::string& path);

}  // namespace wildreid
