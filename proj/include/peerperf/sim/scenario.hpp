#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "peerperf/config.hpp"
#include "peerperf/records.hpp"
#include "peerperf/sim/metrics.hpp"
#include "peerperf/sim/network.hpp"
#include "peerperf/sim/simulator.hpp"
#include "peerperf/validation.hpp"

namespace peerperf::sim {

enum class ScenarioKind { kTransfer, kFuzz, kReplicationBurst, kBootstrapScaling, kValidationScaling };

std::string_view to_string(ScenarioKind k);
std::optional<ScenarioKind> parse_scenario_kind(std::string_view text);

struct Scenario {
  ScenarioKind kind = ScenarioKind::kReplicationBurst;
  std::uint64_t seed = 1;
  NetworkModel network = default_region_matrix();
  // Region per peer. Empty means round robin over network.regions.
  std::vector<std::string> placements;
  std::size_t peers = 32;

  // Protocol knobs shared by all peers.
  double gossip_interval_ms = 1000;
  std::size_t fan_out = 4;
  double response_timeout_ms = 2000;
  std::size_t fetch_batch = 256;
  VotePolicy vote_policy;

  // replication_burst
  std::size_t file_count = 1113;
  double mean_file_bytes = 9060;
  double submit_interval_ms = 20;
  bool full_scale = false;  // file_count = 11133

  // transfer
  std::vector<std::size_t> file_sizes = {1024, 9060, 65536, 262144, 1048576};

  // bootstrap_scaling
  std::size_t joiners = 52;
  std::size_t initial_entries = 150;
  double join_gap_s = 60;
  double late_join_gap_s = 30;
  std::size_t late_after = 12;
  double time_scale = 0.1;

  // fuzz
  std::size_t extra_edges = 8;
  std::size_t contributions = 40;
  std::size_t churn_events = 30;
  double active_s = 20;

  // validation_scaling
  std::vector<std::uint64_t> point_counts = {0, 1, 10, 100, 1000};
  std::uint64_t batch_overhead_ms = 5;

  double limit_s = 600;

  // Empty string when valid.
  std::string problem() const;
};

// Defaults for each kind; the root of replication_burst and
// bootstrap_scaling sits in asia-east2.
Scenario default_scenario(ScenarioKind kind);

// Same key = value format as the node config. `kind` selects the defaults,
// every other key overrides one field. Throws Error(kScenarioInvalid).
Scenario parse_scenario(const KeyValues& kv);
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);

// A plausible random trace whose canonical encoding is `target_bytes` long
// (or as short as possible when the target is below the unpadded size).
PerformanceRecord synthetic_record(std::mt19937_64& rng, std::size_t target_bytes);
Attributes synthetic_attributes(const PerformanceRecord& record, const std::string& region);

// The cost models validation_scaling runs, one per shape.
std::vector<CostModel> scaling_cost_models(std::uint64_t batch_overhead_ms);

struct ScenarioRun {
  MetricsReport report;
  std::unique_ptr<Simulator> sim;
};

// Throws Error(kScenarioInvalid). Deterministic in (scenario, seed).
ScenarioRun execute_scenario(const Scenario& s);
MetricsReport run_scenario(const Scenario& s);

}  // namespace peerperf::sim
