#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "peerperf/canonical.hpp"

namespace peerperf::sim {

// One row of events.csv.
struct EventRecord {
  std::int64_t time_us = 0;
  std::string peer;
  std::string type;
  std::string subject;
  double value = 0;

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

// Event types the summaries are derived from:
//   peer                    subject = region
//   contribution_submitted  subject = entry id
//   entry_replicated        subject = entry id (remote peers only)
//   bootstrap_start         value = cluster size at join
//   bootstrap_complete
//   validation_run          subject = label, value = simulated ms
//   validation_query_latency subject = label, value = us
//   transfer                subject = block size, value = us
//   converged               value = 1 | 0
struct MetricsReport {
  std::vector<EventRecord> events;
  Json summary;
};

inline constexpr std::int64_t kReplicationTargetUs = 1'000'000;

// Pure function of the event list.
Json summarize(const std::vector<EventRecord>& events);

// True iff `report.summary` equals the summary recomputed from its events.
bool replay_check(const MetricsReport& report);

// Spearman rank correlation (average ranks for ties); 0 when undefined.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

// Trend and locality checks over summary["bootstrap"]["joins"]. A joiner is
// first-in-region when no earlier peer (root included) shares its region;
// it is compared with later same-region joiners whose cluster size is at
// most the largest first-in-region cluster size plus the region count.
struct BootstrapAnalysis {
  double spearman = 0;
  double first_in_region_median_us = 0;
  double same_region_median_us = 0;
  std::size_t first_in_region = 0;
  std::size_t same_region = 0;

  bool trend() const { return spearman > 0.5; }
  bool locality() const {
    return first_in_region > 0 && same_region > 0 && same_region_median_us < first_in_region_median_us;
  }
};

BootstrapAnalysis analyze_bootstrap(const Json& summary, const std::string& root_region);

std::string events_csv(const std::vector<EventRecord>& events);
std::string summary_json(const MetricsReport& report);
void write_report(const MetricsReport& report, const std::filesystem::path& dir);

}  // namespace peerperf::sim
