#include "peerperf/sim/network.hpp"

#include <algorithm>
#include <cmath>

#include "peerperf/error.hpp"

namespace peerperf::sim {

std::size_t NetworkModel::region_index(const std::string& region) const {
  auto it = std::find(regions.begin(), regions.end(), region);
  if (it == regions.end()) throw Error(ErrorCode::kScenarioInvalid, "unknown region " + region);
  return static_cast<std::size_t>(it - regions.begin());
}

std::string NetworkModel::problem() const {
  const auto n = regions.size();
  if (n == 0) return "no regions";
  if (latency_ms.size() != n) return "latency matrix shape";
  for (std::size_t i = 0; i < n; ++i) {
    if (latency_ms[i].size() != n) return "latency matrix shape";
    for (std::size_t j = 0; j < n; ++j) {
      if (!(latency_ms[i][j] > 0)) return "latency must be positive";
      if (latency_ms[i][j] != latency_ms[j][i]) return "latency matrix not symmetric";
    }
  }
  if (!(bandwidth_bps > 0)) return "bandwidth must be positive";
  if (jitter_ms < 0 || processing_ms < 0 || connection_setup_ms < 0) return "negative delay";
  return {};
}

NetworkModel default_region_matrix() {
  NetworkModel m;
  m.regions = {"asia-east2", "europe-west3", "us-west1", "south-america-east1", "me-west1",
               "australia-southeast1"};
  m.latency_ms = {
      {1, 90, 70, 150, 80, 60},     {90, 1, 75, 100, 30, 140},   {70, 75, 1, 90, 105, 70},
      {150, 100, 90, 1, 115, 155},  {80, 30, 105, 115, 1, 140},  {60, 140, 70, 155, 140, 1},
  };
  m.jitter_ms = 2;
  m.bandwidth_bps = 4e9;
  return m;
}

}  // namespace peerperf::sim
