#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace peerperf::sim {

// Synthetic network: one-way latencies between regions, bounded uniform
// jitter, and a per-peer egress cap shared by all of that peer's links.
struct NetworkModel {
  std::vector<std::string> regions;
  std::vector<std::vector<double>> latency_ms;  // one-way, symmetric
  double jitter_ms = 0;
  double bandwidth_bps = 4e9;
  // CPU time a peer spends on each inbound message.
  double processing_ms = 0.1;
  // Extra CPU time for HELLO / HELLO_ACK (connection setup and key checks).
  double connection_setup_ms = 20;

  std::size_t region_index(const std::string& region) const;
  double latency(std::size_t a, std::size_t b) const { return latency_ms.at(a).at(b); }
  // Empty string when valid, otherwise the first problem found.
  std::string problem() const;
};

// Six regions with documented one-way latencies (ms):
//
//                 asia  eu    us    sa    me    au
//   asia-east2      1   90    70   150    80    60
//   europe-west3   90    1    75   100    30   140
//   us-west1       70   75     1    90   105    70
//   s-america-e1  150  100    90     1   115   155
//   me-west1       80   30   105   115     1   140
//   australia-se1  60  140    70   155   140     1
//
// The matrix satisfies the triangle inequality; jitter is ±2 ms and egress
// is 4 Gbit/s.
NetworkModel default_region_matrix();

}  // namespace peerperf::sim
