#pragma once

// The contribution pipeline and the filtered contributions view. Both work
// on a protocol::Peer directly, so the daemon's event loop and the tests
// share one implementation.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "peerperf/canonical.hpp"
#include "peerperf/protocol/peer.hpp"
#include "peerperf/stores.hpp"

namespace peerperf::node {

enum class ValidityPolicy { kAny, kNetworkOrOwnValid, kOwnValidOnly };

std::string_view to_string(ValidityPolicy p);
std::optional<ValidityPolicy> parse_validity_policy(std::string_view text);

struct QueryRow {
  ContributionEntry entry;
  bool available = false;  // data block held locally
  std::optional<ValidationRecord> own;
  std::optional<VoteOutcome> network;

  // own_valid | own_invalid | own_inconclusive | network_valid |
  // network_invalid | undecided | unvalidated
  std::string status() const;
  Json to_json() const;
};

// No network traffic. Under network_or_own_valid an own verdict wins; the
// network verdict is used only when there is no own valid/invalid verdict.
std::vector<QueryRow> query_contributions(protocol::Peer& peer, const AttributeFilter& filter,
                                          ValidityPolicy policy);

struct ContributeResult {
  std::optional<ContributionEntry> contribution;
  std::optional<Cid> private_cid;
  std::optional<ValidationRecord> verdict;

  Json to_json() const;
};

struct ContributeOutcome {
  ContributeResult result;
  protocol::Step step;
};

// share=false: stores the record as a private block, no log entry.
// share=true: schema check (kSchemaViolation), local validation recorded as
// the own verdict, then publication unless the verdict is invalid and
// `force` is false (kValidationFailedPrePublish).
ContributeOutcome contribute_pipeline(protocol::Peer& peer, const PerformanceRecord& record,
                                      const Attributes& attributes, bool share, bool force,
                                      std::int64_t now_ms, protocol::Time now);

// Private records held by the peer, decoded (blocks that are not records are
// skipped).
std::vector<std::pair<Cid, PerformanceRecord>> private_records(protocol::Peer& peer);

}  // namespace peerperf::node
