#pragma once

// The replicated contributions store (on top of Log) and the local,
// never-replicated validations store.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "peerperf/block_store.hpp"
#include "peerperf/log.hpp"
#include "peerperf/records.hpp"

namespace peerperf {

inline constexpr std::string_view kContributionsLogId = "contributions/v1";

// Equality predicates over contribution attributes; all must match.
using AttributeFilter = std::map<std::string, std::string>;

struct ContributionEntry {
  Cid entry_id;
  Cid payload_cid;
  Contribution contribution;
};

// Throws Error(kSchemaViolation) listing every bad field, comma separated
// (attribute problems prefixed with "attributes.").
void check_contribution_schema(const PerformanceRecord& record, const Attributes& attributes);

class ContributionsStore {
 public:
  ContributionsStore() : log_(std::string(kContributionsLogId)) {}

  // Stores the record and the announcement as local (pinned) blocks and
  // appends a log entry. Throws Error(kSchemaViolation) listing every bad
  // field, comma separated.
  ContributionEntry contribute(BlockStore& blocks, const PerformanceRecord& record,
                               const Attributes& attributes, const std::string& author,
                               std::int64_t now_ms);

  // Log order; entries whose announcement block is not held yet are skipped.
  std::vector<ContributionEntry> list_contributions(BlockStore& blocks,
                                                    const AttributeFilter& filter = {}) const;

  Log& log() { return log_; }
  const Log& log() const { return log_; }

 private:
  std::optional<Contribution> decode_payload(BlockStore& blocks, const Cid& payload) const;

  Log log_;
  mutable std::map<Cid, Contribution> decoded_;
};

class ValidationsStore {
 public:
  ValidationsStore() = default;
  // Replays <path> (one canonical record per line, last write wins) and
  // appends every subsequent upsert to it.
  explicit ValidationsStore(std::filesystem::path journal);

  void record_validation(const ValidationRecord& v);

  // Newest record (by produced_at, then version) for the validator.
  std::optional<ValidationRecord> get_validation(const Cid& subject,
                                                 const std::string& validator_id) const;
  std::optional<ValidationRecord> get_validation(const Cid& subject, const std::string& validator_id,
                                                 const std::string& version) const;
  // Newest record for the subject from any validator.
  std::optional<ValidationRecord> latest_for(const Cid& subject) const;

  std::size_t size() const { return records_.size(); }
  std::vector<ValidationRecord> all() const;

 private:
  using Key = std::tuple<Cid, std::string, std::string>;
  void upsert(const ValidationRecord& v);

  std::map<Key, ValidationRecord> records_;
  std::optional<std::filesystem::path> journal_;
};

}  // namespace peerperf
