#pragma once

// Operation-based CRDT append-only log: a Merkle-DAG of entries, each
// carrying a Lamport clock and the author's view of the heads at append time.

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "peerperf/block_store.hpp"
#include "peerperf/cid.hpp"

namespace peerperf {

struct LogEntry {
  Cid id;
  std::string log_id;
  std::string author;
  std::uint64_t clock = 0;
  std::vector<Cid> parents;  // ascending, unique
  Cid payload;

  // Builds an entry and derives its id from the canonical encoding.
  static LogEntry make(std::string log_id, std::string author, std::uint64_t clock,
                       std::vector<Cid> parents, Cid payload);

  // Inverse of canonical_encoding(); the id is recomputed from `text`.
  // Throws Error(kIntegrityFailure) on malformed input.
  static LogEntry decode(std::string_view text);

  // Encoding of every field except the id; id == Cid::of(encoding).
  std::string canonical_encoding() const;
  bool verify() const;

  friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

class Log {
 public:
  explicit Log(std::string log_id) : log_id_(std::move(log_id)) {}

  const std::string& log_id() const { return log_id_; }

  // Throws Error(kPayloadMissing) if `payload` is not in `store`.
  const LogEntry& append(const std::string& author, const Cid& payload, const BlockStore& store);

  // Merges `incoming`. Either every entry is accepted or the log is left
  // untouched and Error(kIntegrityFailure | kDanglingParent) names the
  // offending entry.
  void join(std::span<const LogEntry> incoming);

  // Ascending by (clock, id); parents always precede children.
  std::vector<LogEntry> total_order() const;

  // Subset of `remote_heads` not held locally.
  std::set<Cid> missing_entries(const std::set<Cid>& remote_heads) const;

  const std::set<Cid>& heads() const { return heads_; }
  bool contains(const Cid& id) const { return entries_.contains(id); }
  const LogEntry* find(const Cid& id) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::map<Cid, LogEntry>& entries() const { return entries_; }

  friend bool operator==(const Log& a, const Log& b) {
    return a.log_id_ == b.log_id_ && a.entries_ == b.entries_ && a.heads_ == b.heads_;
  }

 private:
  void insert(const LogEntry& entry);

  std::string log_id_;
  std::map<Cid, LogEntry> entries_;
  std::set<Cid> heads_;
  std::set<Cid> referenced_;
  std::set<std::pair<std::uint64_t, Cid>> order_;
};

}  // namespace peerperf
