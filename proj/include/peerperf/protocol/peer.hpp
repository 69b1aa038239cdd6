#pragma once

// Protocol state machine for one peer. It performs no I/O and reads no
// clocks: every entry point takes the current time and returns a Step
// listing the frames to send and the effects for the driver (the TCP daemon
// or the simulator) to carry out. Given the same state and inputs it always
// produces the same outputs.

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "peerperf/block_store.hpp"
#include "peerperf/protocol/handshake.hpp"
#include "peerperf/protocol/messages.hpp"
#include "peerperf/stores.hpp"
#include "peerperf/validation.hpp"

namespace peerperf::protocol {

using Time = std::chrono::microseconds;

enum class PinPolicy { kPinAllContributions, kPinOnUse, kPinNone };

std::string_view to_string(PinPolicy p);
std::optional<PinPolicy> parse_pin_policy(std::string_view text);

struct PeerConfig {
  std::string passphrase;
  std::string region;
  std::string address;
  std::chrono::milliseconds gossip_interval{1000};
  std::size_t fan_out = 4;
  std::chrono::milliseconds response_timeout{2000};
  // Upper bound on entries per ENTRIES reply (requested entries plus
  // ancestors the requester probably lacks).
  std::size_t fetch_batch = 256;
  // Dial every peer learned from a HELLO_ACK peer list.
  bool auto_connect = true;
  PinPolicy pin_policy = PinPolicy::kPinAllContributions;
  VotePolicy vote_policy;
  ValidatorSpec validator;
};

enum class EventKind {
  kSessionEstablished,
  kSessionClosed,
  kAuthFailed,
  kHandshakeTimeout,
  kProtocolViolation,
  kEntryJoined,
  kEntryReplicated,
  kEntryRejected,
  kFetchSucceeded,
  kFetchFailed,
  kBootstrapComplete,
  kValidationCompleted,
  kVoteDecided,
};

std::string_view to_string(EventKind k);

struct Event {
  EventKind kind;
  PeerId peer;
  std::optional<Cid> subject;
  std::string detail;
};

struct Outbound {
  PeerId to;
  Message message;
};

struct Step {
  std::vector<Outbound> out;
  std::vector<PeerId> disconnect;
  std::vector<std::string> connect;  // addresses to dial, then initiate_handshake()
  std::vector<ValidationTask> start_validation;
  std::vector<Event> events;

  void merge(Step&& other);
  bool empty() const {
    return out.empty() && disconnect.empty() && connect.empty() && start_validation.empty() &&
           events.empty();
  }
};

// Uniform sample of min(fan_out, |peers|) peers, returned in input order.
std::vector<PeerId> select_gossip_targets(const std::vector<PeerId>& peers, std::size_t fan_out,
                                          std::mt19937_64& rng);

class Peer {
 public:
  Peer(PeerConfig config, PeerId id, BlockStore blocks, ValidationsStore validations,
       std::uint64_t seed);

  const PeerInfo& self() const { return self_; }
  const PeerId& id() const { return self_.id; }
  const PeerConfig& config() const { return config_; }

  // --- sessions -----------------------------------------------------------
  // HELLO for a new outbound connection to `address`.
  Hello initiate_handshake(const std::string& address, Time now);
  Step handle_message(const PeerId& from, const Message& msg, Time now);
  Step on_disconnect(const PeerId& peer, Time now);
  bool authenticated(const PeerId& peer) const { return sessions_.contains(peer); }
  std::vector<PeerId> session_peers() const;
  std::vector<PeerInfo> session_infos() const;
  std::optional<Time> session_rtt(const PeerId& peer) const;
  bool dialing(const std::string& address) const;

  // --- periodic work ------------------------------------------------------
  // HEADS to fan_out random authenticated peers.
  Step gossip_tick(Time now);
  // Expires outstanding requests, retries replication, closes vote rounds.
  Step poll(Time now);

  // --- bootstrap ----------------------------------------------------------
  // Marks the start of a bootstrap; the first peer to accept our HELLO is
  // taken as the bootstrap peer and its heads at that moment are the target.
  void begin_bootstrap(Time now);
  bool bootstrapping() const { return bootstrap_.has_value() && !bootstrap_->complete; }
  std::optional<Time> bootstrap_time() const { return bootstrap_time_; }

  // --- local operations ---------------------------------------------------
  struct Contributed {
    ContributionEntry entry;
    Step step;
  };
  Contributed contribute(const PerformanceRecord& record, const Attributes& attributes,
                         std::int64_t now_ms, Time now);
  // Stores a block that must never leave this peer.
  Cid store_private(ByteView bytes);
  bool is_private(const Cid& cid) const { return deny_.contains(cid); }
  const std::set<Cid>& deny_list() const { return deny_; }
  void restore_deny_list(const std::set<Cid>& cids) { deny_ = cids; }

  // Local hit: kFetchSucceeded immediately with no frames. Otherwise WANT to
  // every authenticated peer; resolves to kFetchSucceeded or kFetchFailed.
  Step fetch(const Cid& cid, bool pin, Time now);

  Step request_votes(const Cid& subject, Time now);
  std::optional<VoteOutcome> network_verdict(const Cid& subject) const;
  bool vote_pending(const Cid& subject) const { return votes_.contains(subject); }

  // Throws Error(kNotFound) if a subject block is absent. Coalesces with
  // in-flight tasks; the task to run (if any) is in Step::start_validation.
  Step schedule_validation(std::span<const Cid> subjects);
  Step complete_validation(std::uint64_t task_id, std::span<const ValidationRecord> records);
  const ValidationScheduler& scheduler() const { return scheduler_; }

  // Rebuilds the log from entry blocks reachable from `heads`.
  void restore_log(const std::set<Cid>& heads);

  // --- state --------------------------------------------------------------
  BlockStore& blocks() { return blocks_; }
  const BlockStore& blocks() const { return blocks_; }
  ContributionsStore& contributions() { return contributions_; }
  const Log& log() const { return contributions_.log(); }
  ValidationsStore& validations() { return validations_; }
  const ValidationsStore& validations() const { return validations_; }
  bool replicated(const Cid& entry) const;
  std::size_t pending_replications() const { return replication_.size(); }

 private:
  struct Session {
    PeerInfo info;
    Time established{};
    std::optional<Time> rtt;
  };
  struct PendingHello {
    std::string address;
    Time sent{};
  };
  struct InFlight {
    PeerId peer;
    Time deadline{};
  };
  struct WantState {
    std::set<PeerId> asked;
    std::set<PeerId> missing;
    Time deadline{};
    bool for_replication = false;
    bool for_fetch = false;
    bool pin = false;
  };
  struct Replication {
    bool need_payload = true;
    std::optional<Cid> data;  // set while the data block is outstanding
    PeerId source;
  };
  struct BootstrapState {
    Time started{};
    std::optional<PeerId> root;
    std::optional<std::set<Cid>> snapshot;
    std::set<std::string> awaiting;
    Time settle_deadline{};
    bool source_chosen = false;
    bool complete = false;
    std::optional<std::set<Cid>> target_entries;
  };
  struct VoteRound {
    std::set<PeerId> asked;
    std::map<PeerId, std::optional<ValidationRecord>> responses;
    Time deadline{};
  };

  Step on_hello(const PeerId& from, const Hello& m, Time now);
  Step on_hello_ack(const PeerId& from, const HelloAck& m, Time now);
  Step on_heads(const PeerId& from, const Heads& m, Time now);
  Step on_fetch(const PeerId& from, const FetchEntries& m);
  Step on_entries(const PeerId& from, const Entries& m, Time now);
  Step on_want(const PeerId& from, const Want& m);
  Step on_block(const PeerId& from, const Block& m, Time now);
  Step on_block_missing(const PeerId& from, const BlockMissing& m, Time now);
  Step on_validation_query(const PeerId& from, const ValidationQuery& m);
  Step on_validation_response(const PeerId& from, const ValidationResponse& m, Time now);

  bool fetch_deferred() const;
  void request_entries(const PeerId& to, const std::set<Cid>& cids, Time now, Step& step);
  void resolve_pending(const PeerId& from, Time now, Step& step);
  void start_replication(const LogEntry& entry, const PeerId& source, Time now, Step& step);
  void want_block(const Cid& cid, const PeerId& preferred, Time now, Step& step);
  void block_arrived(const Cid& cid, Time now, Step& step);
  void finish_replication(const Cid& entry, Step& step);
  void maybe_choose_source(Time now, Step& step);
  void check_bootstrap(Time now, Step& step);
  void decide_vote(const Cid& subject, Step& step);
  std::optional<PeerId> random_session(const std::set<PeerId>& exclude);
  std::optional<PeerId> entry_source(const Cid& entry) const;
  Heads heads_message() const;

  PeerConfig config_;
  PeerInfo self_;
  Digest key_;
  std::mt19937_64 rng_;

  BlockStore blocks_;
  ContributionsStore contributions_;
  ValidationsStore validations_;
  std::set<Cid> deny_;
  ValidationScheduler scheduler_;

  std::map<PeerId, Session> sessions_;
  std::map<Nonce, PendingHello> pending_hellos_;
  std::set<Nonce> seen_nonces_;
  std::map<PeerId, std::set<Cid>> peer_heads_;

  std::map<Cid, LogEntry> pending_entries_;
  std::map<Cid, PeerId> entry_sources_;
  std::map<Cid, InFlight> in_flight_;
  std::map<Cid, WantState> wants_;
  std::map<Cid, Replication> replication_;
  std::map<Cid, std::set<Cid>> waiting_on_block_;  // block -> entries

  std::optional<BootstrapState> bootstrap_;
  std::optional<Time> bootstrap_time_;

  std::map<Cid, VoteRound> votes_;
  std::map<Cid, VoteOutcome> verdicts_;
};

}  // namespace peerperf::protocol
