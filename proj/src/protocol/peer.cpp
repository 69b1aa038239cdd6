#include "peerperf/protocol/peer.hpp"

#include <algorithm>
#include <functional>

#include "peerperf/error.hpp"

namespace peerperf::protocol {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

template <typename T>
void append(std::vector<T>& into, std::vector<T>&& from) {
  into.insert(into.end(), std::make_move_iterator(from.begin()), std::make_move_iterator(from.end()));
}

}  // namespace

std::string_view to_string(PinPolicy p) {
  switch (p) {
    case PinPolicy::kPinAllContributions: return "pin_all_contributions";
    case PinPolicy::kPinOnUse: return "pin_on_use";
    case PinPolicy::kPinNone: return "pin_none";
  }
  return "pin_none";
}

std::optional<PinPolicy> parse_pin_policy(std::string_view text) {
  for (auto p : {PinPolicy::kPinAllContributions, PinPolicy::kPinOnUse, PinPolicy::kPinNone}) {
    if (to_string(p) == text) return p;
  }
  return std::nullopt;
}

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::kSessionEstablished: return "session_established";
    case EventKind::kSessionClosed: return "session_closed";
    case EventKind::kAuthFailed: return "auth_failed";
    case EventKind::kHandshakeTimeout: return "handshake_timeout";
    case EventKind::kProtocolViolation: return "protocol_violation";
    case EventKind::kEntryJoined: return "entry_joined";
    case EventKind::kEntryReplicated: return "entry_replicated";
    case EventKind::kEntryRejected: return "entry_rejected";
    case EventKind::kFetchSucceeded: return "fetch_succeeded";
    case EventKind::kFetchFailed: return "fetch_failed";
    case EventKind::kBootstrapComplete: return "bootstrap_complete";
    case EventKind::kValidationCompleted: return "validation_completed";
    case EventKind::kVoteDecided: return "vote_decided";
  }
  return "unknown";
}

void Step::merge(Step&& other) {
  append(out, std::move(other.out));
  append(disconnect, std::move(other.disconnect));
  append(connect, std::move(other.connect));
  append(start_validation, std::move(other.start_validation));
  append(events, std::move(other.events));
}

std::vector<PeerId> select_gossip_targets(const std::vector<PeerId>& peers, std::size_t fan_out,
                                          std::mt19937_64& rng) {
  std::vector<PeerId> out;
  std::sample(peers.begin(), peers.end(), std::back_inserter(out), fan_out, rng);
  return out;
}

Peer::Peer(PeerConfig config, PeerId id, BlockStore blocks, ValidationsStore validations,
           std::uint64_t seed)
    : config_(std::move(config)),
      self_{id, config_.region, config_.address},
      key_(derive_network_key(config_.passphrase)),
      rng_(seed),
      blocks_(std::move(blocks)),
      validations_(std::move(validations)) {}

// ---------------------------------------------------------------------------
// sessions

Hello Peer::initiate_handshake(const std::string& address, Time now) {
  Nonce nonce{};
  for (auto& b : nonce) b = static_cast<std::uint8_t>(rng_() & 0xff);
  pending_hellos_[nonce] = {address, now};
  return handshake_initiate(config_.passphrase, self_, nonce).hello;
}

bool Peer::dialing(const std::string& address) const {
  return std::any_of(pending_hellos_.begin(), pending_hellos_.end(),
                     [&](const auto& kv) { return kv.second.address == address; });
}

std::vector<PeerId> Peer::session_peers() const {
  std::vector<PeerId> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

std::vector<PeerInfo> Peer::session_infos() const {
  std::vector<PeerInfo> out;
  for (const auto& [id, s] : sessions_) out.push_back(s.info);
  return out;
}

std::optional<Time> Peer::session_rtt(const PeerId& peer) const {
  auto it = sessions_.find(peer);
  if (it == sessions_.end()) return std::nullopt;
  return it->second.rtt;
}

Heads Peer::heads_message() const {
  const auto& h = log().heads();
  return Heads{log().log_id(), std::vector<Cid>(h.begin(), h.end())};
}

Step Peer::handle_message(const PeerId& from, const Message& msg, Time now) {
  if (std::holds_alternative<Hello>(msg)) return on_hello(from, std::get<Hello>(msg), now);
  if (std::holds_alternative<HelloAck>(msg)) return on_hello_ack(from, std::get<HelloAck>(msg), now);
  if (std::holds_alternative<AuthFail>(msg)) {
    Step step;
    step.events.push_back({EventKind::kAuthFailed, from, std::nullopt, "rejected by peer"});
    step.disconnect.push_back(from);
    return step;
  }
  if (!sessions_.contains(from)) {
    Step step;
    step.events.push_back({EventKind::kProtocolViolation, from, std::nullopt,
                           std::string(message_type(msg)) + " before authentication"});
    step.disconnect.push_back(from);
    return step;
  }
  return std::visit(overloaded{
                        [&](const Heads& m) { return on_heads(from, m, now); },
                        [&](const FetchEntries& m) { return on_fetch(from, m); },
                        [&](const Entries& m) { return on_entries(from, m, now); },
                        [&](const Want& m) { return on_want(from, m); },
                        [&](const Block& m) { return on_block(from, m, now); },
                        [&](const BlockMissing& m) { return on_block_missing(from, m, now); },
                        [&](const ValidationQuery& m) { return on_validation_query(from, m); },
                        [&](const ValidationResponse& m) { return on_validation_response(from, m, now); },
                        [&](const auto&) { return Step{}; },
                    },
                    msg);
}

Step Peer::on_hello(const PeerId& from, const Hello& m, Time now) {
  Step step;
  bool ok = m.peer_id == from && m.peer_id != self_.id &&
            constant_time_equal(hello_proof(key_, m.nonce, m.peer_id), m.proof) &&
            !seen_nonces_.contains(m.nonce);
  if (!ok) {
    step.out.push_back({from, AuthFail{}});
    step.disconnect.push_back(from);
    step.events.push_back({EventKind::kAuthFailed, from, std::nullopt, "bad HELLO"});
    return step;
  }
  seen_nonces_.insert(m.nonce);
  HelloAck ack{self_.id, self_.region, ack_mac(key_, m.nonce, self_.id), {}};
  for (const auto& [id, s] : sessions_) {
    if (id != from) ack.peer_list.push_back(s.info);
  }
  sessions_[from] = Session{{from, m.region, m.address}, now, std::nullopt};
  step.out.push_back({from, std::move(ack)});
  step.out.push_back({from, heads_message()});
  step.events.push_back({EventKind::kSessionEstablished, from, std::nullopt, "inbound"});
  return step;
}

Step Peer::on_hello_ack(const PeerId& from, const HelloAck& m, Time now) {
  Step step;
  auto match = pending_hellos_.end();
  for (auto it = pending_hellos_.begin(); it != pending_hellos_.end(); ++it) {
    if (constant_time_equal(ack_mac(key_, it->first, m.peer_id), m.mac)) {
      match = it;
      break;
    }
  }
  if (match == pending_hellos_.end() || m.peer_id != from) {
    step.events.push_back({EventKind::kAuthFailed, from, std::nullopt, "HELLO_ACK did not verify"});
    step.disconnect.push_back(from);
    return step;
  }
  auto pending = match->second;
  pending_hellos_.erase(match);

  sessions_[from] = Session{{from, m.region, pending.address}, now, now - pending.sent};
  step.events.push_back({EventKind::kSessionEstablished, from, std::nullopt, "outbound"});

  bool first_contact = bootstrap_ && !bootstrap_->root;
  if (first_contact) {
    bootstrap_->root = from;
    bootstrap_->settle_deadline = now + config_.response_timeout;
  }
  if (config_.auto_connect) {
    for (const auto& p : m.peer_list) {
      if (p.id == self_.id || sessions_.contains(p.id) || p.address.empty() || dialing(p.address)) continue;
      if (std::find(step.connect.begin(), step.connect.end(), p.address) != step.connect.end()) continue;
      step.connect.push_back(p.address);
      if (first_contact) bootstrap_->awaiting.insert(p.address);
    }
  }
  if (bootstrap_ && !bootstrap_->complete) {
    bootstrap_->awaiting.erase(pending.address);
    maybe_choose_source(now, step);
  }
  step.out.push_back({from, heads_message()});
  return step;
}

Step Peer::on_disconnect(const PeerId& peer, Time now) {
  Step step;
  if (sessions_.erase(peer) == 0) return step;
  peer_heads_.erase(peer);
  step.events.push_back({EventKind::kSessionClosed, peer, std::nullopt, ""});
  for (auto it = in_flight_.begin(); it != in_flight_.end();) {
    it = it->second.peer == peer ? in_flight_.erase(it) : std::next(it);
  }
  std::vector<Cid> retry;
  for (auto& [cid, w] : wants_) {
    if (w.asked.contains(peer) && !w.missing.contains(peer)) {
      w.missing.insert(peer);
      if (w.missing.size() == w.asked.size()) retry.push_back(cid);
    }
  }
  for (const auto& cid : retry) {
    auto& w = wants_.at(cid);
    if (w.for_fetch && !w.for_replication) {
      step.events.push_back({EventKind::kFetchFailed, self_.id, cid, "NotFoundAnywhere"});
      wants_.erase(cid);
    } else if (auto next = random_session(w.asked)) {
      w.asked.insert(*next);
      w.deadline = now + config_.response_timeout;
      step.out.push_back({*next, Want{cid}});
    }
  }
  std::vector<Cid> decided;
  for (auto& [subject, round] : votes_) {
    if (round.asked.contains(peer) && !round.responses.contains(peer)) round.responses[peer] = std::nullopt;
    if (round.responses.size() == round.asked.size()) decided.push_back(subject);
  }
  for (const auto& s : decided) decide_vote(s, step);
  return step;
}

// ---------------------------------------------------------------------------
// log replication

bool Peer::fetch_deferred() const {
  return bootstrap_ && !bootstrap_->complete && !bootstrap_->source_chosen;
}

void Peer::request_entries(const PeerId& to, const std::set<Cid>& cids, Time now, Step& step) {
  FetchEntries fetch;
  for (const auto& c : cids) {
    if (log().contains(c) || pending_entries_.contains(c) || in_flight_.contains(c)) continue;
    in_flight_[c] = {to, now + config_.response_timeout};
    fetch.cids.push_back(c);
  }
  if (!fetch.cids.empty()) step.out.push_back({to, std::move(fetch)});
}

Step Peer::on_heads(const PeerId& from, const Heads& m, Time now) {
  Step step;
  if (m.log_id != log().log_id()) return step;
  std::set<Cid> heads(m.heads.begin(), m.heads.end());
  peer_heads_[from] = heads;
  if (bootstrap_ && !bootstrap_->complete && bootstrap_->root == from && !bootstrap_->snapshot) {
    bootstrap_->snapshot = heads;
    maybe_choose_source(now, step);
    check_bootstrap(now, step);
    return step;
  }
  if (fetch_deferred()) return step;
  request_entries(from, log().missing_entries(heads), now, step);
  return step;
}

Step Peer::on_fetch(const PeerId& from, const FetchEntries& m) {
  Step step;
  // Ancestors older than everything the requester advertised are assumed
  // to be held already; a wrong guess only costs another round.
  std::uint64_t floor = 0;
  if (auto it = peer_heads_.find(from); it != peer_heads_.end() && !it->second.empty()) {
    floor = UINT64_MAX;
    for (const auto& h : it->second) {
      const auto* e = log().find(h);
      floor = e ? std::min(floor, e->clock) : 0;
    }
    if (floor == UINT64_MAX) floor = 0;
  }
  const std::set<Cid>* their_heads = peer_heads_.contains(from) ? &peer_heads_.at(from) : nullptr;

  Entries reply;
  std::set<Cid> sent;
  std::vector<Cid> queue;
  for (const auto& c : m.cids) {
    if (log().contains(c) && sent.insert(c).second) {
      queue.push_back(c);
      reply.encodings.push_back(log().find(c)->canonical_encoding());
    }
  }
  for (std::size_t i = 0; i < queue.size() && reply.encodings.size() < config_.fetch_batch; ++i) {
    for (const auto& p : log().find(queue[i])->parents) {
      if (reply.encodings.size() >= config_.fetch_batch) break;
      if (sent.contains(p)) continue;
      const auto* e = log().find(p);
      if (!e) continue;
      if (their_heads && (their_heads->contains(p) || e->clock < floor)) continue;
      sent.insert(p);
      queue.push_back(p);
      reply.encodings.push_back(e->canonical_encoding());
    }
  }
  if (!reply.encodings.empty()) step.out.push_back({from, std::move(reply)});
  return step;
}

Step Peer::on_entries(const PeerId& from, const Entries& m, Time now) {
  Step step;
  for (const auto& enc : m.encodings) {
    LogEntry entry;
    try {
      entry = LogEntry::decode(enc);
    } catch (const Error& e) {
      step.events.push_back({EventKind::kEntryRejected, from, std::nullopt, e.what()});
      continue;
    }
    in_flight_.erase(entry.id);
    if (entry.log_id != log().log_id() || log().contains(entry.id)) continue;
    pending_entries_.emplace(entry.id, entry);
    entry_sources_.emplace(entry.id, from);
  }
  resolve_pending(from, now, step);
  return step;
}

void Peer::resolve_pending(const PeerId& from, Time now, Step& step) {
  if (pending_entries_.empty()) return;
  for (;;) {
    // 1 = resolvable, 2 = blocked on a missing ancestor
    std::map<Cid, int> state;
    std::set<Cid> missing;
    std::function<bool(const Cid&)> resolvable = [&](const Cid& id) -> bool {
      if (log().contains(id)) return true;
      auto it = pending_entries_.find(id);
      if (it == pending_entries_.end()) {
        missing.insert(id);
        return false;
      }
      if (auto s = state.find(id); s != state.end()) return s->second == 1;
      bool ok = true;
      for (const auto& p : it->second.parents) ok = resolvable(p) && ok;
      state[id] = ok ? 1 : 2;
      return ok;
    };
    std::vector<LogEntry> ready;
    for (const auto& [id, e] : pending_entries_) {
      if (resolvable(id)) ready.push_back(e);
    }
    if (!missing.empty() && !fetch_deferred()) {
      std::map<PeerId, std::set<Cid>> by_peer;
      for (const auto& c : missing) {
        if (in_flight_.contains(c)) continue;
        // Whoever sent the child holds the parent.
        PeerId target = from;
        for (const auto& [id, e] : pending_entries_) {
          if (std::find(e.parents.begin(), e.parents.end(), c) != e.parents.end()) {
            if (auto src = entry_source(id); src && sessions_.contains(*src)) target = *src;
            break;
          }
        }
        if (!sessions_.contains(target)) continue;
        by_peer[target].insert(c);
      }
      for (const auto& [peer, cids] : by_peer) request_entries(peer, cids, now, step);
    }
    if (ready.empty()) return;
    try {
      contributions_.log().join(ready);
    } catch (const Error& e) {
      auto bad = Cid::parse(e.detail());
      step.events.push_back({EventKind::kEntryRejected, from, bad, e.what()});
      if (!bad || pending_entries_.erase(*bad) == 0) return;
      continue;
    }
    std::sort(ready.begin(), ready.end(),
              [](const LogEntry& a, const LogEntry& b) { return std::tie(a.clock, a.id) < std::tie(b.clock, b.id); });
    for (const auto& e : ready) {
      pending_entries_.erase(e.id);
      auto source = entry_source(e.id).value_or(from);
      entry_sources_.erase(e.id);
      auto ecid = blocks_.put_block(as_bytes(e.canonical_encoding()), BlockOrigin::kReplicated);
      blocks_.set_pin(ecid, true);
      step.events.push_back({EventKind::kEntryJoined, source, e.id, ""});
      start_replication(e, source, now, step);
    }
    check_bootstrap(now, step);
    return;
  }
}

std::optional<PeerId> Peer::entry_source(const Cid& entry) const {
  auto it = entry_sources_.find(entry);
  if (it == entry_sources_.end()) return std::nullopt;
  return it->second;
}

void Peer::start_replication(const LogEntry& entry, const PeerId& source, Time now, Step& step) {
  replication_[entry.id].source = source;
  waiting_on_block_[entry.payload].insert(entry.id);
  if (blocks_.contains(entry.payload)) {
    block_arrived(entry.payload, now, step);
  } else {
    want_block(entry.payload, source, now, step);
  }
}

void Peer::want_block(const Cid& cid, const PeerId& preferred, Time now, Step& step) {
  auto& w = wants_[cid];
  w.for_replication = true;
  if (!w.asked.empty() && w.deadline > now) return;  // already outstanding
  PeerId target = preferred;
  if (!sessions_.contains(target)) {
    auto alt = random_session({});
    if (!alt) {
      w.deadline = now;  // retried from poll() once a session exists
      return;
    }
    target = *alt;
  }
  w.asked.insert(target);
  w.missing.erase(target);
  w.deadline = now + config_.response_timeout;
  step.out.push_back({target, Want{cid}});
}

void Peer::block_arrived(const Cid& cid, Time now, Step& step) {
  auto waiting = waiting_on_block_.find(cid);
  if (waiting == waiting_on_block_.end()) return;
  auto entries = std::move(waiting->second);
  waiting_on_block_.erase(waiting);
  for (const auto& entry_id : entries) {
    auto rit = replication_.find(entry_id);
    if (rit == replication_.end()) continue;
    auto& r = rit->second;
    if (r.need_payload) {
      r.need_payload = false;
      if (!blocks_.info(cid)->pinned) blocks_.set_pin(cid, true);
      if (config_.pin_policy == PinPolicy::kPinAllContributions) {
        std::optional<Contribution> contribution;
        if (auto bytes = blocks_.get_block(cid)) {
          try {
            contribution = Contribution::decode(peerperf::to_string(*bytes));
          } catch (const Error&) {
          }
        }
        if (contribution && !blocks_.contains(contribution->data_cid)) {
          r.data = contribution->data_cid;
          waiting_on_block_[contribution->data_cid].insert(entry_id);
          want_block(contribution->data_cid, r.source, now, step);
          continue;
        }
      }
      finish_replication(entry_id, step);
    } else if (r.data && *r.data == cid) {
      r.data.reset();
      finish_replication(entry_id, step);
    }
  }
}

void Peer::finish_replication(const Cid& entry, Step& step) {
  replication_.erase(entry);
  step.events.push_back({EventKind::kEntryReplicated, self_.id, entry, ""});
}

bool Peer::replicated(const Cid& entry) const {
  return log().contains(entry) && !replication_.contains(entry);
}

Step Peer::on_want(const PeerId& from, const Want& m) {
  Step step;
  std::optional<Bytes> bytes;
  if (!deny_.contains(m.cid)) bytes = blocks_.get_block(m.cid);
  // Absent and denied blocks get the same answer.
  if (bytes) {
    step.out.push_back({from, Block{m.cid, std::move(*bytes)}});
  } else {
    step.out.push_back({from, BlockMissing{m.cid}});
  }
  return step;
}

Step Peer::on_block(const PeerId& from, const Block& m, Time now) {
  Step step;
  auto it = wants_.find(m.cid);
  if (it == wants_.end()) return step;
  if (!m.cid.matches(m.bytes)) {
    step.events.push_back({EventKind::kEntryRejected, from, m.cid, "block failed verification"});
    return step;
  }
  auto w = it->second;
  wants_.erase(it);
  blocks_.put_block(m.bytes, BlockOrigin::kReplicated);
  bool pin = (w.for_replication && config_.pin_policy == PinPolicy::kPinAllContributions) ||
             (w.for_fetch && w.pin && config_.pin_policy != PinPolicy::kPinNone);
  if (pin) blocks_.set_pin(m.cid, true);
  if (w.for_fetch) step.events.push_back({EventKind::kFetchSucceeded, from, m.cid, ""});
  block_arrived(m.cid, now, step);
  check_bootstrap(now, step);
  return step;
}

Step Peer::on_block_missing(const PeerId& from, const BlockMissing& m, Time now) {
  Step step;
  auto it = wants_.find(m.cid);
  if (it == wants_.end() || !it->second.asked.contains(from)) return step;
  auto& w = it->second;
  w.missing.insert(from);
  if (w.missing.size() < w.asked.size()) return step;
  if (w.for_fetch && !w.for_replication) {
    step.events.push_back({EventKind::kFetchFailed, self_.id, m.cid, "NotFoundAnywhere"});
    wants_.erase(it);
    return step;
  }
  if (auto next = random_session(w.asked)) {
    w.asked.insert(*next);
    w.deadline = now + config_.response_timeout;
    step.out.push_back({*next, Want{m.cid}});
  }
  return step;
}

std::optional<PeerId> Peer::random_session(const std::set<PeerId>& exclude) {
  std::vector<PeerId> candidates;
  for (const auto& [id, s] : sessions_) {
    if (!exclude.contains(id)) candidates.push_back(id);
  }
  if (candidates.empty()) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  return candidates[pick(rng_)];
}

// ---------------------------------------------------------------------------
// bootstrap

void Peer::begin_bootstrap(Time now) {
  bootstrap_ = BootstrapState{};
  bootstrap_->started = now;
  bootstrap_time_.reset();
}

void Peer::maybe_choose_source(Time now, Step& step) {
  auto& b = *bootstrap_;
  if (b.complete || b.source_chosen || !b.snapshot) return;
  if (!b.awaiting.empty() && now < b.settle_deadline) return;
  b.source_chosen = true;
  auto missing = log().missing_entries(*b.snapshot);
  if (missing.empty()) return;
  // Pull from the closest peer that already advertises the target heads.
  std::optional<PeerId> best;
  Time best_rtt{};
  for (const auto& [id, s] : sessions_) {
    auto h = peer_heads_.find(id);
    if (h == peer_heads_.end() || !s.rtt) continue;
    if (!std::includes(h->second.begin(), h->second.end(), missing.begin(), missing.end())) continue;
    if (!best || *s.rtt < best_rtt) {
      best = id;
      best_rtt = *s.rtt;
    }
  }
  if (!best) best = b.root;
  if (!best || !sessions_.contains(*best)) return;
  request_entries(*best, missing, now, step);
  resolve_pending(*best, now, step);
}

void Peer::check_bootstrap(Time now, Step& step) {
  if (!bootstrap_ || bootstrap_->complete || !bootstrap_->snapshot) return;
  auto& b = *bootstrap_;
  if (!b.target_entries) {
    for (const auto& h : *b.snapshot) {
      if (!log().contains(h)) return;
    }
    std::set<Cid> target;
    std::vector<Cid> stack(b.snapshot->begin(), b.snapshot->end());
    while (!stack.empty()) {
      auto c = stack.back();
      stack.pop_back();
      if (!target.insert(c).second) continue;
      for (const auto& p : log().find(c)->parents) stack.push_back(p);
    }
    b.target_entries = std::move(target);
  }
  for (const auto& [entry, r] : replication_) {
    if (b.target_entries->contains(entry)) return;
  }
  b.complete = true;
  bootstrap_time_ = now - b.started;
  step.events.push_back({EventKind::kBootstrapComplete, self_.id, std::nullopt,
                         std::to_string(bootstrap_time_->count())});
}

// ---------------------------------------------------------------------------
// periodic work

Step Peer::gossip_tick(Time now) {
  Step step;
  (void)now;
  for (const auto& target : select_gossip_targets(session_peers(), config_.fan_out, rng_)) {
    step.out.push_back({target, heads_message()});
  }
  return step;
}

Step Peer::poll(Time now) {
  Step step;
  for (auto it = pending_hellos_.begin(); it != pending_hellos_.end();) {
    if (now - it->second.sent >= config_.response_timeout) {
      step.events.push_back({EventKind::kHandshakeTimeout, self_.id, std::nullopt, it->second.address});
      if (bootstrap_) bootstrap_->awaiting.erase(it->second.address);
      it = pending_hellos_.erase(it);
    } else {
      ++it;
    }
  }
  if (bootstrap_ && !bootstrap_->complete) maybe_choose_source(now, step);

  std::map<PeerId, std::set<Cid>> refetch;
  for (auto it = in_flight_.begin(); it != in_flight_.end();) {
    if (it->second.deadline <= now) {
      auto alt = random_session({it->second.peer});
      if (!alt && sessions_.contains(it->second.peer)) alt = it->second.peer;
      if (alt) refetch[*alt].insert(it->first);
      it = in_flight_.erase(it);
    } else {
      ++it;
    }
  }
  if (!fetch_deferred()) {
    for (const auto& [peer, cids] : refetch) request_entries(peer, cids, now, step);
  }

  std::vector<Cid> expired;
  for (const auto& [cid, w] : wants_) {
    if (w.deadline <= now) expired.push_back(cid);
  }
  for (const auto& cid : expired) {
    auto& w = wants_.at(cid);
    if (w.for_fetch && !w.for_replication) {
      step.events.push_back({EventKind::kFetchFailed, self_.id, cid, "NotFoundAnywhere"});
      wants_.erase(cid);
      continue;
    }
    auto next = random_session(w.asked);
    if (!next) {
      w.asked.clear();
      w.missing.clear();
      next = random_session({});
    }
    if (!next) continue;
    w.asked.insert(*next);
    w.deadline = now + config_.response_timeout;
    step.out.push_back({*next, Want{cid}});
  }

  std::vector<Cid> closing;
  for (const auto& [subject, round] : votes_) {
    if (round.deadline <= now) closing.push_back(subject);
  }
  for (const auto& s : closing) decide_vote(s, step);
  return step;
}

// ---------------------------------------------------------------------------
// local operations

Peer::Contributed Peer::contribute(const PerformanceRecord& record, const Attributes& attributes,
                                   std::int64_t now_ms, Time now) {
  (void)now;
  Contributed result{contributions_.contribute(blocks_, record, attributes, self_.id.text(), now_ms), {}};
  const auto* entry = log().find(result.entry.entry_id);
  blocks_.put_block(as_bytes(entry->canonical_encoding()), BlockOrigin::kLocal);
  // Push the new entry to every session; receivers pull the blocks.
  for (const auto& [id, s] : sessions_) {
    result.step.out.push_back({id, Entries{{entry->canonical_encoding()}}});
  }
  result.step.events.push_back({EventKind::kEntryJoined, self_.id, entry->id, "local"});
  result.step.events.push_back({EventKind::kEntryReplicated, self_.id, entry->id, "local"});
  return result;
}

Cid Peer::store_private(ByteView bytes) {
  auto cid = blocks_.put_block(bytes, BlockOrigin::kLocal);
  deny_.insert(cid);
  return cid;
}

Step Peer::fetch(const Cid& cid, bool pin, Time now) {
  Step step;
  if (blocks_.contains(cid)) {
    if (pin && config_.pin_policy != PinPolicy::kPinNone) blocks_.set_pin(cid, true);
    step.events.push_back({EventKind::kFetchSucceeded, self_.id, cid, "local"});
    return step;
  }
  if (sessions_.empty()) {
    step.events.push_back({EventKind::kFetchFailed, self_.id, cid, "NotFoundAnywhere"});
    return step;
  }
  auto& w = wants_[cid];
  w.for_fetch = true;
  w.pin = w.pin || pin;
  w.deadline = now + config_.response_timeout;
  for (const auto& [id, s] : sessions_) {
    if (w.asked.insert(id).second) step.out.push_back({id, Want{cid}});
    w.missing.erase(id);
  }
  return step;
}

Step Peer::on_validation_query(const PeerId& from, const ValidationQuery& m) {
  Step step;
  // Answer from the store as it is now; running validations are not awaited.
  auto record = validations_.get_validation(m.subject_cid, config_.validator.validator_id);
  if (!record) record = validations_.latest_for(m.subject_cid);
  step.out.push_back({from, ValidationResponse{m.subject_cid, record}});
  return step;
}

Step Peer::request_votes(const Cid& subject, Time now) {
  Step step;
  if (votes_.contains(subject)) return step;
  auto& round = votes_[subject];
  round.deadline = now + std::chrono::milliseconds(config_.vote_policy.response_timeout_ms);
  for (const auto& [id, s] : sessions_) {
    round.asked.insert(id);
    step.out.push_back({id, ValidationQuery{subject}});
  }
  if (round.asked.empty()) decide_vote(subject, step);
  return step;
}

Step Peer::on_validation_response(const PeerId& from, const ValidationResponse& m, Time now) {
  (void)now;
  Step step;
  auto it = votes_.find(m.subject_cid);
  if (it == votes_.end() || !it->second.asked.contains(from) || it->second.responses.contains(from)) {
    return step;
  }
  auto record = m.record;
  if (record && record->subject_cid != m.subject_cid) record.reset();
  it->second.responses[from] = record;
  auto votes = std::count_if(it->second.responses.begin(), it->second.responses.end(),
                             [](const auto& kv) { return kv.second.has_value(); });
  if (votes >= config_.vote_policy.k_required ||
      it->second.responses.size() == it->second.asked.size()) {
    decide_vote(m.subject_cid, step);
  }
  return step;
}

void Peer::decide_vote(const Cid& subject, Step& step) {
  auto it = votes_.find(subject);
  if (it == votes_.end()) return;
  std::vector<ValidationRecord> records;
  for (const auto& [peer, r] : it->second.responses) {
    if (r) records.push_back(*r);
  }
  votes_.erase(it);
  auto outcome = consolidate_votes(records, config_.vote_policy);
  verdicts_[subject] = outcome;
  std::string detail(to_string(outcome.decision));
  if (outcome.advisory) detail += ";advisory=" + std::string(to_string(*outcome.advisory));
  step.events.push_back({EventKind::kVoteDecided, self_.id, subject, detail});
  if (outcome.decision == VoteDecision::kMustValidateIndependently && blocks_.contains(subject)) {
    std::array<Cid, 1> one{subject};
    step.merge(schedule_validation(one));
  }
}

std::optional<VoteOutcome> Peer::network_verdict(const Cid& subject) const {
  auto it = verdicts_.find(subject);
  if (it == verdicts_.end()) return std::nullopt;
  return it->second;
}

Step Peer::schedule_validation(std::span<const Cid> subjects) {
  for (const auto& s : subjects) {
    if (!blocks_.contains(s)) throw Error(ErrorCode::kNotFound, s.text());
  }
  Step step;
  if (auto task = scheduler_.schedule(subjects)) step.start_validation.push_back(std::move(*task));
  return step;
}

Step Peer::complete_validation(std::uint64_t task_id, std::span<const ValidationRecord> records) {
  Step step;
  scheduler_.complete(task_id);
  for (const auto& r : records) {
    validations_.record_validation(r);
    step.events.push_back({EventKind::kValidationCompleted, self_.id, r.subject_cid,
                           std::string(to_string(r.verdict))});
  }
  return step;
}

void Peer::restore_log(const std::set<Cid>& heads) {
  std::vector<LogEntry> entries;
  std::set<Cid> seen;
  std::vector<Cid> stack(heads.begin(), heads.end());
  while (!stack.empty()) {
    auto c = stack.back();
    stack.pop_back();
    if (!seen.insert(c).second || log().contains(c)) continue;
    auto bytes = blocks_.get_block(c);
    if (!bytes) throw Error(ErrorCode::kDanglingParent, c.text());
    auto e = LogEntry::decode(peerperf::to_string(*bytes));
    for (const auto& p : e.parents) stack.push_back(p);
    entries.push_back(std::move(e));
  }
  contributions_.log().join(entries);
}

}  // namespace peerperf::protocol
