#include "peerperf/node/node.hpp"

#include <unistd.h>

#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "peerperf/canonical.hpp"
#include "peerperf/error.hpp"

namespace peerperf::node {

using protocol::EventKind;
using protocol::Message;
using protocol::PeerId;
using protocol::Step;

namespace {

constexpr auto kPollInterval = std::chrono::milliseconds(200);

void write_atomic(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::optional<Json> read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kIo, path.string() + ": " + e.what());
  }
}

std::set<Cid> read_cid_array(const Json& j) {
  std::set<Cid> out;
  for (const auto& c : j) out.insert(Cid::from_text(c.get<std::string>()));
  return out;
}

Json cid_array(const std::set<Cid>& cids) {
  Json j = Json::array();
  for (const auto& c : cids) j.push_back(c.text());
  return j;
}

std::filesystem::path heads_path(const std::filesystem::path& root) {
  std::string name(kContributionsLogId);
  for (auto& c : name) {
    if (c == '/') c = '_';
  }
  return root / "logs" / (name + ".heads.json");
}

std::filesystem::path private_path(const std::filesystem::path& root) { return root / "private.json"; }

}  // namespace

std::string NodeStatus::to_text() const {
  std::string heads_text;
  for (const auto& h : heads) heads_text += (heads_text.empty() ? "" : ",") + h;
  std::ostringstream out;
  out << "peer_id=" << peer_id << "\n"
      << "region=" << region << "\n"
      << "peer_count=" << peer_count << "\n"
      << "blocks=" << blocks << "\n"
      << "block_bytes=" << block_bytes << "\n"
      << "entries=" << entries << "\n"
      << "heads=" << heads_text << "\n"
      << "pending_replications=" << pending_replications << "\n"
      << "validations=" << validations << "\n"
      << "private_blocks=" << private_blocks << "\n"
      << "bootstrapping=" << (bootstrapping ? "true" : "false") << "\n";
  return out.str();
}

Node::Node(NodeConfig config) : config_(std::move(config)), epoch_(std::chrono::steady_clock::now()) {
  if (auto p = config_.problems(); !p.empty()) throw Error(ErrorCode::kConfigInvalid, p.front());
  std::filesystem::create_directories(config_.data_root);
  BlockStoreOptions options;
  options.root = config_.data_root;
  initial_blocks_.emplace(options);
  initial_validations_.emplace(config_.data_root / "validations.jsonl");
}

Node::~Node() { stop(); }

protocol::Time Node::now() const {
  return std::chrono::duration_cast<protocol::Time>(std::chrono::steady_clock::now() - epoch_);
}

std::int64_t Node::wall_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void Node::start() {
  if (started_) return;
  auto [host, port] = split_address(config_.listen_address);
  listener_ = std::make_unique<Listener>(host, port, [this](int fd, std::string remote) {
    if (!post([this, fd, remote] { accept(fd, remote); })) ::close(fd);
  });
  advertised_ = host + ":" + std::to_string(listener_->port());

  std::mt19937_64 seed_rng(std::random_device{}());
  auto id = PeerId::random(seed_rng);
  peer_ = std::make_unique<protocol::Peer>(config_.peer_config(advertised_), id,
                                           std::move(*initial_blocks_), std::move(*initial_validations_),
                                           seed_rng());
  initial_blocks_.reset();
  initial_validations_.reset();
  if (auto deny = read_json(private_path(config_.data_root))) peer_->restore_deny_list(read_cid_array(*deny));
  if (auto heads = read_json(heads_path(config_.data_root))) {
    peer_->restore_log(read_cid_array(heads->at("heads")));
  }
  persisted_heads_ = peer_->log().heads();
  persisted_private_ = peer_->deny_list().size();
  spdlog::info("node {} listening on {} ({} entries restored)", id.text(), advertised_, peer_->log().size());

  {
    std::lock_guard lock(mu_);
    stopping_ = false;
    started_ = true;
  }
  loop_thread_ = std::thread([this] { loop(); });
  worker_thread_ = std::thread([this] { worker(); });
  if (!config_.is_root) {
    try {
      bootstrap();
    } catch (...) {
      stop();
      throw;
    }
  }
}

void Node::bootstrap() {
  auto backoff = std::chrono::milliseconds(config_.bootstrap_backoff_ms);
  for (std::size_t attempt = 0; attempt < config_.bootstrap_attempts; ++attempt) {
    std::future<void> done;
    std::size_t opened_before = 0;
    call([&](protocol::Peer& p) {
      opened_before = sessions_opened_;
      bootstrap_done_.emplace();
      done = bootstrap_done_->get_future();
      p.begin_bootstrap(now());
      for (const auto& a : config_.bootstrap_peers) dial(a);
    });
    const auto handshake_wait = std::chrono::milliseconds(config_.response_timeout_ms * 2);
    if (done.wait_for(handshake_wait) == std::future_status::ready) return;
    bool connected = call([&](protocol::Peer&) { return sessions_opened_ > opened_before; });
    if (connected) {
      // A bootstrap peer answered; give the state transfer time to finish.
      if (done.wait_for(std::chrono::seconds(60)) == std::future_status::ready) return;
      throw Error(ErrorCode::kBootstrapFailure, "state transfer did not complete");
    }
    spdlog::warn("bootstrap attempt {} failed, retrying in {} ms", attempt + 1, backoff.count());
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
  throw Error(ErrorCode::kBootstrapFailure,
              "no bootstrap peer reachable after " + std::to_string(config_.bootstrap_attempts) + " attempts");
}

void Node::stop() {
  {
    std::lock_guard lock(mu_);
    if (!started_ || stopping_) return;
  }
  if (listener_) listener_->stop();
  // Close sockets from the loop so their close callbacks find it running.
  post([this] {
    for (auto& [_, c] : conns_) c.conn->close();
  });
  {
    std::lock_guard lock(dial_mu_);
    for (auto& t : dialers_) {
      if (t.joinable()) t.join();
    }
    dialers_.clear();
  }
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
    cv_.notify_all();
  }
  if (loop_thread_.joinable()) loop_thread_.join();
  {
    std::lock_guard lock(worker_mu_);
    worker_stop_ = true;
    worker_cv_.notify_all();
  }
  if (worker_thread_.joinable()) worker_thread_.join();
  conns_.clear();
  persist();
  listener_.reset();
  std::lock_guard lock(mu_);
  started_ = false;
}

std::uint16_t Node::p2p_port() const { return listener_ ? listener_->port() : 0; }
std::string Node::p2p_address() const { return advertised_; }
protocol::PeerId Node::id() const { return peer_ ? peer_->id() : PeerId{}; }

void Node::set_frame_hook(FrameHook hook) {
  if (!peer_) {
    frame_hook_ = std::move(hook);
    return;
  }
  call([&](protocol::Peer&) { frame_hook_ = std::move(hook); });
}

bool Node::post(std::function<void()> fn) {
  std::lock_guard lock(mu_);
  if (stopping_ || !started_) return false;
  tasks_.push_back(std::move(fn));
  cv_.notify_one();
  return true;
}

void Node::loop() {
  loop_id_ = std::this_thread::get_id();
  auto next_gossip = std::chrono::steady_clock::now() + std::chrono::milliseconds(config_.gossip_interval_ms);
  auto next_poll = std::chrono::steady_clock::now() + kPollInterval;
  for (;;) {
    std::deque<std::function<void()>> batch;
    {
      std::unique_lock lock(mu_);
      cv_.wait_until(lock, std::min(next_gossip, next_poll), [&] { return stopping_ || !tasks_.empty(); });
      if (stopping_ && tasks_.empty()) break;
      batch.swap(tasks_);
    }
    for (auto& task : batch) {
      try {
        task();
      } catch (const std::exception& e) {
        spdlog::error("event loop task failed: {}", e.what());
      }
    }
    auto t = std::chrono::steady_clock::now();
    if (t >= next_poll) {
      apply(peer_->poll(now()));
      next_poll = t + kPollInterval;
    }
    if (t >= next_gossip) {
      apply(peer_->gossip_tick(now()));
      next_gossip = t + std::chrono::milliseconds(config_.gossip_interval_ms);
    }
    persist();
  }
  loop_id_ = std::thread::id{};
}

void Node::worker() {
  for (;;) {
    ValidationJob job;
    {
      std::unique_lock lock(worker_mu_);
      worker_cv_.wait(lock, [&] { return worker_stop_ || !jobs_.empty(); });
      if (worker_stop_) return;
      job = std::move(jobs_.front());
      jobs_.pop_front();
    }
    std::vector<ValidationRecord> records;
    for (const auto& [cid, bytes] : job.subjects) {
      try {
        records.push_back(evaluate(cid, bytes, config_.validator, wall_ms()));
      } catch (const Error& e) {
        spdlog::warn("validation of {} failed: {}", cid.text(), e.what());
      }
    }
    post([this, id = job.task_id, records = std::move(records)] {
      apply(peer_->complete_validation(id, records));
    });
  }
}

void Node::accept(int fd, std::string remote) {
  auto id = next_conn_++;
  conns_[id].conn = std::make_unique<Connection>(
      fd, id, false, remote,
      [this](std::uint64_t c, Message m) { post([this, c, m = std::move(m)]() mutable { on_message(c, std::move(m)); }); },
      [this](std::uint64_t c, std::string why) { post([this, c, why] { on_close(c, why); }); });
}

void Node::dial(const std::string& address) {
  if (dialing_.contains(address) || address == advertised_) return;
  for (const auto& [_, c] : conns_) {
    if (c.conn->outbound() && c.conn->address() == address) return;
  }
  dialing_.insert(address);
  auto timeout = static_cast<int>(config_.response_timeout_ms);
  std::lock_guard lock(dial_mu_);
  dialers_.emplace_back([this, address, timeout] {
    int fd = -1;
    try {
      auto [host, port] = split_address(address);
      fd = dial_tcp(host, port, timeout);
    } catch (const Error&) {
    }
    bool queued = post([this, address, fd] {
      dialing_.erase(address);
      if (fd < 0) {
        spdlog::warn("cannot connect to {}", address);
        return;
      }
      auto id = next_conn_++;
      auto& state = conns_[id];
      state.conn = std::make_unique<Connection>(
          fd, id, true, address,
          [this](std::uint64_t c, Message m) {
            post([this, c, m = std::move(m)]() mutable { on_message(c, std::move(m)); });
          },
          [this](std::uint64_t c, std::string why) { post([this, c, why] { on_close(c, why); }); });
      auto hello = peer_->initiate_handshake(address, now());
      auto body = protocol::encode_message(hello);
      if (frame_hook_) frame_hook_(PeerId{}, hello, body);
      state.conn->send(protocol::encode_frame(hello));
    });
    if (!queued && fd >= 0) ::close(fd);
  });
}

void Node::on_message(std::uint64_t conn, Message msg) {
  auto it = conns_.find(conn);
  if (it == conns_.end()) return;
  auto& state = it->second;
  if (!state.peer) {
    if (auto* h = std::get_if<protocol::Hello>(&msg)) {
      state.peer = h->peer_id;
    } else if (auto* a = std::get_if<protocol::HelloAck>(&msg)) {
      state.peer = a->peer_id;
    } else {
      spdlog::warn("{}: {} before handshake, closing", state.conn->address(), protocol::message_type(msg));
      state.conn->close();
      return;
    }
  }
  apply(peer_->handle_message(*state.peer, msg, now()), conn);
}

void Node::on_close(std::uint64_t conn, const std::string& reason) {
  auto it = conns_.find(conn);
  if (it == conns_.end()) return;
  auto peer = it->second.peer;
  spdlog::debug("connection {} closed: {}", it->second.conn->address(), reason);
  conns_.erase(it);
  if (peer) {
    auto pc = peer_conn_.find(*peer);
    if (pc != peer_conn_.end() && pc->second == conn) {
      peer_conn_.erase(pc);
      apply(peer_->on_disconnect(*peer, now()));
    }
  }
}

void Node::send(const PeerId& to, const Message& msg, std::optional<std::uint64_t> origin) {
  ConnState* target = nullptr;
  if (auto pc = peer_conn_.find(to); pc != peer_conn_.end()) {
    if (auto it = conns_.find(pc->second); it != conns_.end()) target = &it->second;
  }
  if (!target && origin) {
    if (auto it = conns_.find(*origin); it != conns_.end() && it->second.peer == to) target = &it->second;
  }
  if (!target) return;
  auto body = protocol::encode_message(msg);
  if (frame_hook_) frame_hook_(to, msg, body);
  Bytes frame;
  frame.reserve(body.size() + 4);
  const auto n = static_cast<std::uint32_t>(body.size());
  for (int shift : {24, 16, 8, 0}) frame.push_back(static_cast<std::uint8_t>(n >> shift));
  frame.insert(frame.end(), body.begin(), body.end());
  target->conn->send(std::move(frame));
}

void Node::apply(Step step, std::optional<std::uint64_t> origin) {
  for (const auto& ev : step.events) {
    if (ev.kind == EventKind::kSessionEstablished) {
      ++sessions_opened_;
      if (origin) {
        auto it = conns_.find(*origin);
        if (it != conns_.end() && it->second.peer == ev.peer) {
          if (auto old = peer_conn_.find(ev.peer); old != peer_conn_.end() && old->second != *origin) {
            if (auto oc = conns_.find(old->second); oc != conns_.end()) oc->second.peer.reset();
          }
          peer_conn_[ev.peer] = *origin;
        }
      }
    }
  }
  for (const auto& o : step.out) send(o.to, o.message, origin);
  for (const auto& id : step.disconnect) {
    std::optional<std::uint64_t> target;
    if (auto pc = peer_conn_.find(id); pc != peer_conn_.end()) target = pc->second;
    if (!target && origin) target = origin;
    if (auto it = target ? conns_.find(*target) : conns_.end(); it != conns_.end()) it->second.conn->close();
  }
  for (const auto& address : step.connect) dial(address);
  for (auto& task : step.start_validation) {
    ValidationJob job{task.id, {}};
    for (const auto& s : task.subjects) {
      if (auto bytes = peer_->blocks().get_block(s)) job.subjects.emplace_back(s, std::move(*bytes));
    }
    std::lock_guard lock(worker_mu_);
    jobs_.push_back(std::move(job));
    worker_cv_.notify_one();
  }
  for (const auto& ev : step.events) {
    switch (ev.kind) {
      case EventKind::kFetchSucceeded:
      case EventKind::kFetchFailed: {
        auto it = fetch_waiters_.find(*ev.subject);
        if (it == fetch_waiters_.end()) break;
        std::optional<Bytes> bytes;
        if (ev.kind == EventKind::kFetchSucceeded) bytes = peer_->blocks().get_block(*ev.subject);
        for (auto& p : it->second) p->set_value(bytes);
        fetch_waiters_.erase(it);
        break;
      }
      case EventKind::kVoteDecided: {
        auto it = vote_waiters_.find(*ev.subject);
        if (it == vote_waiters_.end()) break;
        for (auto& p : it->second) p->set_value();
        vote_waiters_.erase(it);
        break;
      }
      case EventKind::kBootstrapComplete:
        spdlog::info("bootstrap complete in {} us", ev.detail);
        if (bootstrap_done_) {
          bootstrap_done_->set_value();
          bootstrap_done_.reset();
        }
        break;
      case EventKind::kAuthFailed:
      case EventKind::kProtocolViolation:
      case EventKind::kEntryRejected:
        spdlog::warn("{} from {}: {}", protocol::to_string(ev.kind), ev.peer.text(), ev.detail);
        break;
      default: break;
    }
  }
}

void Node::persist() {
  if (!peer_) return;
  const auto& heads = peer_->log().heads();
  if (heads != persisted_heads_) {
    write_atomic(heads_path(config_.data_root),
                 canonical_dump({{"heads", cid_array(heads)}, {"log_id", std::string(kContributionsLogId)}}) + "\n");
    persisted_heads_ = heads;
  }
  if (peer_->deny_list().size() != persisted_private_) {
    write_atomic(private_path(config_.data_root), canonical_dump(cid_array(peer_->deny_list())) + "\n");
    persisted_private_ = peer_->deny_list().size();
  }
}

ContributeResult Node::api_contribute(const PerformanceRecord& record, const Attributes& attributes,
                                      std::optional<bool> share, bool force) {
  const bool shared = share.value_or(config_.share_by_default);
  return call([&](protocol::Peer& p) {
    auto out = contribute_pipeline(p, record, attributes, shared, force, wall_ms(), now());
    apply(std::move(out.step));
    persist();
    return out.result;
  });
}

std::vector<QueryRow> Node::api_query(const AttributeFilter& filter, ValidityPolicy policy) {
  return call([&](protocol::Peer& p) { return query_contributions(p, filter, policy); });
}

Bytes Node::api_fetch(const Cid& cid, bool pin) {
  auto promise = std::make_shared<std::promise<std::optional<Bytes>>>();
  auto future = promise->get_future();
  call([&](protocol::Peer& p) {
    fetch_waiters_[cid].push_back(promise);
    apply(p.fetch(cid, pin, now()));
  });
  auto wait = std::chrono::milliseconds(config_.response_timeout_ms * 3);
  if (future.wait_for(wait) != std::future_status::ready) {
    throw Error(ErrorCode::kNotFoundAnywhere, cid.text());
  }
  auto bytes = future.get();
  if (!bytes) throw Error(ErrorCode::kNotFoundAnywhere, cid.text());
  return *bytes;
}

std::optional<std::uint64_t> Node::api_validate(const Cid& cid) {
  return call([&](protocol::Peer& p) -> std::optional<std::uint64_t> {
    auto step = p.schedule_validation(std::span<const Cid>(&cid, 1));
    std::optional<std::uint64_t> id;
    if (!step.start_validation.empty()) id = step.start_validation.front().id;
    apply(std::move(step));
    return id;
  });
}

std::optional<ValidationRecord> Node::api_own_validation(const Cid& cid) {
  return call([&](protocol::Peer& p) { return p.validations().get_validation(cid, config_.validator.validator_id); });
}

std::optional<VoteOutcome> Node::api_network_verdict(const Cid& cid) {
  auto promise = std::make_shared<std::promise<void>>();
  auto future = promise->get_future();
  call([&](protocol::Peer& p) {
    vote_waiters_[cid].push_back(promise);
    apply(p.request_votes(cid, now()));
  });
  future.wait_for(std::chrono::milliseconds(config_.vote_policy.response_timeout_ms + 1000));
  return call([&](protocol::Peer& p) { return p.network_verdict(cid); });
}

std::vector<std::pair<Cid, PerformanceRecord>> Node::api_private_records() {
  return call([](protocol::Peer& p) { return private_records(p); });
}

NodeStatus Node::status() {
  return call([](protocol::Peer& p) {
    NodeStatus s;
    s.peer_id = p.id().text();
    s.region = p.config().region;
    s.peer_count = p.session_peers().size();
    s.blocks = p.blocks().block_count();
    s.block_bytes = p.blocks().total_bytes();
    s.entries = p.log().size();
    for (const auto& h : p.log().heads()) s.heads.push_back(h.text());
    s.pending_replications = p.pending_replications();
    s.validations = p.validations().size();
    s.private_blocks = p.deny_list().size();
    s.bootstrapping = p.bootstrapping();
    return s;
  });
}

bool Node::wait_for(const std::function<bool(protocol::Peer&)>& pred, std::chrono::milliseconds timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (call([&](protocol::Peer& p) { return pred(p); })) return true;
    if (std::chrono::steady_clock::now() >= deadline) return false;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

}  // namespace peerperf::node
