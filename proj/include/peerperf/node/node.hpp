#pragma once

// The running peer. A single event-loop thread owns the protocol::Peer and
// every store; socket threads, the validation worker and API callers only
// post work to it and wait on the result.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "peerperf/error.hpp"
#include "peerperf/node/api.hpp"
#include "peerperf/node/config.hpp"
#include "peerperf/node/transport.hpp"
#include "peerperf/protocol/peer.hpp"

namespace peerperf::node {

struct NodeStatus {
  std::string peer_id;
  std::string region;
  std::size_t peer_count = 0;
  std::size_t blocks = 0;
  std::uint64_t block_bytes = 0;
  std::size_t entries = 0;
  std::vector<std::string> heads;
  std::size_t pending_replications = 0;
  std::size_t validations = 0;
  std::size_t private_blocks = 0;
  bool bootstrapping = false;

  // One key=value per line.
  std::string to_text() const;
};

class Node {
 public:
  // Called on the loop thread for every frame about to be written.
  using FrameHook = std::function<void(const protocol::PeerId& to, const protocol::Message& msg,
                                       const std::string& body)>;

  // Validates the config (kConfigInvalid) and opens the on-disk stores.
  explicit Node(NodeConfig config);
  ~Node();
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  // Binds the P2P port (kBindFailure), starts the loop and, unless root,
  // bootstraps with exponential backoff (kBootstrapFailure).
  void start();
  // Closes every connection and flushes persistence. Idempotent.
  void stop();

  const NodeConfig& config() const { return config_; }
  std::uint16_t p2p_port() const;
  std::string p2p_address() const;
  protocol::PeerId id() const;

  void set_frame_hook(FrameHook hook);

  ContributeResult api_contribute(const PerformanceRecord& record, const Attributes& attributes,
                                  std::optional<bool> share = std::nullopt, bool force = false);
  std::vector<QueryRow> api_query(const AttributeFilter& filter, ValidityPolicy policy);
  // Throws Error(kNotFoundAnywhere).
  Bytes api_fetch(const Cid& cid, bool pin);
  // Schedules the local validator; nullopt when it is already running for
  // the subject. Throws Error(kNotFound) for unknown blocks.
  std::optional<std::uint64_t> api_validate(const Cid& cid);
  std::optional<ValidationRecord> api_own_validation(const Cid& cid);
  // Asks connected peers and waits for the round to close.
  std::optional<VoteOutcome> api_network_verdict(const Cid& cid);
  std::vector<std::pair<Cid, PerformanceRecord>> api_private_records();
  NodeStatus status();

  // Runs `fn` on the loop thread and returns its result.
  template <typename F>
  auto call(F&& fn) -> std::invoke_result_t<F, protocol::Peer&>;

  // Polls `pred` on the loop until it holds or the timeout expires.
  bool wait_for(const std::function<bool(protocol::Peer&)>& pred, std::chrono::milliseconds timeout);

 private:
  struct ConnState {
    std::unique_ptr<Connection> conn;
    std::optional<protocol::PeerId> peer;
  };
  struct ValidationJob {
    std::uint64_t task_id;
    std::vector<std::pair<Cid, Bytes>> subjects;
  };

  // False once the loop has stopped (the task is dropped).
  bool post(std::function<void()> fn);
  void loop();
  void worker();
  protocol::Time now() const;
  static std::int64_t wall_ms();

  void accept(int fd, std::string remote);
  void dial(const std::string& address);
  void on_message(std::uint64_t conn, protocol::Message msg);
  void on_close(std::uint64_t conn, const std::string& reason);
  void apply(protocol::Step step, std::optional<std::uint64_t> origin = std::nullopt);
  void send(const protocol::PeerId& to, const protocol::Message& msg, std::optional<std::uint64_t> origin);
  void persist();
  void bootstrap();

  NodeConfig config_;
  std::chrono::steady_clock::time_point epoch_;
  std::optional<BlockStore> initial_blocks_;
  std::optional<ValidationsStore> initial_validations_;
  std::unique_ptr<protocol::Peer> peer_;
  std::unique_ptr<Listener> listener_;
  std::string advertised_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> tasks_;
  bool stopping_ = false;
  bool started_ = false;
  std::thread loop_thread_;
  std::atomic<std::thread::id> loop_id_{};

  std::mutex worker_mu_;
  std::condition_variable worker_cv_;
  std::deque<ValidationJob> jobs_;
  bool worker_stop_ = false;
  std::thread worker_thread_;

  std::mutex dial_mu_;
  std::vector<std::thread> dialers_;

  // Loop-thread state.
  std::map<std::uint64_t, ConnState> conns_;
  std::map<protocol::PeerId, std::uint64_t> peer_conn_;
  std::set<std::string> dialing_;
  std::uint64_t next_conn_ = 1;
  FrameHook frame_hook_;
  std::map<Cid, std::vector<std::shared_ptr<std::promise<std::optional<Bytes>>>>> fetch_waiters_;
  std::map<Cid, std::vector<std::shared_ptr<std::promise<void>>>> vote_waiters_;
  std::optional<std::promise<void>> bootstrap_done_;
  std::size_t sessions_opened_ = 0;
  std::set<Cid> persisted_heads_;
  std::size_t persisted_private_ = 0;
};

template <typename F>
auto Node::call(F&& fn) -> std::invoke_result_t<F, protocol::Peer&> {
  using R = std::invoke_result_t<F, protocol::Peer&>;
  if (std::this_thread::get_id() == loop_id_) return fn(*peer_);
  auto promise = std::make_shared<std::promise<R>>();
  auto future = promise->get_future();
  bool queued = post([this, promise, fn = std::forward<F>(fn)]() mutable {
    try {
      if constexpr (std::is_void_v<R>) {
        fn(*peer_);
        promise->set_value();
      } else {
        promise->set_value(fn(*peer_));
      }
    } catch (...) {
      promise->set_exception(std::current_exception());
    }
  });
  if (!queued) throw Error(ErrorCode::kIo, "node is not running");
  return future.get();
}

}  // namespace peerperf::node
