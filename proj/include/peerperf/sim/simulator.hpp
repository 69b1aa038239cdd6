#pragma once

// Seeded discrete-event driver for protocol::Peer state machines.
//
// Each peer owns a CPU (inbound messages and timers are processed one at a
// time, each costing NetworkModel::processing_ms) and an egress link shared by
// all its connections. A message sent at t arrives at
//   max(t, egress_free) + size/bandwidth + latency + jitter
// and links deliver in FIFO order. Ties in time are broken by (peer id,
// sequence number), so a run is a pure function of (setup, seed).
// Validation tasks run on a separate per-peer worker and never occupy the CPU.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "peerperf/protocol/peer.hpp"
#include "peerperf/sim/metrics.hpp"
#include "peerperf/sim/network.hpp"
#include "peerperf/validation.hpp"

namespace peerperf::sim {

using protocol::Time;

Time from_ms(double ms);

class Simulator {
 public:
  using Action = std::function<void(Simulator&, std::size_t peer)>;
  using EventHook = std::function<void(Simulator&, std::size_t peer, const protocol::Event&)>;
  using SendHook = std::function<void(std::size_t from, std::size_t to, const protocol::Message&,
                                      std::size_t frame_bytes)>;

  Simulator(NetworkModel network, std::uint64_t seed);

  std::size_t add_peer(const std::string& region, protocol::PeerConfig config,
                       CostModel validation_cost = {});
  std::size_t peer_count() const { return nodes_.size(); }
  protocol::Peer& peer(std::size_t i) { return *nodes_.at(i).peer; }
  const protocol::Peer& peer(std::size_t i) const { return *nodes_.at(i).peer; }
  const std::string& region(std::size_t i) const { return nodes_.at(i).region; }
  std::optional<std::size_t> index_of(const protocol::PeerId& id) const;

  Time now() const { return now_; }
  std::mt19937_64& rng() { return rng_; }

  // Starts gossip/poll timers for a peer (first tick at a seeded offset).
  void start_timers(std::size_t peer, Time at);
  // Opens a connection and sends HELLO from `from` to `to`.
  void dial(std::size_t from, std::size_t to, Time at);
  // Runs `action` on the peer's event loop at `at` (costs no CPU time).
  void schedule(Time at, std::size_t peer, Action action);
  // Closes the connection between two peers (both sides see it drop).
  void cut(std::size_t a, std::size_t b, Time at);
  // Takes a peer off the network (all links drop) or back on.
  void set_online(std::size_t peer, bool online, Time at);
  bool online(std::size_t peer) const { return nodes_.at(peer).online; }
  bool linked(std::size_t a, std::size_t b) const;

  // Routes a Step produced by `peer` at the current time.
  void apply(std::size_t peer, protocol::Step step);

  void run_until(Time end);
  // Runs until `done` holds (checked every `every`) or `limit` is reached.
  bool run_until(const std::function<bool(const Simulator&)>& done, Time limit, Time every);

  void record(std::size_t peer, std::string type, std::string subject, double value = 0);
  std::vector<EventRecord>& events() { return events_; }

  EventHook on_event;
  SendHook on_send;

  // Simulated milliseconds spent by each peer's validation worker.
  double validation_busy_ms(std::size_t peer) const { return nodes_.at(peer).validation_ms; }
  void reset_validation_busy(std::size_t peer) { nodes_.at(peer).validation_ms = 0; }
  std::uint64_t executed_validations(std::size_t peer) const { return nodes_.at(peer).validations_run; }
  std::uint64_t messages_delivered() const { return delivered_; }

  // Logs (entries + heads) identical on every online peer.
  bool converged() const;

 private:
  struct Node {
    std::unique_ptr<protocol::Peer> peer;
    std::string region;
    std::size_t region_index = 0;
    CostModel validation_cost;
    bool online = true;
    bool timers = false;
    Time cpu_free{0};
    Time egress_free{0};
    Time worker_free{0};
    double validation_ms = 0;
    std::uint64_t validations_run = 0;
  };
  struct Deliver {
    std::size_t from;
    protocol::Message message;
    std::uint64_t epoch;
  };
  struct Timer {
    bool gossip;
  };
  struct Disconnected {
    std::size_t other;
    std::uint64_t epoch;
  };
  struct ValidationDone {
    ValidationTask task;
  };
  struct Item {
    Time at;
    protocol::PeerId key;
    std::uint64_t seq;
    std::size_t peer;
    std::variant<Deliver, Timer, Action, Disconnected, ValidationDone> what;
  };
  struct Later {
    bool operator()(const Item& a, const Item& b) const {
      return std::tie(a.at, a.key, a.seq) > std::tie(b.at, b.key, b.seq);
    }
  };
  struct Link {
    bool up = false;
    std::uint64_t epoch = 0;
  };

  void push(Time at, std::size_t peer, decltype(Item::what) what);
  void process(Item item);
  void send(std::size_t from, std::size_t to, protocol::Message message);
  void drop_link(std::size_t a, std::size_t b, bool notify_a);
  Link& link(std::size_t a, std::size_t b);
  std::pair<std::size_t, std::size_t> key(std::size_t a, std::size_t b) const {
    return a < b ? std::pair{a, b} : std::pair{b, a};
  }

  NetworkModel net_;
  std::mt19937_64 rng_;
  std::vector<Node> nodes_;
  std::map<protocol::PeerId, std::size_t> by_id_;
  std::map<std::pair<std::size_t, std::size_t>, Link> links_;
  std::map<std::pair<std::size_t, std::size_t>, Time> last_arrival_;
  std::priority_queue<Item, std::vector<Item>, Later> queue_;
  std::uint64_t seq_ = 0;
  std::uint64_t delivered_ = 0;
  Time now_{0};
  std::vector<EventRecord> events_;
};

}  // namespace peerperf::sim
