#include "peerperf/sim/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "peerperf/error.hpp"

namespace peerperf::sim {

using protocol::EventKind;
using protocol::Message;
using protocol::PeerId;

namespace {
constexpr Time kPollInterval = std::chrono::milliseconds(200);
}

Time from_ms(double ms) { return Time(std::llround(ms * 1000.0)); }

Simulator::Simulator(NetworkModel network, std::uint64_t seed) : net_(std::move(network)), rng_(seed) {
  if (auto p = net_.problem(); !p.empty()) throw Error(ErrorCode::kScenarioInvalid, p);
}

std::size_t Simulator::add_peer(const std::string& region, protocol::PeerConfig config,
                                CostModel validation_cost) {
  auto id = PeerId::random(rng_);
  while (by_id_.contains(id)) id = PeerId::random(rng_);
  config.region = region;
  config.address = id.text();
  Node node;
  node.region = region;
  node.region_index = net_.region_index(region);
  node.validation_cost = std::move(validation_cost);
  node.peer = std::make_unique<protocol::Peer>(std::move(config), id, BlockStore{}, ValidationsStore{},
                                               rng_());
  nodes_.push_back(std::move(node));
  by_id_[id] = nodes_.size() - 1;
  record(nodes_.size() - 1, "peer", region);
  return nodes_.size() - 1;
}

std::optional<std::size_t> Simulator::index_of(const PeerId& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

void Simulator::push(Time at, std::size_t peer, decltype(Item::what) what) {
  queue_.push(Item{at, nodes_.at(peer).peer->id(), seq_++, peer, std::move(what)});
}

void Simulator::start_timers(std::size_t peer, Time at) {
  auto& node = nodes_.at(peer);
  if (node.timers) return;
  node.timers = true;
  auto interval = std::chrono::duration_cast<Time>(node.peer->config().gossip_interval);
  std::uniform_int_distribution<std::int64_t> offset(0, std::max<std::int64_t>(interval.count() - 1, 0));
  push(at + Time(offset(rng_)), peer, Timer{true});
  push(at + Time(offset(rng_) % kPollInterval.count()), peer, Timer{false});
}

void Simulator::schedule(Time at, std::size_t peer, Action action) { push(at, peer, std::move(action)); }

Simulator::Link& Simulator::link(std::size_t a, std::size_t b) { return links_[key(a, b)]; }

bool Simulator::linked(std::size_t a, std::size_t b) const {
  auto it = links_.find(key(a, b));
  return it != links_.end() && it->second.up;
}

void Simulator::dial(std::size_t from, std::size_t to, Time at) {
  schedule(at, from, [to](Simulator& sim, std::size_t self) {
    if (self == to || !sim.online(self) || !sim.online(to)) return;
    auto& l = sim.link(self, to);
    if (!l.up) {
      l.up = true;
      ++l.epoch;
    }
    auto hello = sim.peer(self).initiate_handshake(sim.peer(to).id().text(), sim.now());
    sim.send(self, to, std::move(hello));
  });
}

void Simulator::cut(std::size_t a, std::size_t b, Time at) {
  schedule(at, a, [b](Simulator& sim, std::size_t self) { sim.drop_link(self, b, true); });
}

void Simulator::set_online(std::size_t peer, bool online, Time at) {
  schedule(at, peer, [online](Simulator& sim, std::size_t self) {
    auto& node = sim.nodes_.at(self);
    if (node.online == online) return;
    if (!online) {
      for (std::size_t other = 0; other < sim.nodes_.size(); ++other) {
        if (other != self && sim.linked(self, other)) sim.drop_link(self, other, true);
      }
    }
    node.online = online;
    sim.record(self, online ? "online" : "offline", "");
  });
}

void Simulator::drop_link(std::size_t a, std::size_t b, bool notify_a) {
  auto& l = link(a, b);
  if (!l.up) return;
  l.up = false;
  ++l.epoch;
  auto lat = from_ms(net_.latency(nodes_[a].region_index, nodes_[b].region_index));
  push(now_ + lat, b, Disconnected{a, l.epoch});
  if (notify_a) apply(a, nodes_[a].peer->on_disconnect(nodes_[b].peer->id(), now_));
}

void Simulator::send(std::size_t from, std::size_t to, Message message) {
  if (!linked(from, to)) return;
  auto& src = nodes_[from];
  const auto& dst = nodes_[to];
  std::size_t bytes = protocol::encode_message(message).size() + 4;
  if (on_send) on_send(from, to, message, bytes);

  auto start = std::max(now_, src.egress_free);
  auto tx = Time(static_cast<std::int64_t>(
      std::ceil(static_cast<double>(bytes) * 8.0 * 1e6 / net_.bandwidth_bps)));
  src.egress_free = start + tx;
  double latency = net_.latency(src.region_index, dst.region_index);
  if (net_.jitter_ms > 0) {
    std::uniform_real_distribution<double> jitter(-net_.jitter_ms, net_.jitter_ms);
    latency = std::max(latency + jitter(rng_), 0.1);
  }
  auto arrival = start + tx + from_ms(latency);
  auto& last = last_arrival_[{from, to}];
  arrival = std::max(arrival, last);
  last = arrival;
  push(arrival, to, Deliver{from, std::move(message), link(from, to).epoch});
}

void Simulator::apply(std::size_t peer, protocol::Step step) {
  for (auto& o : step.out) {
    if (auto to = index_of(o.to)) send(peer, *to, std::move(o.message));
  }
  for (const auto& id : step.disconnect) {
    if (auto other = index_of(id)) drop_link(peer, *other, false);
  }
  for (const auto& address : step.connect) {
    auto id = PeerId::parse(address);
    if (!id) continue;
    if (auto to = index_of(*id)) dial(peer, *to, now_);
  }
  auto& node = nodes_[peer];
  for (auto& task : step.start_validation) {
    const auto& model = node.validation_cost;
    double cost_ms = validation_cost(model, task.subjects.size(), true);
    node.validation_ms += cost_ms;
    ++node.validations_run;
    auto start = std::max(now_, node.worker_free);
    node.worker_free = start + from_ms(cost_ms);
    push(node.worker_free, peer, ValidationDone{std::move(task)});
  }
  for (const auto& ev : step.events) {
    if (ev.kind == EventKind::kEntryReplicated && ev.detail != "local") {
      record(peer, "entry_replicated", ev.subject->text());
    } else if (ev.kind == EventKind::kBootstrapComplete) {
      record(peer, "bootstrap_complete", "");
    }
    if (on_event) on_event(*this, peer, ev);
  }
}

void Simulator::process(Item item) {
  auto& node = nodes_[item.peer];
  now_ = item.at;
  if (std::holds_alternative<ValidationDone>(item.what)) {
    auto& task = std::get<ValidationDone>(item.what).task;
    std::vector<ValidationRecord> records;
    auto now_ms = std::chrono::duration_cast<std::chrono::milliseconds>(now_).count();
    for (const auto& s : task.subjects) {
      if (auto bytes = node.peer->blocks().get_block(s)) {
        records.push_back(evaluate(s, *bytes, node.peer->config().validator, now_ms));
      }
    }
    apply(item.peer, node.peer->complete_validation(task.id, records));
    return;
  }
  if (std::holds_alternative<Disconnected>(item.what)) {
    const auto& d = std::get<Disconnected>(item.what);
    if (link(item.peer, d.other).epoch != d.epoch) return;
    apply(item.peer, node.peer->on_disconnect(nodes_[d.other].peer->id(), now_));
    return;
  }
  if (std::holds_alternative<Action>(item.what)) {
    std::get<Action>(item.what)(*this, item.peer);
    return;
  }

  if (std::holds_alternative<Timer>(item.what)) {
    bool gossip = std::get<Timer>(item.what).gossip;
    auto interval = gossip ? std::chrono::duration_cast<Time>(node.peer->config().gossip_interval)
                           : kPollInterval;
    push(now_ + interval, item.peer, Timer{gossip});
    if (!node.online) return;
    apply(item.peer, gossip ? node.peer->gossip_tick(now_) : node.peer->poll(now_));
    return;
  }

  auto& d = std::get<Deliver>(item.what);
  if (!node.online || link(d.from, item.peer).epoch != d.epoch || !linked(d.from, item.peer)) return;
  if (node.cpu_free > now_) {
    push(node.cpu_free, item.peer, std::move(item.what));
    return;
  }
  double cost = net_.processing_ms;
  if (std::holds_alternative<protocol::Hello>(d.message) ||
      std::holds_alternative<protocol::HelloAck>(d.message)) {
    cost += net_.connection_setup_ms;
  }
  now_ = now_ + from_ms(cost);
  node.cpu_free = now_;
  ++delivered_;
  apply(item.peer, node.peer->handle_message(nodes_[d.from].peer->id(), d.message, now_));
}

void Simulator::run_until(Time end) {
  while (!queue_.empty() && queue_.top().at <= end) {
    Item item = queue_.top();
    queue_.pop();
    process(std::move(item));
  }
  now_ = std::max(now_, end);
}

bool Simulator::run_until(const std::function<bool(const Simulator&)>& done, Time limit, Time every) {
  for (;;) {
    if (done(*this)) return true;
    if (now_ >= limit) return false;
    run_until(std::min(now_ + every, limit));
  }
}

void Simulator::record(std::size_t peer, std::string type, std::string subject, double value) {
  events_.push_back({now_.count(), nodes_.at(peer).peer->id().text(), std::move(type), std::move(subject), value});
}

bool Simulator::converged() const {
  const protocol::Peer* ref = nullptr;
  for (const auto& n : nodes_) {
    if (!n.online) continue;
    if (n.peer->pending_replications() != 0) return false;
    if (!ref) {
      ref = n.peer.get();
      continue;
    }
    if (n.peer->log().heads() != ref->log().heads() || n.peer->log().size() != ref->log().size()) {
      return false;
    }
  }
  return true;
}

}  // namespace peerperf::sim
