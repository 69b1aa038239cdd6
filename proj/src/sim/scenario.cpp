#include "peerperf/sim/scenario.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>

#include "peerperf/error.hpp"

namespace peerperf::sim {

namespace {

constexpr std::array<std::string_view, 5> kKindNames = {"transfer", "fuzz", "replication_burst",
                                                         "bootstrap_scaling", "validation_scaling"};
constexpr std::string_view kSimPassphrase = "peerperf-sim";

Time seconds(double s) { return from_ms(s * 1000.0); }

std::chrono::milliseconds whole_ms(double ms) {
  return std::chrono::milliseconds(static_cast<std::int64_t>(ms));
}

protocol::PeerConfig peer_config(const Scenario& s) {
  protocol::PeerConfig c;
  c.passphrase = std::string(kSimPassphrase);
  c.gossip_interval = whole_ms(s.gossip_interval_ms);
  c.fan_out = s.fan_out;
  c.response_timeout = whole_ms(s.response_timeout_ms);
  c.fetch_batch = s.fetch_batch;
  c.vote_policy = s.vote_policy;
  return c;
}

std::string region_for(const Scenario& s, std::size_t i) {
  if (!s.placements.empty()) return s.placements.at(i);
  return s.network.regions[i % s.network.regions.size()];
}

std::int64_t now_ms(const Simulator& sim) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(sim.now()).count();
}

void contribute_at(Simulator& sim, std::size_t author, Time at, std::uint64_t record_seed,
                   std::size_t bytes) {
  sim.schedule(at, author, [record_seed, bytes](Simulator& sim, std::size_t self) {
    std::mt19937_64 rng(record_seed);
    auto record = synthetic_record(rng, bytes);
    auto c = sim.peer(self).contribute(record, synthetic_attributes(record, sim.region(self)),
                                       now_ms(sim), sim.now());
    sim.record(self, "contribution_submitted", c.entry.entry_id.text());
    sim.apply(self, std::move(c.step));
  });
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

bool run_to_quiescence(Simulator& sim, Time not_before, Time limit) {
  bool ok = sim.run_until(
      [not_before](const Simulator& s) { return s.now() >= not_before && s.converged(); }, limit,
      std::chrono::milliseconds(100));
  return ok;
}

void replication_burst(const Scenario& s, Simulator& sim) {
  const auto cfg = peer_config(s);
  for (std::size_t i = 0; i < s.peers; ++i) sim.add_peer(region_for(s, i), cfg);
  for (std::size_t i = 0; i < s.peers; ++i) {
    sim.start_timers(i, Time{0});
    if (i > 0) sim.dial(i, 0, std::chrono::milliseconds(10 * i));
  }
  std::mt19937_64 rng(s.seed ^ 0x6275727374ULL);
  Time t = std::chrono::milliseconds(10 * s.peers) + seconds(3);
  const std::size_t files = s.full_scale ? 11133 : s.file_count;
  for (std::size_t f = 0; f < files; ++f) {
    t += from_ms(s.submit_interval_ms * uniform(rng, 0.5, 1.5));
    auto author = pick(rng, s.peers);
    auto bytes = static_cast<std::size_t>(s.mean_file_bytes * uniform(rng, 0.5, 1.5));
    contribute_at(sim, author, t, rng(), bytes);
  }
  bool ok = run_to_quiescence(sim, t, t + seconds(s.limit_s));
  sim.record(0, "converged", "", ok ? 1 : 0);
}

void bootstrap_scaling(const Scenario& s, Simulator& sim) {
  const auto cfg = peer_config(s);
  const auto& regions = s.network.regions;
  auto root = sim.add_peer(s.placements.empty() ? regions[0] : s.placements[0], cfg);
  sim.start_timers(root, Time{0});
  std::mt19937_64 rng(s.seed ^ 0x626f6f74ULL);
  for (std::size_t k = 0; k < s.initial_entries; ++k) {
    auto record = synthetic_record(rng, static_cast<std::size_t>(s.mean_file_bytes));
    sim.peer(root).contribute(record, synthetic_attributes(record, sim.region(root)), 0, Time{0});
  }
  std::vector<std::size_t> joiners;
  for (std::size_t j = 0; j < s.joiners; ++j) {
    auto region = s.placements.empty() ? regions[(j + 1) % regions.size()] : s.placements.at(j + 1);
    joiners.push_back(sim.add_peer(region, cfg));
  }
  Time t{0};
  for (std::size_t j = 0; j < joiners.size(); ++j) {
    t += seconds((j < s.late_after ? s.join_gap_s : s.late_join_gap_s) * s.time_scale);
    auto cluster = static_cast<double>(j + 1);
    sim.schedule(t, joiners[j], [root, cluster](Simulator& sim, std::size_t self) {
      sim.peer(self).begin_bootstrap(sim.now());
      sim.record(self, "bootstrap_start", "", cluster);
      sim.start_timers(self, sim.now());
      sim.dial(self, root, sim.now());
    });
  }
  bool ok = sim.run_until(
      [joiners](const Simulator& sim) {
        return std::all_of(joiners.begin(), joiners.end(),
                           [&](auto j) { return sim.peer(j).bootstrap_time().has_value(); });
      },
      t + seconds(s.limit_s), std::chrono::milliseconds(100));
  ok = ok && run_to_quiescence(sim, sim.now(), sim.now() + seconds(s.limit_s));
  sim.record(root, "converged", "", ok ? 1 : 0);
}

void transfer(const Scenario& s, Simulator& sim) {
  auto cfg = peer_config(s);
  cfg.auto_connect = false;
  cfg.pin_policy = protocol::PinPolicy::kPinOnUse;
  for (std::size_t i = 0; i < s.peers; ++i) sim.add_peer(region_for(s, i), cfg);
  std::mt19937_64 rng(s.seed ^ 0x7472616eULL);
  std::vector<std::pair<Cid, std::size_t>> files;
  for (auto size : s.file_sizes) {
    Bytes bytes(size);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
    files.emplace_back(sim.peer(0).blocks().put_block(bytes), size);
  }
  for (std::size_t i = 0; i < s.peers; ++i) {
    sim.start_timers(i, Time{0});
    if (i > 0) sim.dial(i, 0, std::chrono::milliseconds(10 * i));
  }

  auto started = std::make_shared<std::map<std::pair<std::size_t, Cid>, Time>>();
  auto sizes = std::make_shared<std::map<Cid, std::size_t>>();
  for (const auto& [cid, size] : files) (*sizes)[cid] = size;
  sim.on_event = [started, sizes](Simulator& sim, std::size_t peer, const protocol::Event& ev) {
    if (ev.kind != protocol::EventKind::kFetchSucceeded && ev.kind != protocol::EventKind::kFetchFailed) {
      return;
    }
    auto it = started->find({peer, *ev.subject});
    if (it == started->end()) return;
    auto size = std::to_string(sizes->at(*ev.subject));
    if (ev.kind == protocol::EventKind::kFetchSucceeded) {
      sim.record(peer, "transfer", size, static_cast<double>((sim.now() - it->second).count()));
    } else {
      sim.record(peer, "transfer_failed", size);
    }
    started->erase(it);
  };

  Time t = seconds(2);
  for (const auto& [cid, size] : files) {
    for (std::size_t i = 1; i < s.peers; ++i) {
      sim.schedule(t, i, [cid, started](Simulator& sim, std::size_t self) {
        (*started)[{self, cid}] = sim.now();
        sim.apply(self, sim.peer(self).fetch(cid, false, sim.now()));
      });
    }
    t += seconds(1);
  }
  bool ok = sim.run_until([started, t](const Simulator& sim) { return sim.now() >= t && started->empty(); },
                          t + seconds(s.limit_s), std::chrono::milliseconds(100));
  sim.record(0, "converged", "", ok ? 1 : 0);
  sim.on_event = nullptr;
}

void fuzz(const Scenario& s, Simulator& sim) {
  auto cfg = peer_config(s);
  cfg.auto_connect = false;
  for (std::size_t i = 0; i < s.peers; ++i) sim.add_peer(region_for(s, i), cfg);
  std::mt19937_64 rng(s.seed ^ 0x66757a7aULL);

  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 1; i < s.peers; ++i) edges.insert({pick(rng, i), i});
  const std::size_t max_edges = s.peers * (s.peers - 1) / 2;
  for (std::size_t k = 0; k < s.extra_edges && edges.size() < max_edges; ++k) {
    auto a = pick(rng, s.peers);
    auto b = pick(rng, s.peers);
    if (a != b) edges.insert({std::min(a, b), std::max(a, b)});
  }
  for (std::size_t i = 0; i < s.peers; ++i) sim.start_timers(i, Time{0});
  for (const auto& [a, b] : edges) sim.dial(b, a, from_ms(uniform(rng, 0, 500)));

  const std::vector<std::pair<std::size_t, std::size_t>> edge_list(edges.begin(), edges.end());
  for (std::size_t k = 0; k < s.contributions; ++k) {
    auto at = seconds(uniform(rng, 1, s.active_s));
    contribute_at(sim, pick(rng, s.peers), at, rng(), static_cast<std::size_t>(uniform(rng, 400, 4000)));
  }
  for (std::size_t k = 0; k < s.churn_events; ++k) {
    auto at = seconds(uniform(rng, 1, s.active_s));
    if (k % 4 == 3) {
      auto p = pick(rng, s.peers);
      sim.set_online(p, false, at);
      sim.set_online(p, true, at + seconds(uniform(rng, 1, 4)));
    } else {
      auto [a, b] = edge_list[pick(rng, edge_list.size())];
      sim.cut(a, b, at);
      sim.dial(a, b, at + seconds(uniform(rng, 0.2, 3)));
    }
  }

  // Stabilize: every peer back online and every edge reconnected.
  const Time stable = seconds(s.active_s + 5);
  for (std::size_t i = 0; i < s.peers; ++i) sim.set_online(i, true, stable);
  for (const auto& [a, b] : edges) {
    sim.schedule(stable + std::chrono::milliseconds(1), b, [a](Simulator& sim, std::size_t self) {
      if (!sim.linked(self, a) || !sim.peer(self).authenticated(sim.peer(a).id())) {
        sim.dial(self, a, sim.now());
      }
    });
  }
  bool ok = run_to_quiescence(sim, stable + seconds(1), stable + seconds(s.limit_s));
  sim.record(0, "converged", "", ok ? 1 : 0);
}

void validation_scaling(const Scenario& s, Simulator& sim) {
  auto cfg = peer_config(s);
  const auto models = scaling_cost_models(s.batch_overhead_ms);
  const auto querier = sim.add_peer(region_for(s, 0), cfg);
  std::vector<std::size_t> validators;
  for (const auto& m : models) validators.push_back(sim.add_peer(region_for(s, 0), cfg, m));
  for (std::size_t i = 0; i <= validators.size(); ++i) sim.start_timers(i, Time{0});
  for (auto v : validators) sim.dial(querier, v, Time{0});

  std::mt19937_64 rng(s.seed ^ 0x76616cULL);
  const Time t0 = seconds(2);
  std::map<std::size_t, Cid> probe;  // validator -> subject still in flight at query time
  for (std::size_t k = 0; k < validators.size(); ++k) {
    const auto v = validators[k];
    const auto shape = std::string(to_string(models[k].shape));
    for (bool batched : {true, false}) {
      for (auto n : s.point_counts) {
        std::vector<Cid> subjects;
        for (std::uint64_t i = 0; i < n; ++i) {
          auto record = synthetic_record(rng, 300);
          subjects.push_back(sim.peer(v).blocks().put_block(as_bytes(record.canonical_encoding())));
        }
        if (!subjects.empty()) probe[v] = subjects.back();
        auto label = shape + ":n=" + std::to_string(n) + (batched ? ":batched" : ":unbatched");
        sim.schedule(t0, v, [subjects, batched, label](Simulator& sim, std::size_t self) {
          sim.reset_validation_busy(self);
          if (batched && subjects.empty()) {
            protocol::Step step;
            step.start_validation.push_back(ValidationTask{0, {}});
            sim.apply(self, std::move(step));
          } else if (batched) {
            sim.apply(self, sim.peer(self).schedule_validation(subjects));
          } else {
            for (const auto& c : subjects) {
              sim.apply(self, sim.peer(self).schedule_validation(std::span<const Cid>(&c, 1)));
            }
          }
          sim.record(self, "validation_run", label, sim.validation_busy_ms(self));
        });
      }
    }
  }

  auto asked = std::make_shared<std::map<Cid, std::pair<Time, std::string>>>();
  sim.on_event = [asked, querier](Simulator& sim, std::size_t peer, const protocol::Event& ev) {
    if (peer != querier || ev.kind != protocol::EventKind::kVoteDecided) return;
    auto it = asked->find(*ev.subject);
    if (it == asked->end()) return;
    sim.record(peer, "validation_query_latency", it->second.second,
               static_cast<double>((sim.now() - it->second.first).count()));
    asked->erase(it);
  };
  for (std::size_t k = 0; k < validators.size(); ++k) {
    auto it = probe.find(validators[k]);
    if (it == probe.end()) continue;
    auto subject = it->second;
    auto label = std::string(to_string(models[k].shape));
    sim.schedule(t0 + std::chrono::milliseconds(1 + 100 * k), querier,
                 [subject, label, asked](Simulator& sim, std::size_t self) {
                   (*asked)[subject] = {sim.now(), label};
                   sim.apply(self, sim.peer(self).request_votes(subject, sim.now()));
                 });
  }
  bool ok = sim.run_until(
      [validators](const Simulator& sim) {
        return sim.now() > seconds(3) &&
               std::all_of(validators.begin(), validators.end(),
                           [&](auto v) { return sim.peer(v).scheduler().in_flight() == 0; });
      },
      t0 + seconds(s.limit_s), std::chrono::milliseconds(100));
  sim.record(querier, "converged", "", ok ? 1 : 0);
  sim.on_event = nullptr;
}

template <typename T>
std::vector<T> parse_numbers(const KeyValues& kv, const std::string& key, std::vector<T> fallback) {
  if (!kv.has(key)) return fallback;
  std::vector<T> out;
  KeyValues one(ErrorCode::kScenarioInvalid);
  for (const auto& item : kv.list(key)) {
    one.set(key, item);
    out.push_back(static_cast<T>(one.count(key, 0)));
  }
  return out;
}

}  // namespace

std::string_view to_string(ScenarioKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

std::optional<ScenarioKind> parse_scenario_kind(std::string_view text) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == text) return static_cast<ScenarioKind>(i);
  }
  return std::nullopt;
}

PerformanceRecord synthetic_record(std::mt19937_64& rng, std::size_t target_bytes) {
  static constexpr std::array<const char*, 5> kWorkloads = {"sort", "grep", "wordcount", "pagerank",
                                                            "kmeans"};
  static constexpr std::array<const char*, 3> kFrameworks = {"spark", "flink", "hadoop"};
  static constexpr std::array<const char*, 4> kMachines = {"n2-standard-4", "n2-standard-8",
                                                           "e2-highmem-4", "c2-standard-8"};
  PerformanceRecord r;
  r.workload = kWorkloads[pick(rng, kWorkloads.size())];
  r.framework = kFrameworks[pick(rng, kFrameworks.size())];
  r.framework_version = "3." + std::to_string(pick(rng, 5));
  r.machine_type = kMachines[pick(rng, kMachines.size())];
  r.node_count = static_cast<std::int64_t>(2 + pick(rng, 31));
  r.input_size_bytes = static_cast<std::int64_t>(1 + pick(rng, 1u << 30));
  r.runtime_ms = static_cast<std::int64_t>(1000 + pick(rng, 3'600'000));
  r.extra_metrics["cpu_util"] = static_cast<double>(pick(rng, 1000)) / 1000.0;
  const auto base = r.canonical_encoding().size();
  if (target_bytes > base) {
    r.extra_metrics["x"] = 0;
    const auto with_key = r.canonical_encoding().size();
    r.extra_metrics.erase("x");
    if (target_bytes >= with_key) r.extra_metrics["x" + std::string(target_bytes - with_key, 'p')] = 0;
  }
  return r;
}

Attributes synthetic_attributes(const PerformanceRecord& record, const std::string& region) {
  return {{"framework", record.framework},
          {"platform", record.machine_type},
          {"schema_version", "1"},
          {"submitter_region", region},
          {"workload", record.workload}};
}

std::vector<CostModel> scaling_cost_models(std::uint64_t batch_overhead_ms) {
  const auto o = static_cast<double>(batch_overhead_ms);
  return {
      {CostShape::kConstant, {7}, o},
      {CostShape::kLinear, {2, 10}, o},
      {CostShape::kPolynomial, {2, 0.5, 2}, o},
      {CostShape::kExponential, {1, 2}, o},
      {CostShape::kLogarithmic, {1, 4}, o},
  };
}

std::string Scenario::problem() const {
  if (auto p = network.problem(); !p.empty()) return p;
  const std::size_t needed = kind == ScenarioKind::kBootstrapScaling     ? joiners + 1
                             : kind == ScenarioKind::kValidationScaling ? 1
                                                                         : peers;
  if (needed == 0) return "no peers";
  if (kind == ScenarioKind::kFuzz && peers < 2) return "fuzz needs at least 2 peers";
  if (kind == ScenarioKind::kTransfer && peers < 2) return "transfer needs at least 2 peers";
  if (!placements.empty()) {
    if (placements.size() < needed) return "fewer placements than peers";
    for (const auto& r : placements) {
      if (std::find(network.regions.begin(), network.regions.end(), r) == network.regions.end()) {
        return "unknown region " + r;
      }
    }
  }
  if (!(gossip_interval_ms >= 1) || !(response_timeout_ms >= 1)) return "durations must be positive";
  if (fan_out == 0 || fetch_batch == 0) return "fan_out and fetch_batch must be positive";
  if (!vote_policy.valid()) return "vote policy";
  if (!(mean_file_bytes > 0) || mean_file_bytes * 1.5 > 1 << 20) return "mean_file_bytes";
  if (!(submit_interval_ms > 0)) return "submit_interval_ms must be positive";
  for (auto f : file_sizes) {
    if (f == 0 || f > (1u << 20)) return "file_sizes";
  }
  if (!(time_scale > 0) || join_gap_s < 0 || late_join_gap_s < 0) return "join schedule";
  if (!(active_s > 1)) return "active_s must exceed 1";
  if (!(limit_s > 0)) return "limit_s must be positive";
  return {};
}

Scenario default_scenario(ScenarioKind kind) {
  Scenario s;
  s.kind = kind;
  switch (kind) {
    case ScenarioKind::kTransfer:
      s.peers = 6;
      break;
    case ScenarioKind::kFuzz:
      s.peers = 16;
      s.limit_s = 300;
      break;
    case ScenarioKind::kReplicationBurst:
      s.peers = 32;
      s.placements.push_back(s.network.regions[0]);
      for (std::size_t i = 0; i < 31; ++i) {
        s.placements.push_back(s.network.regions[i % s.network.regions.size()]);
      }
      break;
    case ScenarioKind::kBootstrapScaling:
      s.peers = 53;
      break;
    case ScenarioKind::kValidationScaling:
      s.peers = 6;
      s.network.jitter_ms = 0;
      s.limit_s = 7200;
      break;
  }
  return s;
}

Scenario parse_scenario(const KeyValues& kv) {
  auto kind_text = kv.text("kind", "replication_burst");
  auto kind = parse_scenario_kind(kind_text);
  if (!kind) throw Error(ErrorCode::kScenarioInvalid, "kind: " + kind_text);
  static const std::set<std::string> known = {
      "kind", "seed", "peers", "placements", "gossip_interval_ms", "fan_out", "response_timeout_ms",
      "fetch_batch", "k_required", "accept_threshold", "file_count", "mean_file_bytes",
      "submit_interval_ms", "full_scale", "file_sizes", "joiners", "initial_entries", "join_gap_s",
      "late_join_gap_s", "late_after", "time_scale", "extra_edges", "contributions", "churn_events",
      "active_s", "point_counts", "batch_overhead_ms", "limit_s", "jitter_ms", "bandwidth_bps",
      "processing_ms", "connection_setup_ms", "regions"};
  if (auto extra = kv.unknown(known, {"latency."}); !extra.empty()) {
    throw Error(ErrorCode::kScenarioInvalid, "unknown key " + extra.front());
  }

  Scenario s = default_scenario(*kind);
  s.seed = kv.count("seed", s.seed);
  if (kv.has("regions")) {
    s.network.regions = kv.list("regions");
    const auto n = s.network.regions.size();
    s.network.latency_ms.assign(n, std::vector<double>(n, 0));
    if (!kv.has("placements")) s.placements.clear();
  }
  for (const auto& [key, _] : kv.values()) {
    if (!key.starts_with("latency.")) continue;
    auto rest = key.substr(8);
    auto dot = rest.find('.');
    if (dot == std::string::npos) throw Error(ErrorCode::kScenarioInvalid, key);
    auto a = s.network.region_index(rest.substr(0, dot));
    auto b = s.network.region_index(rest.substr(dot + 1));
    s.network.latency_ms[a][b] = s.network.latency_ms[b][a] = kv.number(key, 0);
  }
  s.network.jitter_ms = kv.number("jitter_ms", s.network.jitter_ms);
  s.network.bandwidth_bps = kv.number("bandwidth_bps", s.network.bandwidth_bps);
  s.network.processing_ms = kv.number("processing_ms", s.network.processing_ms);
  s.network.connection_setup_ms = kv.number("connection_setup_ms", s.network.connection_setup_ms);

  if (kv.has("placements")) s.placements = kv.list("placements");
  s.peers = kv.count("peers", s.peers);
  if (kv.has("peers") && !kv.has("placements") && s.placements.size() != s.peers) s.placements.clear();
  s.gossip_interval_ms = kv.number("gossip_interval_ms", s.gossip_interval_ms);
  s.fan_out = kv.count("fan_out", s.fan_out);
  s.response_timeout_ms = kv.number("response_timeout_ms", s.response_timeout_ms);
  s.fetch_batch = kv.count("fetch_batch", s.fetch_batch);
  s.vote_policy.k_required = static_cast<std::int64_t>(kv.count("k_required", 5));
  s.vote_policy.response_timeout_ms = static_cast<std::int64_t>(s.response_timeout_ms);
  if (auto t = kv.get("accept_threshold")) {
    auto slash = t->find('/');
    KeyValues parts(ErrorCode::kScenarioInvalid);
    parts.set("num", t->substr(0, slash));
    parts.set("den", slash == std::string::npos ? "" : t->substr(slash + 1));
    s.vote_policy.accept_threshold = {static_cast<std::int64_t>(parts.count("num", 0)),
                                      static_cast<std::int64_t>(parts.count("den", 0))};
  }
  s.file_count = kv.count("file_count", s.file_count);
  s.mean_file_bytes = kv.number("mean_file_bytes", s.mean_file_bytes);
  s.submit_interval_ms = kv.number("submit_interval_ms", s.submit_interval_ms);
  s.full_scale = kv.flag("full_scale", s.full_scale);
  s.file_sizes = parse_numbers<std::size_t>(kv, "file_sizes", s.file_sizes);
  s.joiners = kv.count("joiners", s.joiners);
  s.initial_entries = kv.count("initial_entries", s.initial_entries);
  s.join_gap_s = kv.number("join_gap_s", s.join_gap_s);
  s.late_join_gap_s = kv.number("late_join_gap_s", s.late_join_gap_s);
  s.late_after = kv.count("late_after", s.late_after);
  s.time_scale = kv.number("time_scale", s.time_scale);
  s.extra_edges = kv.count("extra_edges", s.extra_edges);
  s.contributions = kv.count("contributions", s.contributions);
  s.churn_events = kv.count("churn_events", s.churn_events);
  s.active_s = kv.number("active_s", s.active_s);
  s.point_counts = parse_numbers<std::uint64_t>(kv, "point_counts", s.point_counts);
  s.batch_overhead_ms = kv.count("batch_overhead_ms", s.batch_overhead_ms);
  s.limit_s = kv.number("limit_s", s.limit_s);
  if (auto p = s.problem(); !p.empty()) throw Error(ErrorCode::kScenarioInvalid, p);
  return s;
}

Scenario parse_scenario(std::string_view text) {
  return parse_scenario(KeyValues::parse(text, ErrorCode::kScenarioInvalid));
}

Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(KeyValues::load(path, ErrorCode::kScenarioInvalid));
}

ScenarioRun execute_scenario(const Scenario& s) {
  if (auto p = s.problem(); !p.empty()) throw Error(ErrorCode::kScenarioInvalid, p);
  ScenarioRun run;
  run.sim = std::make_unique<Simulator>(s.network, s.seed);
  switch (s.kind) {
    case ScenarioKind::kTransfer: transfer(s, *run.sim); break;
    case ScenarioKind::kFuzz: fuzz(s, *run.sim); break;
    case ScenarioKind::kReplicationBurst: replication_burst(s, *run.sim); break;
    case ScenarioKind::kBootstrapScaling: bootstrap_scaling(s, *run.sim); break;
    case ScenarioKind::kValidationScaling: validation_scaling(s, *run.sim); break;
  }
  run.report.events = run.sim->events();
  run.report.summary = summarize(run.report.events);
  return run;
}

MetricsReport run_scenario(const Scenario& s) { return execute_scenario(s).report; }

}  // namespace peerperf::sim
