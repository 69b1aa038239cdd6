#include <doctest.h>

#include <cmath>

#include "peerperf/error.hpp"
#include "peerperf/sim/scenario.hpp"
#include "support.hpp"

using namespace peerperf;
using namespace peerperf::sim;
using testing::error_code;

namespace {

NetworkModel two_regions(double latency_ms) {
  NetworkModel n;
  n.regions = {"here", "there"};
  n.latency_ms = {{1, latency_ms}, {latency_ms, 1}};
  n.jitter_ms = 0;
  return n;
}

protocol::PeerConfig peer_config() {
  protocol::PeerConfig c;
  c.passphrase = "sim";
  c.auto_connect = false;
  return c;
}

// Cost of one message leg under the network model: egress time rounded up
// to the microsecond clock, one-way latency, receiver processing.
std::int64_t leg_us(std::size_t frame_bytes, double latency_ms, double processing_ms) {
  auto tx = static_cast<std::int64_t>(std::ceil(static_cast<double>(frame_bytes) * 8.0 * 1e6 / 4e9));
  return tx + std::llround(latency_ms * 1000) + std::llround(processing_ms * 1000);
}

Scenario small_burst(std::uint64_t seed) {
  auto s = default_scenario(ScenarioKind::kReplicationBurst);
  s.seed = seed;
  s.peers = 8;
  s.placements.clear();
  s.file_count = 30;
  return s;
}

}  // namespace

TEST_CASE("default region matrix") {
  auto m = default_region_matrix();
  CHECK(m.problem().empty());
  CHECK(m.regions == std::vector<std::string>{"asia-east2", "europe-west3", "us-west1", "south-america-east1",
                                              "me-west1", "australia-southeast1"});
  REQUIRE(m.latency_ms.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    REQUIRE(m.latency_ms[i].size() == 6);
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(m.latency(i, j) > 0);
      CHECK(m.latency(i, j) == m.latency(j, i));
      if (i != j) {
        CHECK(m.latency(i, i) < m.latency(i, j));
        for (std::size_t k = 0; k < 6; ++k) CHECK(m.latency(i, j) <= m.latency(i, k) + m.latency(k, j));
      }
    }
  }
  CHECK(m.latency(m.region_index("europe-west3"), m.region_index("australia-southeast1")) == 140);
  CHECK(m.latency(0, 0) == 1);
  CHECK(m.bandwidth_bps == 4e9);
}

TEST_CASE("network model validation") {
  auto m = two_regions(100);
  m.latency_ms[0][1] = 50;
  CHECK_FALSE(m.problem().empty());
  m = two_regions(100);
  m.bandwidth_bps = 0;
  CHECK_FALSE(m.problem().empty());
  m = two_regions(100);
  m.latency_ms[0][0] = 0;
  CHECK_FALSE(m.problem().empty());
  CHECK(error_code([&] { Simulator(m, 1); }) == ErrorCode::kScenarioInvalid);
}

TEST_CASE("two-peer replication time matches the message trace") {
  const double latency = 100;
  Simulator sim(two_regions(latency), 1);
  auto a = sim.add_peer("here", peer_config());
  auto b = sim.add_peer("there", peer_config());
  sim.dial(b, a, Time{0});
  sim.run_until(from_ms(5000));
  REQUIRE(sim.peer(a).authenticated(sim.peer(b).id()));

  std::mt19937_64 rng(3);
  auto record = synthetic_record(rng, 9060);
  REQUIRE(record.canonical_encoding().size() == 9060);
  std::vector<std::pair<std::string, std::size_t>> frames;
  sim.on_send = [&](std::size_t, std::size_t, const protocol::Message& m, std::size_t bytes) {
    frames.emplace_back(std::string(protocol::message_type(m)), bytes);
  };
  const Time t0 = from_ms(10000);
  Cid entry;
  sim.schedule(t0, a, [&](Simulator& s, std::size_t p) {
    auto c = s.peer(p).contribute(record, synthetic_attributes(record, "here"), 0, s.now());
    entry = c.entry.entry_id;
    s.apply(p, std::move(c.step));
  });
  sim.run_until(from_ms(20000));
  REQUIRE(sim.peer(b).replicated(entry));

  std::vector<std::string> types;
  std::int64_t expected = 0;
  for (const auto& [type, bytes] : frames) {
    types.push_back(type);
    expected += leg_us(bytes, latency, 0.1);
  }
  CHECK(types == std::vector<std::string>{"ENTRIES", "WANT", "BLOCK", "WANT", "BLOCK"});
  auto replicated = std::find_if(sim.events().begin(), sim.events().end(), [&](const EventRecord& e) {
    return e.type == "entry_replicated" && e.subject == entry.text();
  });
  REQUIRE(replicated != sim.events().end());
  CHECK(replicated->time_us - t0.count() == expected);
  // Five one-way legs: about 500.5 ms plus roughly 34 us on the wire.
  CHECK(expected > 500'500);
  CHECK(expected < 500'600);
}

TEST_CASE("bootstrap against an empty root takes one round trip plus processing") {
  Simulator sim(two_regions(100), 1);
  auto root = sim.add_peer("here", peer_config());
  auto joiner = sim.add_peer("there", peer_config());
  std::vector<std::size_t> frames;
  sim.on_send = [&](std::size_t, std::size_t, const protocol::Message&, std::size_t bytes) { frames.push_back(bytes); };
  sim.schedule(Time{0}, joiner, [&](Simulator& s, std::size_t p) {
    s.peer(p).begin_bootstrap(s.now());
    s.dial(p, root, s.now());
  });
  sim.run_until(from_ms(5000));
  auto t = sim.peer(joiner).bootstrap_time();
  REQUIRE(t);
  // HELLO out, HELLO_ACK back (both with connection setup), then the root's
  // HEADS queued behind the ACK on the joiner's CPU.
  REQUIRE(frames.size() >= 3);
  auto tx = [](std::size_t bytes) { return static_cast<std::int64_t>(std::ceil(bytes * 8.0 * 1e6 / 4e9)); };
  std::int64_t expected = tx(frames[0]) + 100'000 + 20'100 + std::max(tx(frames[1]) + 100'000 + 20'100,
                                                                       tx(frames[1]) + tx(frames[2]) + 100'000 + 100);
  CHECK(t->count() == expected + 100);
  CHECK(t->count() >= 240'300);
  CHECK(t->count() < 241'000);
}

TEST_CASE("bootstrap against a root with 100 entries waits for every block") {
  Simulator sim(two_regions(30), 4);
  auto root = sim.add_peer("here", peer_config());
  auto joiner = sim.add_peer("there", peer_config());
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    auto r = synthetic_record(rng, 2000);
    sim.peer(root).contribute(r, synthetic_attributes(r, "here"), 0, Time{0});
  }
  std::size_t replicated_at_completion = 0;
  sim.on_event = [&](Simulator& s, std::size_t p, const protocol::Event& e) {
    if (p == joiner && e.kind == protocol::EventKind::kBootstrapComplete) {
      for (const auto& [id, entry] : s.peer(root).log().entries()) replicated_at_completion += s.peer(p).replicated(id);
    }
  };
  sim.schedule(Time{0}, joiner, [&](Simulator& s, std::size_t p) {
    s.peer(p).begin_bootstrap(s.now());
    s.dial(p, root, s.now());
  });
  sim.run_until(from_ms(60000));
  CHECK(sim.peer(joiner).bootstrap_time().has_value());
  CHECK(replicated_at_completion == 100);
}

TEST_CASE("replication burst with no files") {
  auto s = small_burst(1);
  s.file_count = 0;
  auto report = run_scenario(s);
  CHECK(report.summary["replication"]["contributions"] == 0);
  CHECK(report.summary["replication"]["per_region"].empty());
  CHECK(report.summary["converged"] == true);
  CHECK(replay_check(report));
}

TEST_CASE("identical scenario and seed give byte-identical reports") {
  auto one = run_scenario(small_burst(9));
  auto two = run_scenario(small_burst(9));
  CHECK(summary_json(one) == summary_json(two));
  CHECK(events_csv(one.events) == events_csv(two.events));
  auto other = run_scenario(small_burst(10));
  CHECK(events_csv(one.events) != events_csv(other.events));
}

TEST_CASE("write_report produces events.csv and summary.json") {
  testing::TempDir dir;
  auto report = run_scenario(small_burst(2));
  write_report(report, dir.path() / "out");
  CHECK(std::filesystem::exists(dir.path() / "out" / "events.csv"));
  CHECK(std::filesystem::exists(dir.path() / "out" / "summary.json"));
}

TEST_CASE("replay check") {
  auto report = run_scenario(small_burst(3));
  CHECK(replay_check(report));
  auto perturbed = report;
  perturbed.summary["replication"]["p50_all_peer_us"] = perturbed.summary["replication"]["p50_all_peer_us"].get<std::int64_t>() + 1;
  CHECK_FALSE(replay_check(perturbed));
  MetricsReport empty;
  empty.summary = summarize({});
  CHECK(replay_check(empty));
}

TEST_CASE("simulated time never runs backwards") {
  auto s = default_scenario(ScenarioKind::kFuzz);
  s.seed = 4;
  auto run = execute_scenario(s);
  const auto& ev = run.report.events;
  for (std::size_t i = 1; i < ev.size(); ++i) REQUIRE(ev[i - 1].time_us <= ev[i].time_us);
}

TEST_CASE("property: fuzz churn still converges (50 seeds)") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    auto s = default_scenario(ScenarioKind::kFuzz);
    s.seed = seed;
    s.peers = 8 + seed % 25;
    s.placements.clear();
    auto run = execute_scenario(s);
    CAPTURE(seed);
    REQUIRE(run.report.summary["converged"] == true);
    auto& sim = *run.sim;
    auto reference = sim.peer(0).log().total_order();
    CHECK(reference.size() == s.contributions);
    for (std::size_t p = 1; p < sim.peer_count(); ++p) REQUIRE(sim.peer(p).log().total_order() == reference);
  }
}

TEST_CASE("intra-region spread is below cross-region spread") {
  auto s = default_scenario(ScenarioKind::kReplicationBurst);
  s.file_count = 200;
  auto report = run_scenario(s);
  const auto& rep = report.summary["replication"];
  double across = rep["region_cv"];
  CHECK(across > 0);
  for (const auto& [region, stats] : rep["per_region"].items()) {
    CAPTURE(region);
    CHECK(stats["peer_cv"].get<double>() < across);
  }
}

TEST_CASE("spearman") {
  CHECK(spearman({1, 2, 3, 4, 5}, {5, 6, 7, 8, 7}) == doctest::Approx(8 / std::sqrt(95.0)).epsilon(1e-12));
  CHECK(spearman({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1));
  CHECK(spearman({1, 2, 3}, {4, 4, 4}) == 0);
  CHECK(spearman({}, {}) == 0);
}

TEST_CASE("bootstrap analysis on a hand-made summary") {
  Json joins = Json::array();
  auto join = [&](const char* region, std::int64_t started, std::int64_t cluster, std::int64_t t) {
    joins.push_back({{"cluster_size", cluster}, {"peer", std::to_string(started)}, {"region", region},
                     {"started_us", started}, {"time_us", t}});
  };
  join("b", 1, 1, 300);  // first in b
  join("a", 2, 2, 100);  // same region as the root
  join("c", 3, 3, 400);  // first in c
  join("b", 4, 4, 200);
  join("c", 5, 5, 250);
  join("b", 6, 50, 900);  // cluster too large to compare
  Json summary = {{"bootstrap", {{"joins", joins}}}};
  auto a = analyze_bootstrap(summary, "a");
  CHECK(a.first_in_region == 2);
  CHECK(a.first_in_region_median_us == 350);
  CHECK(a.same_region == 3);
  CHECK(a.same_region_median_us == 200);
  CHECK(a.locality());
  CHECK(a.spearman == doctest::Approx(spearman({1, 2, 3, 4, 5, 6}, {300, 100, 400, 200, 250, 900})));
}

TEST_CASE("synthetic records hit their target size") {
  std::mt19937_64 rng(1);
  for (std::size_t size : {1024u, 9060u, 65536u, 262144u}) {
    auto r = synthetic_record(rng, size);
    CHECK(r.canonical_encoding().size() == size);
    CHECK(r.violations().empty());
  }
  auto tiny = synthetic_record(rng, 10);
  CHECK(tiny.canonical_encoding().size() > 10);
}

TEST_CASE("scenario files") {
  auto s = parse_scenario("kind = bootstrap_scaling\nseed = 7\njoiners = 5\nlatency.asia-east2.us-west1 = 33\n");
  CHECK(s.kind == ScenarioKind::kBootstrapScaling);
  CHECK(s.seed == 7);
  CHECK(s.joiners == 5);
  auto a = s.network.region_index("asia-east2"), u = s.network.region_index("us-west1");
  CHECK(s.network.latency(a, u) == 33);
  CHECK(s.network.latency(u, a) == 33);
  CHECK(default_scenario(ScenarioKind::kReplicationBurst).file_count == 1113);
  CHECK(parse_scenario("kind = replication_burst\nfull_scale = true\n").full_scale);
  auto b = default_scenario(ScenarioKind::kBootstrapScaling);
  CHECK(b.joiners == 52);
  CHECK(b.join_gap_s == 60);
  CHECK(b.late_join_gap_s == 30);
  CHECK(b.late_after == 12);

  CHECK(error_code([] { parse_scenario("kind = nonsense\n"); }) == ErrorCode::kScenarioInvalid);
  CHECK(error_code([] { parse_scenario("kind = fuzz\nwat = 1\n"); }) == ErrorCode::kScenarioInvalid);
  CHECK(error_code([] { parse_scenario("kind = fuzz\npeers = many\n"); }) == ErrorCode::kScenarioInvalid);
  CHECK(error_code([] { parse_scenario("kind = fuzz\nlatency.mars.asia-east2 = 5\n"); }) == ErrorCode::kScenarioInvalid);
  CHECK(error_code([] { parse_scenario("no equals sign\n"); }) == ErrorCode::kScenarioInvalid);
}

TEST_CASE("validation scaling matches the cost formulas") {
  auto s = default_scenario(ScenarioKind::kValidationScaling);
  s.point_counts = {0, 1, 10};
  auto report = run_scenario(s);
  const auto& runs = report.summary["validation"]["runs_ms"];
  for (const auto& m : scaling_cost_models(s.batch_overhead_ms)) {
    for (auto n : s.point_counts) {
      std::string label = std::string(to_string(m.shape)) + ":n=" + std::to_string(n);
      CAPTURE(label);
      CHECK(std::stod(runs.at(label + ":batched").get<std::string>()) == validation_cost(m, n, true));
      CHECK(std::stod(runs.at(label + ":unbatched").get<std::string>()) == validation_cost(m, n, false));
    }
  }
}
