// One PASS/FAIL line per acceptance criterion. Exit status 0 iff all pass.

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "../support/local_cluster.hpp"
#include "peerperf/block_store.hpp"
#include "peerperf/error.hpp"
#include "peerperf/modeling/runtime_model.hpp"
#include "peerperf/modeling/training.hpp"
#include "peerperf/node/node.hpp"
#include "peerperf/sim/scenario.hpp"
#include "peerperf/sim/simulator.hpp"
#include "peerperf/validation.hpp"

using namespace peerperf;
using namespace std::chrono_literals;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("peerperf-acceptance-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

Outcome crdt_convergence() {
  auto t0 = Clock::now();
  std::size_t converged = 0;
  std::size_t min_peers = 1000, max_peers = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto s = sim::default_scenario(sim::ScenarioKind::kFuzz);
    s.seed = seed;
    s.peers = 8 + seed % 25;
    min_peers = std::min(min_peers, s.peers);
    max_peers = std::max(max_peers, s.peers);
    auto run = sim::execute_scenario(s);
    auto& sim = *run.sim;
    bool same = sim.peer(0).log().size() == s.contributions;
    const auto& ref = sim.peer(0).log();
    auto order = ref.total_order();
    for (std::size_t p = 1; same && p < sim.peer_count(); ++p) {
      const auto& log = sim.peer(p).log();
      same = log.entries() == ref.entries() && log.heads() == ref.heads() && log.total_order() == order;
    }
    converged += same;
  }
  double elapsed = seconds_since(t0);
  return {converged == 100 && elapsed < 120,
          fmt("%zu/100 seeds identical (peers %zu-%zu), %.1f s", converged, min_peers, max_peers, elapsed)};
}

Outcome tamper_detection() {
  TempDir dir;
  std::mt19937_64 rng(2);
  auto random_bytes = [&](std::size_t n) {
    Bytes b(n);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    return b;
  };
  std::size_t rejected = 0, served_corrupt = 0, cases = 0;
  auto flip_on_disk = [&](const Bytes& original, std::size_t bit) {
    BlockStore store(BlockStoreOptions{dir.path() / "store"});
    Cid cid = store.put_block(original, BlockOrigin::kReplicated);
    auto flipped = original;
    flipped[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    rejected += !BlockStore::verify(cid, flipped);
    std::ofstream(store.block_path(cid), std::ios::binary | std::ios::trunc)
        .write(reinterpret_cast<const char*>(flipped.data()), static_cast<std::streamsize>(flipped.size()));
    auto got = store.get_block(cid);
    served_corrupt += got.has_value() && *got != original;
    ++cases;
  };
  auto small = random_bytes(64);
  for (std::size_t bit = 0; bit < 512; ++bit) flip_on_disk(small, bit);
  auto large = random_bytes(9060);
  for (int i = 0; i < 100; ++i) flip_on_disk(large, rng() % (large.size() * 8));
  return {cases == 612 && rejected == cases && served_corrupt == 0,
          fmt("%zu/%zu flips rejected by verify, %zu corrupt reads served", rejected, cases, served_corrupt)};
}

Outcome replication_burst(bool full_scale) {
  auto t0 = Clock::now();
  auto s = sim::default_scenario(sim::ScenarioKind::kReplicationBurst);
  s.full_scale = full_scale;
  auto report = sim::run_scenario(s);
  const auto& rep = report.summary["replication"];
  auto total = rep["contributions"].get<std::size_t>();
  auto fully = rep["fully_replicated"].get<std::size_t>();
  auto under = rep["under_target"].get<std::size_t>();
  bool converged = report.summary["converged"] == true;
  double elapsed = seconds_since(t0);
  bool ok = converged && total == (full_scale ? 11133u : 1113u) && fully == total &&
            100 * under >= 99 * total && (!full_scale || elapsed < 600);
  return {ok, fmt("%zu files, %zu fully replicated, %zu under 1 s (%.2f%%), p99 %lld us, converged=%d, %.1f s", total,
                  fully, under, total ? 100.0 * static_cast<double>(under) / static_cast<double>(total) : 0.0,
                  static_cast<long long>(rep["p99_all_peer_us"].get<std::int64_t>()), converged, elapsed)};
}

Outcome bootstrap_scaling() {
  std::size_t both = 0;
  std::size_t deterministic = 0;
  double rho_sum = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto s = sim::default_scenario(sim::ScenarioKind::kBootstrapScaling);
    s.seed = seed;
    auto run = sim::execute_scenario(s);
    auto a = sim::analyze_bootstrap(run.report.summary, run.sim->region(0));
    both += a.trend() && a.locality();
    rho_sum += a.spearman;
    if (seed <= 2) deterministic += sim::summary_json(sim::run_scenario(s)) == sim::summary_json(run.report);
  }
  return {5 * both >= 4 * 20 && deterministic == 2,
          fmt("%zu/20 seeds show trend and locality, mean spearman %.3f, repeat runs identical %zu/2", both,
              rho_sum / 20, deterministic)};
}

Outcome vote_consolidation() {
  Cid subject = Cid::of(std::string_view("subject"));
  std::size_t cases = 0, mismatches = 0, advisories = 0;
  for (std::int64_t k = 1; k <= 5; ++k) {
    VotePolicy policy{k, 2000, {2, 3}};
    for (int len = 0; len <= 10; ++len) {
      std::vector<int> digits(static_cast<std::size_t>(len), 0);
      for (;;) {
        std::vector<ValidationRecord> responses;
        int valid = 0, invalid = 0;
        for (int d : digits) {
          Verdict v = d == 0 ? Verdict::kValid : d == 1 ? Verdict::kInvalid : Verdict::kInconclusive;
          valid += d == 0;
          invalid += d == 1;
          responses.push_back({subject, v, "voter" + std::to_string(responses.size()), "1", 0, ""});
        }
        VoteOutcome expected;
        if (len >= k) {
          if (3 * valid >= 2 * len) {
            expected = {VoteDecision::kNetworkValid, std::nullopt};
          } else if (3 * invalid >= 2 * len) {
            expected = {VoteDecision::kMustValidateIndependently, VoteDecision::kNetworkInvalid};
            ++advisories;
          }
        }
        mismatches += !(consolidate_votes(responses, policy) == expected);
        ++cases;
        std::size_t i = 0;
        while (i < digits.size() && digits[i] == 2) digits[i++] = 0;
        if (i == digits.size()) break;
        ++digits[i];
      }
    }
  }
  return {mismatches == 0 && cases == 5 * 88573,
          fmt("%zu ordered response lists (k 1-5, up to 10 responses), %zu mismatches, %zu advisory cases", cases,
              mismatches, advisories)};
}

Outcome validation_scaling() {
  auto s = sim::default_scenario(sim::ScenarioKind::kValidationScaling);
  auto report = sim::run_scenario(s);
  const auto& runs = report.summary["validation"]["runs_ms"];
  const double o = static_cast<double>(s.batch_overhead_ms);
  using Formula = std::function<double(double)>;
  const std::vector<std::pair<std::string, Formula>> formulas = {
      {"constant", [](double) { return 7.0; }},
      {"linear", [](double n) { return 2 + 10 * n; }},
      {"polynomial", [](double n) { return 2 + 0.5 * std::pow(n, 2.0); }},
      {"exponential", [](double n) { return std::min(std::pow(2.0, n), 3.6e6); }},
      {"logarithmic", [](double n) { return 1 + 4 * std::log2(1 + n); }},
  };
  std::size_t exact = 0, checked = 0, cheaper = 0, cheaper_needed = 0;
  for (const auto& [shape, f] : formulas) {
    for (std::uint64_t n : {0, 1, 10, 100, 1000}) {
      const auto x = static_cast<double>(n);
      auto label = shape + ":n=" + std::to_string(n);
      double batched = std::stod(runs.at(label + ":batched").get<std::string>());
      double unbatched = std::stod(runs.at(label + ":unbatched").get<std::string>());
      exact += batched == f(x) + o;
      exact += unbatched == x * (f(1) + o);
      checked += 2;
      if ((shape == "linear" || shape == "constant") && n >= 2) {
        ++cheaper_needed;
        cheaper += batched < unbatched;
      }
    }
  }
  std::set<std::int64_t> latencies;
  for (const auto& [_, v] : report.summary["validation"]["query_latency_us"].items()) latencies.insert(v.get<std::int64_t>());
  bool independent = report.summary["validation"]["query_latency_us"].size() == formulas.size() && latencies.size() == 1;
  return {exact == checked && cheaper == cheaper_needed && independent,
          fmt("%zu/%zu costs exact, batching cheaper %zu/%zu, query latency %s us across %zu cost models", exact,
              checked, cheaper, cheaper_needed, latencies.size() == 1 ? std::to_string(*latencies.begin()).c_str() : "varies",
              report.summary["validation"]["query_latency_us"].size())};
}

Outcome privacy_contract() {
  TempDir dir;
  testing::FrameLog quiet, fetching;
  node::Node a(testing::node_config(dir.path() / "a"));
  a.start();
  node::Node b(testing::node_config(dir.path() / "b", a.p2p_address()));
  b.start();
  node::Node c(testing::node_config(dir.path() / "c", a.p2p_address()));
  c.start();
  for (auto [n, name] : {std::pair{&a, "a"}, {&b, "b"}, {&c, "c"}}) quiet.attach(*n, name);

  auto record = testing::sample_record(16, 99000);
  auto result = a.api_contribute(record, testing::sample_attributes(), false);
  auto cid = *result.private_cid;
  a.api_contribute(testing::sample_record(2, 1000), testing::sample_attributes());
  b.wait_for([](protocol::Peer& p) { return p.log().size() == 1; }, 5s);
  c.wait_for([](protocol::Peer& p) { return p.log().size() == 1; }, 5s);
  std::this_thread::sleep_for(1s);
  auto gossip_frames = quiet.frames().size();
  auto gossip_hits = quiet.containing(cid.text()).size();

  for (auto [n, name] : {std::pair{&a, "a"}, {&b, "b"}, {&c, "c"}}) fetching.attach(*n, name);
  bool local = a.api_fetch(cid, false) == to_bytes(record.canonical_encoding());
  bool denied = false;
  try {
    b.api_fetch(cid, false);
  } catch (const Error& e) {
    denied = e.code() == ErrorCode::kNotFoundAnywhere;
  }
  std::size_t data_frames = 0;
  for (const auto& f : quiet.containing(cid.text())) data_frames += f.type == "HEADS" || f.type == "ENTRIES" || f.type == "BLOCK";
  for (const auto& f : fetching.containing(cid.text())) data_frames += f.type == "HEADS" || f.type == "ENTRIES" || f.type == "BLOCK";
  auto payload_frames =
      quiet.containing(record.canonical_encoding()).size() + fetching.containing(record.canonical_encoding()).size();
  auto request_frames = fetching.containing(cid.text()).size();
  return {local && denied && gossip_hits == 0 && data_frames == 0 && payload_frames == 0,
          fmt("local fetch %s, remote fetch %s; cid in %zu of %zu frames before any request, in %zu "
              "HEADS/ENTRIES/BLOCK frames, payload in %zu frames (%zu WANT/BLOCK_MISSING frames name it during the "
              "remote request)",
              local ? "ok" : "FAILED", denied ? "NotFoundAnywhere" : "NOT denied", gossip_hits, gossip_frames,
              data_frames, payload_frames, request_frames)};
}

Outcome end_to_end() {
  TempDir dir;
  node::Node a(testing::node_config(dir.path() / "a"));
  a.start();
  node::Node b(testing::node_config(dir.path() / "b", a.p2p_address()));
  b.start();

  const double w[4] = {1000, 5000, 200, 10};
  auto trace = a.api_contribute(testing::sample_record(4, 212000), testing::sample_attributes());
  std::set<Cid> generated;
  for (std::int64_t n : {1, 2, 4, 8}) {
    auto x = static_cast<double>(n);
    auto runtime = std::llround(w[0] + w[1] / x + w[2] * std::log2(x) + w[3] * x);
    for (std::int64_t input : {1 << 20, 1 << 30}) {
      auto r = a.api_contribute(testing::sample_record(n, runtime, input, "synthetic"),
                                testing::sample_attributes("synthetic"));
      generated.insert(r.contribution->contribution.data_cid);
    }
  }
  b.wait_for([](protocol::Peer& p) { return p.log().size() == 9; }, 10s);

  modeling::NodeDataAccess access(b);
  auto ts = modeling::assemble_training_set(access, {}, node::ValidityPolicy::kAny, true);
  bool has_trace = false;
  std::size_t generated_rows = 0;
  for (const auto& row : ts.rows) {
    has_trace |= row.cid == trace.contribution->contribution.data_cid;
    generated_rows += generated.contains(row.cid);
  }
  auto model = modeling::fit_runtime_model(ts, "synthetic", "spark");
  double worst = 0;
  for (int k = 0; k < 4; ++k) worst = std::max(worst, std::fabs(model.weights[k] - w[k]) / w[k]);

  std::vector<modeling::Observation> obs;
  for (std::int64_t n : {2, 4, 8, 16, 32}) {
    auto x = static_cast<double>(n);
    obs.push_back({n, w[0] + w[1] / x + w[2] * std::log2(x) + w[3] * x});
  }
  auto direct = modeling::fit_observations(obs);
  double worst_direct = 0;
  for (int k = 0; k < 4; ++k) worst_direct = std::max(worst_direct, std::fabs(direct.weights[k] - w[k]) / w[k]);
  return {has_trace && generated_rows == generated.size() && ts.issues.empty() && worst <= 1e-6 && worst_direct <= 1e-6,
          fmt("B assembled %zu rows (trace %s, %zu/%zu generated), max relative weight error %.2e over the "
              "network, %.2e at n in {2..32}",
              ts.rows.size(), has_trace ? "present" : "MISSING", generated_rows, generated.size(), worst,
              worst_direct)};
}

Outcome determinism() {
  std::size_t identical = 0, total = 0;
  for (auto kind : {sim::ScenarioKind::kTransfer, sim::ScenarioKind::kFuzz, sim::ScenarioKind::kReplicationBurst,
                    sim::ScenarioKind::kBootstrapScaling, sim::ScenarioKind::kValidationScaling}) {
    auto s = sim::default_scenario(kind);
    s.seed = 7;
    TempDir d1, d2;
    sim::write_report(sim::run_scenario(s), d1.path());
    sim::write_report(sim::run_scenario(s), d2.path());
    for (const char* file : {"events.csv", "summary.json"}) {
      auto slurp = [&](const std::filesystem::path& p) {
        std::ifstream in(p / file, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
      };
      auto x = slurp(d1.path());
      identical += !x.empty() && x == slurp(d2.path());
      ++total;
    }
  }
  return {identical == total, fmt("%zu/%zu report files byte-identical across repeat runs (5 scenario kinds)",
                                  identical, total)};
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::off);
  bool full_scale = false;
  for (int i = 1; i < argc; ++i) full_scale |= std::string(argv[i]) == "--full-scale";

  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"C1 crdt convergence", crdt_convergence},
      {"C2 tamper detection", tamper_detection},
      {"C3 replication burst", [&] { return replication_burst(false); }},
      {"C4 bootstrap scaling", bootstrap_scaling},
      {"C5 vote consolidation", vote_consolidation},
      {"C6 validation scaling", validation_scaling},
      {"C7 privacy contract", privacy_contract},
      {"C8 end-to-end workflow", end_to_end},
      {"C9 determinism", determinism},
  };
  int failed = 0;
  auto report = [&](const char* name, const Outcome& o) {
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  };
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    report(c.name, o);
  }
  if (full_scale) {
    Outcome o;
    try {
      o = replication_burst(true);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    report("C3 replication burst (11133 files)", o);
  }
  return failed == 0 ? 0 : 1;
}
