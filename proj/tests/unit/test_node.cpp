#include <doctest.h>

#include <csignal>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include "../support/local_cluster.hpp"
#include "peerperf/error.hpp"
#include "peerperf/node/config.hpp"
#include "peerperf/node/http.hpp"
#include "peerperf/node/node.hpp"
#include "support.hpp"

using namespace peerperf;
using namespace peerperf::node;
using namespace std::chrono_literals;
using testing::error_code;
using testing::node_config;
using testing::sample_attributes;
using testing::sample_record;

namespace {

EnvLookup no_env() {
  return [](const std::string&) -> std::optional<std::string> { return std::nullopt; };
}

std::set<Cid> data_cids(Node& node) {
  std::set<Cid> out;
  for (const auto& row : node.api_query({}, ValidityPolicy::kAny)) out.insert(row.entry.contribution.data_cid);
  return out;
}

}  // namespace

TEST_CASE("node config parsing") {
  auto kv = KeyValues::parse(
      "# comment\n"
      "data_root = /tmp/pp\n"
      "passphrase = s3cret\n"
      "bootstrap_peers = 10.0.0.1:7201, 10.0.0.2:7201\n"
      "pin_policy = pin_on_use\n"
      "vote_policy.k_required = 3\n"
      "vote_policy.accept_threshold = 3/4\n"
      "validator.max_runtime_ms = 5000\n"
      "fan_out = 6\n");
  auto c = parse_node_config(kv, no_env());
  CHECK(c.data_root == "/tmp/pp");
  CHECK(c.bootstrap_peers == std::vector<std::string>{"10.0.0.1:7201", "10.0.0.2:7201"});
  CHECK(c.pin_policy == protocol::PinPolicy::kPinOnUse);
  CHECK(c.vote_policy.k_required == 3);
  CHECK(c.vote_policy.accept_threshold.num == 3);
  CHECK(c.vote_policy.accept_threshold.den == 4);
  CHECK(c.validator.params.at("max_runtime_ms") == "5000");
  CHECK(c.fan_out == 6);
  CHECK(c.gossip_interval_ms == 1000);
  CHECK_FALSE(c.is_root);

  auto env = [](const std::string& name) -> std::optional<std::string> {
    if (name == "PEERPERFNET_FAN_OUT") return "9";
    if (name == "PEERPERFNET_IS_ROOT") return "true";
    return std::nullopt;
  };
  auto overridden = parse_node_config(kv, env);
  CHECK(overridden.fan_out == 9);
  CHECK(overridden.is_root);
  CHECK(env_name("vote_policy.k_required") == "PEERPERFNET_VOTE_POLICY_K_REQUIRED");
  CHECK(node_config_keys().size() == 23);

  auto bad = kv;
  bad.set("colour", "blue");
  CHECK(error_code([&] { parse_node_config(bad, no_env()); }) == ErrorCode::kConfigInvalid);
  bad = kv;
  bad.set("fan_out", "four");
  CHECK(error_code([&] { parse_node_config(bad, no_env()); }) == ErrorCode::kConfigInvalid);
  bad = kv;
  bad.set("pin_policy", "sometimes");
  CHECK(error_code([&] { parse_node_config(bad, no_env()); }) == ErrorCode::kConfigInvalid);
  bad = kv;
  bad.set("vote_policy.accept_threshold", "3/2");
  CHECK(error_code([&] { parse_node_config(bad, no_env()); }) == ErrorCode::kConfigInvalid);
}

TEST_CASE("config problems and addresses") {
  NodeConfig c;
  auto p = c.problems();
  CHECK(p.size() == 3);
  c.data_root = "/tmp/x";
  c.passphrase = "p";
  c.is_root = true;
  CHECK(c.problems().empty());
  c.listen_address = "nohost";
  CHECK(c.problems().size() == 1);
  CHECK(split_address("127.0.0.1:7201") == std::pair<std::string, std::uint16_t>{"127.0.0.1", 7201});
  CHECK(split_address("[::1]:80").second == 80);
  CHECK(error_code([] { split_address(":80"); }) == ErrorCode::kConfigInvalid);
  CHECK(error_code([] { split_address("host:70000"); }) == ErrorCode::kConfigInvalid);
  CHECK(error_code([] { split_address("host:8x"); }) == ErrorCode::kConfigInvalid);
}

TEST_CASE("root node serves status over the API") {
  testing::TempDir dir;
  Node root(node_config(dir.path() / "root"));
  root.start();
  ApiServer api(root, "127.0.0.1:0");
  api.start();
  auto address = "127.0.0.1:" + std::to_string(api.port());
  auto res = http_request(address, "GET", "/v1/status");
  CHECK(res.status == 200);
  CHECK(res.body.find("peer_count=0") != std::string::npos);
  CHECK(res.body.find("entries=0") != std::string::npos);

  auto missing = http_request(address, "GET", "/v1/blocks/" + Cid::of(std::string("nothing")).text() + "?local=true");
  CHECK(missing.status == http_status(ErrorCode::kNotFoundAnywhere));
  CHECK(http_request(address, "POST", "/v1/contributions", "{not json").status == 400);
  api.stop();
  root.stop();
}

TEST_CASE("unreachable bootstrap peer fails after backing off") {
  testing::TempDir dir;
  auto c = node_config(dir.path() / "n", "127.0.0.1:1");
  Node node(c);
  auto t0 = std::chrono::steady_clock::now();
  CHECK(error_code([&] { node.start(); }) == ErrorCode::kBootstrapFailure);
  auto elapsed = std::chrono::steady_clock::now() - t0;
  // Three attempts of 2 x 500 ms each, with 50 + 100 ms of backoff.
  CHECK(elapsed >= 3150ms);
  CHECK(elapsed < 10s);
}

TEST_CASE("wrong passphrase is refused with AUTH_FAIL") {
  testing::TempDir dir;
  testing::FrameLog frames;
  Node root(node_config(dir.path() / "root"));
  root.start();
  frames.attach(root, "root");
  auto c = node_config(dir.path() / "joiner", root.p2p_address());
  c.passphrase = "guess";
  Node joiner(c);
  CHECK(error_code([&] { joiner.start(); }) == ErrorCode::kBootstrapFailure);
  auto fails = frames.count("AUTH_FAIL");
  CHECK(fails >= 1);
  CHECK(fails <= 5);
  CHECK(frames.frames().size() == fails);
  CHECK(root.status().peer_count == 0);
}

TEST_CASE("two nodes replicate contributions both ways") {
  testing::TempDir dir;
  Node root(node_config(dir.path() / "root"));
  root.start();
  auto first = root.api_contribute(sample_record(4, 212000), sample_attributes());
  REQUIRE(first.contribution);

  Node joiner(node_config(dir.path() / "joiner", root.p2p_address()));
  joiner.start();
  CHECK(joiner.call([](protocol::Peer& p) { return p.log().size(); }) == 1);
  auto second = joiner.api_contribute(sample_record(8, 150000), sample_attributes());
  REQUIRE(second.contribution);
  CHECK(root.wait_for([](protocol::Peer& p) { return p.log().size() == 2; }, 5s));
  CHECK(data_cids(root) == data_cids(joiner));
  CHECK(root.call([](protocol::Peer& p) { return p.log().heads(); }) ==
        joiner.call([](protocol::Peer& p) { return p.log().heads(); }));

  auto cid = first.contribution->contribution.data_cid;
  auto bytes = joiner.api_fetch(cid, true);
  CHECK(cid.matches(bytes));
  CHECK(PerformanceRecord::decode(to_string(bytes)) == sample_record(4, 212000));
  CHECK(root.status().peer_count == 1);
  CHECK(joiner.status().peer_count == 1);
}

TEST_CASE("private records stay on their node") {
  testing::TempDir dir;
  testing::FrameLog frames;
  Node a(node_config(dir.path() / "a"));
  a.start();
  Node b(node_config(dir.path() / "b", a.p2p_address()));
  b.start();
  Node c(node_config(dir.path() / "c", a.p2p_address()));
  c.start();
  frames.attach(a, "a");
  frames.attach(b, "b");
  frames.attach(c, "c");

  auto record = sample_record(16, 99000);
  auto result = a.api_contribute(record, sample_attributes(), false);
  REQUIRE(result.private_cid);
  CHECK_FALSE(result.contribution);
  auto cid = *result.private_cid;
  a.api_contribute(sample_record(2, 1000), sample_attributes());
  CHECK(c.wait_for([](protocol::Peer& p) { return p.log().size() == 1; }, 5s));
  std::this_thread::sleep_for(500ms);
  CHECK(frames.containing(cid.text()).empty());

  CHECK(a.api_fetch(cid, false) == to_bytes(record.canonical_encoding()));
  CHECK(error_code([&] { b.api_fetch(cid, false); }) == ErrorCode::kNotFoundAnywhere);
  for (const auto& f : frames.containing(cid.text())) {
    INFO(f.from, " ", f.type);
    CHECK(((f.from == "b" && f.type == "WANT") || (f.from != "b" && f.type == "BLOCK_MISSING")));
  }
  CHECK(frames.containing(record.canonical_encoding()).empty());
  CHECK(b.api_query({}, ValidityPolicy::kAny).size() == 1);
  CHECK(a.api_private_records().size() == 1);
}

TEST_CASE("records failing local validation are held back unless forced") {
  testing::TempDir dir;
  Node root(node_config(dir.path() / "root"));
  root.start();
  auto slow = sample_record(4, 700'000'000);
  CHECK(error_code([&] { root.api_contribute(slow, sample_attributes()); }) ==
        ErrorCode::kValidationFailedPrePublish);
  CHECK(root.status().entries == 0);
  auto forced = root.api_contribute(slow, sample_attributes(), true, true);
  REQUIRE(forced.contribution);
  REQUIRE(forced.verdict);
  CHECK(forced.verdict->verdict == Verdict::kInvalid);
  root.api_contribute(sample_record(4, 2000), sample_attributes());

  CHECK(root.api_query({}, ValidityPolicy::kAny).size() == 2);
  auto valid = root.api_query({}, ValidityPolicy::kOwnValidOnly);
  REQUIRE(valid.size() == 1);
  CHECK(valid[0].status() == "own_valid");
  CHECK(root.api_query({}, ValidityPolicy::kNetworkOrOwnValid).size() == 1);
  CHECK(root.api_query({{"workload", "grep"}}, ValidityPolicy::kAny).empty());
  CHECK(error_code([&] { root.api_contribute(sample_record(0, 10), sample_attributes()); }) ==
        ErrorCode::kSchemaViolation);
}

TEST_CASE("a killed node restarts with every acknowledged contribution") {
  testing::TempDir dir;
  auto root_dir = dir.path() / "crash";
  int fds[2];
  REQUIRE(::pipe(fds) == 0);
  pid_t child = ::fork();
  REQUIRE(child >= 0);
  if (child == 0) {
    ::close(fds[0]);
    try {
      Node node(node_config(root_dir));
      node.start();
      for (std::int64_t i = 1;; ++i) {
        auto r = node.api_contribute(sample_record(1 + i % 16, 1000 + i, i), sample_attributes());
        auto line = r.contribution->entry_id.text() + "\n";
        if (::write(fds[1], line.data(), line.size()) < 0) ::_exit(2);
      }
    } catch (...) {
      ::_exit(1);
    }
  }
  ::close(fds[1]);
  std::vector<std::string> committed;
  std::string pending;
  char buf[4096];
  while (committed.size() < 40) {
    auto n = ::read(fds[0], buf, sizeof buf);
    if (n <= 0) break;
    pending.append(buf, static_cast<std::size_t>(n));
    for (auto nl = pending.find('\n'); nl != std::string::npos; nl = pending.find('\n')) {
      committed.push_back(pending.substr(0, nl));
      pending.erase(0, nl + 1);
    }
  }
  ::kill(child, SIGKILL);
  int status = 0;
  ::waitpid(child, &status, 0);
  ::close(fds[0]);
  REQUIRE(committed.size() >= 40);

  Node node(node_config(root_dir));
  node.start();
  auto [log_ids, corrupt, held] = node.call([](protocol::Peer& p) {
    std::set<std::string> ids;
    for (const auto& [id, _] : p.log().entries()) ids.insert(id.text());
    std::size_t bad = 0;
    auto cids = p.blocks().cids();
    for (const auto& c : cids) {
      auto bytes = p.blocks().get_block(c);
      bad += !bytes || !c.matches(*bytes);
    }
    return std::tuple{ids, bad, cids.size()};
  });
  for (const auto& id : committed) CHECK(log_ids.contains(id));
  CHECK(corrupt == 0);
  CHECK(held >= 2 * log_ids.size());
  node.api_contribute(sample_record(3, 3), sample_attributes());
  CHECK(node.status().entries == log_ids.size() + 1);
}
