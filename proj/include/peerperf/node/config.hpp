#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "peerperf/config.hpp"
#include "peerperf/protocol/peer.hpp"
#include "peerperf/validation.hpp"

namespace peerperf::node {

// Process exit codes of `peerperfnet serve`.
enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitBind = 2, kExitBootstrap = 3 };

struct NodeConfig {
  std::filesystem::path data_root;
  std::string listen_address = "127.0.0.1:7201";
  std::string api_address = "127.0.0.1:7280";
  std::vector<std::string> bootstrap_peers;
  std::string passphrase;
  std::string region_label = "local";
  bool is_root = false;
  protocol::PinPolicy pin_policy = protocol::PinPolicy::kPinAllContributions;
  VotePolicy vote_policy;
  ValidatorSpec validator;
  std::int64_t gossip_interval_ms = 1000;
  std::size_t fan_out = 4;
  std::int64_t response_timeout_ms = 2000;
  bool share_by_default = true;
  std::size_t bootstrap_attempts = 5;
  std::int64_t bootstrap_backoff_ms = 250;

  // Every problem found; empty when valid.
  std::vector<std::string> problems() const;
  protocol::PeerConfig peer_config(const std::string& advertised_address) const;
};

// Recognised keys, as written in config files. Nested settings use dots
// (vote_policy.k_required, validator.max_runtime_ms).
const std::vector<std::string>& node_config_keys();

// Environment override name for a key: PEERPERFNET_ + upper case, dots to
// underscores (vote_policy.k_required -> PEERPERFNET_VOTE_POLICY_K_REQUIRED).
std::string env_name(const std::string& key);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

// Applies environment overrides, then parses and validates. Throws
// Error(kConfigInvalid) naming the first bad key.
NodeConfig parse_node_config(KeyValues kv, const EnvLookup& env = process_env());
NodeConfig load_node_config(const std::filesystem::path& path, const EnvLookup& env = process_env());

// "host:port" -> (host, port). Throws Error(kConfigInvalid).
std::pair<std::string, std::uint16_t> split_address(const std::string& address);

}  // namespace peerperf::node
