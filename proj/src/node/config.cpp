#include "peerperf/node/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>

#include "peerperf/error.hpp"

namespace peerperf::node {

namespace {

const std::vector<std::string> kKeys = {
    "data_root",
    "listen_address",
    "api_address",
    "bootstrap_peers",
    "passphrase",
    "region_label",
    "is_root",
    "pin_policy",
    "vote_policy.k_required",
    "vote_policy.response_timeout_ms",
    "vote_policy.accept_threshold",
    "validator.id",
    "validator.version",
    "validator.kind",
    "validator.max_runtime_ms",
    "validator.max_node_count",
    "validator.max_input_size_bytes",
    "gossip_interval_ms",
    "fan_out",
    "response_timeout_ms",
    "share_by_default",
    "bootstrap_attempts",
    "bootstrap_backoff_ms",
};

std::int64_t as_int(const KeyValues& kv, const std::string& key, std::int64_t fallback) {
  auto v = kv.get(key);
  if (!v) return fallback;
  std::int64_t out = 0;
  auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || p != v->data() + v->size()) {
    throw Error(ErrorCode::kConfigInvalid, key + ": not an integer: " + *v);
  }
  return out;
}

}  // namespace

const std::vector<std::string>& node_config_keys() { return kKeys; }

std::string env_name(const std::string& key) {
  std::string out = "PEERPERFNET_";
  for (char c : key) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

std::pair<std::string, std::uint16_t> split_address(const std::string& address) {
  auto colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw Error(ErrorCode::kConfigInvalid, "address must be host:port: " + address);
  }
  unsigned port = 0;
  auto text = std::string_view(address).substr(colon + 1);
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), port);
  if (ec != std::errc{} || p != text.data() + text.size() || port > 65535) {
    throw Error(ErrorCode::kConfigInvalid, "bad port in " + address);
  }
  return {address.substr(0, colon), static_cast<std::uint16_t>(port)};
}

std::vector<std::string> NodeConfig::problems() const {
  std::vector<std::string> out;
  if (data_root.empty()) out.emplace_back("data_root is required");
  if (passphrase.empty()) out.emplace_back("passphrase is required");
  if (!is_root && bootstrap_peers.empty()) out.emplace_back("bootstrap_peers is required unless is_root");
  if (gossip_interval_ms <= 0) out.emplace_back("gossip_interval_ms must be positive");
  if (response_timeout_ms <= 0) out.emplace_back("response_timeout_ms must be positive");
  if (bootstrap_backoff_ms <= 0) out.emplace_back("bootstrap_backoff_ms must be positive");
  if (bootstrap_attempts == 0) out.emplace_back("bootstrap_attempts must be positive");
  if (fan_out == 0) out.emplace_back("fan_out must be positive");
  if (!vote_policy.valid()) out.emplace_back("vote_policy is invalid");
  for (const auto* a : {&listen_address, &api_address}) {
    try {
      split_address(*a);
    } catch (const Error& e) {
      out.push_back(e.detail());
    }
  }
  for (const auto& a : bootstrap_peers) {
    try {
      split_address(a);
    } catch (const Error& e) {
      out.push_back(e.detail());
    }
  }
  return out;
}

protocol::PeerConfig NodeConfig::peer_config(const std::string& advertised_address) const {
  protocol::PeerConfig c;
  c.passphrase = passphrase;
  c.region = region_label;
  c.address = advertised_address;
  c.gossip_interval = std::chrono::milliseconds(gossip_interval_ms);
  c.fan_out = fan_out;
  c.response_timeout = std::chrono::milliseconds(response_timeout_ms);
  c.pin_policy = pin_policy;
  c.vote_policy = vote_policy;
  c.validator = validator;
  return c;
}

NodeConfig parse_node_config(KeyValues kv, const EnvLookup& env) {
  for (const auto& key : kKeys) {
    if (auto v = env(env_name(key))) kv.set(key, *v);
  }
  if (auto extra = kv.unknown({kKeys.begin(), kKeys.end()}); !extra.empty()) {
    throw Error(ErrorCode::kConfigInvalid, "unknown key " + extra.front());
  }

  NodeConfig c;
  c.data_root = kv.text("data_root", "");
  c.listen_address = kv.text("listen_address", c.listen_address);
  c.api_address = kv.text("api_address", c.api_address);
  c.bootstrap_peers = kv.list("bootstrap_peers");
  c.passphrase = kv.text("passphrase", "");
  c.region_label = kv.text("region_label", c.region_label);
  c.is_root = kv.flag("is_root", c.is_root);
  if (auto p = kv.get("pin_policy")) {
    auto parsed = protocol::parse_pin_policy(*p);
    if (!parsed) throw Error(ErrorCode::kConfigInvalid, "pin_policy: " + *p);
    c.pin_policy = *parsed;
  }
  c.vote_policy.k_required = as_int(kv, "vote_policy.k_required", c.vote_policy.k_required);
  c.vote_policy.response_timeout_ms =
      as_int(kv, "vote_policy.response_timeout_ms", c.vote_policy.response_timeout_ms);
  if (auto t = kv.get("vote_policy.accept_threshold")) {
    auto slash = t->find('/');
    KeyValues parts;
    parts.set("vote_policy.accept_threshold", t->substr(0, slash));
    auto num = as_int(parts, "vote_policy.accept_threshold", 0);
    parts.set("vote_policy.accept_threshold", slash == std::string::npos ? "x" : t->substr(slash + 1));
    auto den = as_int(parts, "vote_policy.accept_threshold", 0);
    c.vote_policy.accept_threshold = {num, den};
  }
  c.validator.validator_id = kv.text("validator.id", c.validator.validator_id);
  c.validator.version = kv.text("validator.version", c.validator.version);
  if (auto k = kv.get("validator.kind")) {
    if (*k == "builtin_schema_range") {
      c.validator.kind = ValidatorKind::kBuiltinSchemaRange;
    } else if (*k == "cost_model_stub") {
      c.validator.kind = ValidatorKind::kCostModelStub;
    } else {
      throw Error(ErrorCode::kConfigInvalid, "validator.kind: " + *k);
    }
  }
  for (const auto* p : {"max_runtime_ms", "max_node_count", "max_input_size_bytes"}) {
    if (auto v = kv.get(std::string("validator.") + p)) c.validator.params[p] = *v;
  }
  c.gossip_interval_ms = as_int(kv, "gossip_interval_ms", c.gossip_interval_ms);
  c.fan_out = static_cast<std::size_t>(as_int(kv, "fan_out", static_cast<std::int64_t>(c.fan_out)));
  c.response_timeout_ms = as_int(kv, "response_timeout_ms", c.response_timeout_ms);
  c.share_by_default = kv.flag("share_by_default", c.share_by_default);
  c.bootstrap_attempts = static_cast<std::size_t>(
      as_int(kv, "bootstrap_attempts", static_cast<std::int64_t>(c.bootstrap_attempts)));
  c.bootstrap_backoff_ms = as_int(kv, "bootstrap_backoff_ms", c.bootstrap_backoff_ms);

  if (auto p = c.problems(); !p.empty()) throw Error(ErrorCode::kConfigInvalid, p.front());
  return c;
}

NodeConfig load_node_config(const std::filesystem::path& path, const EnvLookup& env) {
  return parse_node_config(KeyValues::load(path), env);
}

}  // namespace peerperf::node
