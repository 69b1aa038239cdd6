#include "peerperf/node/api.hpp"

#include <array>

#include "peerperf/error.hpp"
#include "peerperf/validation.hpp"

namespace peerperf::node {

namespace {
constexpr std::array<std::string_view, 3> kPolicyNames = {"any", "network_or_own_valid", "own_valid_only"};
}

std::string_view to_string(ValidityPolicy p) { return kPolicyNames[static_cast<std::size_t>(p)]; }

std::optional<ValidityPolicy> parse_validity_policy(std::string_view text) {
  for (std::size_t i = 0; i < kPolicyNames.size(); ++i) {
    if (kPolicyNames[i] == text) return static_cast<ValidityPolicy>(i);
  }
  return std::nullopt;
}

std::string QueryRow::status() const {
  if (own) return "own_" + std::string(peerperf::to_string(own->verdict));
  if (network) {
    if (network->decision == VoteDecision::kNetworkValid) return "network_valid";
    if (network->advisory == VoteDecision::kNetworkInvalid) return "network_invalid";
    return "undecided";
  }
  return "unvalidated";
}

Json QueryRow::to_json() const {
  return {{"entry_id", entry.entry_id.text()},
          {"payload_cid", entry.payload_cid.text()},
          {"data_cid", entry.contribution.data_cid.text()},
          {"attributes", entry.contribution.attributes},
          {"created_at", entry.contribution.created_at},
          {"available", available},
          {"status", status()}};
}

std::vector<QueryRow> query_contributions(protocol::Peer& peer, const AttributeFilter& filter,
                                          ValidityPolicy policy) {
  std::vector<QueryRow> out;
  const auto& validator = peer.config().validator.validator_id;
  for (auto& entry : peer.contributions().list_contributions(peer.blocks(), filter)) {
    QueryRow row;
    const auto& data = entry.contribution.data_cid;
    row.available = peer.blocks().contains(data);
    row.own = peer.validations().get_validation(data, validator);
    row.network = peer.network_verdict(data);
    row.entry = std::move(entry);

    const bool own_valid = row.own && row.own->verdict == Verdict::kValid;
    const bool own_invalid = row.own && row.own->verdict == Verdict::kInvalid;
    const bool network_valid = row.network && row.network->decision == VoteDecision::kNetworkValid;
    bool keep = true;
    switch (policy) {
      case ValidityPolicy::kAny: break;
      case ValidityPolicy::kOwnValidOnly: keep = own_valid; break;
      case ValidityPolicy::kNetworkOrOwnValid: keep = own_valid || (!own_invalid && network_valid); break;
    }
    if (keep) out.push_back(std::move(row));
  }
  return out;
}

Json ContributeResult::to_json() const {
  Json j = Json::object();
  if (contribution) {
    j["entry_id"] = contribution->entry_id.text();
    j["payload_cid"] = contribution->payload_cid.text();
    j["data_cid"] = contribution->contribution.data_cid.text();
  }
  if (private_cid) j["private_cid"] = private_cid->text();
  if (verdict) j["verdict"] = std::string(peerperf::to_string(verdict->verdict));
  return j;
}

ContributeOutcome contribute_pipeline(protocol::Peer& peer, const PerformanceRecord& record,
                                      const Attributes& attributes, bool share, bool force,
                                      std::int64_t now_ms, protocol::Time now) {
  ContributeOutcome out;
  const auto bytes = record.canonical_encoding();
  if (!share) {
    if (auto bad = record.violations(); !bad.empty()) {
      std::string fields;
      for (const auto& f : bad) fields += (fields.empty() ? "" : ",") + f;
      throw Error(ErrorCode::kSchemaViolation, fields);
    }
    out.result.private_cid = peer.store_private(as_bytes(bytes));
    return out;
  }
  check_contribution_schema(record, attributes);
  auto verdict = validate_local(Cid::of(bytes), as_bytes(bytes), peer.config().validator,
                                peer.validations(), now_ms);
  out.result.verdict = verdict;
  if (verdict.verdict == Verdict::kInvalid && !force) {
    throw Error(ErrorCode::kValidationFailedPrePublish, verdict.detail);
  }
  auto c = peer.contribute(record, attributes, now_ms, now);
  out.result.contribution = std::move(c.entry);
  out.step = std::move(c.step);
  return out;
}

std::vector<std::pair<Cid, PerformanceRecord>> private_records(protocol::Peer& peer) {
  std::vector<std::pair<Cid, PerformanceRecord>> out;
  for (const auto& cid : peer.deny_list()) {
    auto bytes = peer.blocks().get_block(cid);
    if (!bytes) continue;
    try {
      out.emplace_back(cid, PerformanceRecord::decode(peerperf::to_string(*bytes)));
    } catch (const Error&) {
    }
  }
  return out;
}

}  // namespace peerperf::node
