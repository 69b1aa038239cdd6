#include "peerperf/modeling/training.hpp"

#include <cctype>
#include <set>

#include "peerperf/error.hpp"
#include "peerperf/node/http.hpp"
#include "peerperf/node/node.hpp"

namespace peerperf::modeling {

namespace {

std::string url_encode(const std::string& s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += kHex[c >> 4];
      out += kHex[c & 15];
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(RowSource s) { return s == RowSource::kShared ? "shared" : "local_private"; }

std::string TrainingSet::to_csv() const {
  std::string out = "cid,source,workload,framework,framework_version,machine_type,node_count,input_size_bytes,runtime_ms\n";
  for (const auto& r : rows) {
    const auto& p = r.record;
    out += r.cid.text() + "," + std::string(to_string(r.source)) + "," + p.workload + "," + p.framework + "," +
           p.framework_version + "," + p.machine_type + "," + std::to_string(p.node_count) + "," +
           std::to_string(p.input_size_bytes) + "," + std::to_string(p.runtime_ms) + "\n";
  }
  return out;
}

std::vector<ContributionRef> NodeDataAccess::contributions(const AttributeFilter& filter, ValidityPolicy policy) {
  std::vector<ContributionRef> out;
  for (const auto& row : node_.api_query(filter, policy)) {
    out.push_back({row.entry.contribution.data_cid, row.entry.contribution.attributes, row.available});
  }
  return out;
}

std::optional<Bytes> NodeDataAccess::block(const Cid& cid, bool fetch_missing, bool pin) {
  if (!fetch_missing) return node_.call([&](protocol::Peer& p) { return p.blocks().get_block(cid); });
  try {
    return node_.api_fetch(cid, pin);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNotFoundAnywhere) throw;
    return std::nullopt;
  }
}

std::vector<std::pair<Cid, Bytes>> NodeDataAccess::private_blocks() {
  return node_.call([](protocol::Peer& p) {
    std::vector<std::pair<Cid, Bytes>> out;
    for (const auto& cid : p.deny_list()) {
      if (auto bytes = p.blocks().get_block(cid)) out.emplace_back(cid, std::move(*bytes));
    }
    return out;
  });
}

std::vector<ContributionRef> HttpDataAccess::contributions(const AttributeFilter& filter, ValidityPolicy policy) {
  std::string target = "/v1/contributions?validity=" + std::string(node::to_string(policy));
  for (const auto& [k, v] : filter) target += "&" + url_encode(k) + "=" + url_encode(v);
  auto res = node::http_request(address_, "GET", target);
  if (res.status != 200) throw Error(ErrorCode::kIo, "query failed: " + res.body);
  std::vector<ContributionRef> out;
  for (const auto& row : Json::parse(res.body)) {
    out.push_back({Cid::from_text(row.at("data_cid").get<std::string>()), row.at("attributes").get<Attributes>(),
                   row.at("available").get<bool>()});
  }
  return out;
}

std::optional<Bytes> HttpDataAccess::block(const Cid& cid, bool fetch_missing, bool pin) {
  std::string target = "/v1/blocks/" + cid.text() + "?pin=" + (pin ? "true" : "false") +
                       "&local=" + (fetch_missing ? "false" : "true");
  auto res = node::http_request(address_, "GET", target);
  if (res.status == 404) return std::nullopt;
  if (res.status != 200) throw Error(ErrorCode::kIo, "block fetch failed: " + res.body);
  return Bytes(res.body.begin(), res.body.end());
}

std::vector<std::pair<Cid, Bytes>> HttpDataAccess::private_blocks() {
  auto res = node::http_request(address_, "GET", "/v1/private-records");
  if (res.status != 200) throw Error(ErrorCode::kIo, "private records failed: " + res.body);
  std::vector<std::pair<Cid, Bytes>> out;
  for (const auto& row : Json::parse(res.body)) {
    auto text = PerformanceRecord::from_json(row.at("record")).canonical_encoding();
    out.emplace_back(Cid::from_text(row.at("cid").get<std::string>()), Bytes(text.begin(), text.end()));
  }
  return out;
}

TrainingSet assemble_training_set(DataAccess& access, const AttributeFilter& filter, ValidityPolicy policy,
                                  bool fetch_missing) {
  TrainingSet ts;
  ts.filter = filter;
  ts.policy = policy;
  std::set<Cid> seen;
  auto add = [&](const Cid& cid, RowSource source, const Bytes& bytes) {
    if (!cid.matches(bytes)) {
      ts.issues.push_back({cid, std::string(to_string(ErrorCode::kIntegrityFailure))});
      return;
    }
    try {
      auto record = PerformanceRecord::decode(peerperf::to_string(bytes));
      if (!record.violations().empty()) throw Error(ErrorCode::kSchemaViolation, record.violations().front());
      ts.rows.push_back({cid, source, std::move(record)});
      seen.insert(cid);
    } catch (const Error& e) {
      ts.issues.push_back({cid, std::string(to_string(e.code()))});
    }
  };

  for (const auto& ref : access.contributions(filter, policy)) {
    if (seen.contains(ref.data_cid)) continue;
    auto bytes = access.block(ref.data_cid, fetch_missing, true);
    if (!bytes) {
      ts.issues.push_back({ref.data_cid, std::string(to_string(ErrorCode::kNotFoundAnywhere))});
      continue;
    }
    add(ref.data_cid, RowSource::kShared, *bytes);
  }
  for (const auto& [cid, bytes] : access.private_blocks()) {
    if (seen.contains(cid)) continue;
    add(cid, RowSource::kLocalPrivate, bytes);
  }
  return ts;
}

}  // namespace peerperf::modeling
