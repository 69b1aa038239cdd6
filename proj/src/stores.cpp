#include "peerperf/stores.hpp"

#include <spdlog/spdlog.h>

#include <fstream>

#include "peerperf/error.hpp"

namespace peerperf {

namespace {

std::string join_fields(const std::vector<std::string>& fields) {
  std::string out;
  for (const auto& f : fields) {
    if (!out.empty()) out += ",";
    out += f;
  }
  return out;
}

bool newer(const ValidationRecord& a, const ValidationRecord& b) {
  return std::tie(a.produced_at, a.validator_version) > std::tie(b.produced_at, b.validator_version);
}

}  // namespace

void check_contribution_schema(const PerformanceRecord& record, const Attributes& attributes) {
  auto bad = record.violations();
  for (auto& f : Contribution{.data_cid = {}, .attributes = attributes, .created_at = 0}.violations()) {
    bad.push_back("attributes." + f);
  }
  if (!bad.empty()) throw Error(ErrorCode::kSchemaViolation, join_fields(bad));
}

ContributionEntry ContributionsStore::contribute(BlockStore& blocks, const PerformanceRecord& record,
                                                 const Attributes& attributes,
                                                 const std::string& author, std::int64_t now_ms) {
  check_contribution_schema(record, attributes);
  Contribution contribution{.data_cid = {}, .attributes = attributes, .created_at = now_ms};

  contribution.data_cid = blocks.put_block(as_bytes(record.canonical_encoding()), BlockOrigin::kLocal);
  Cid payload = blocks.put_block(as_bytes(contribution.canonical_encoding()), BlockOrigin::kLocal);
  const auto& entry = log_.append(author, payload, blocks);
  decoded_.emplace(payload, contribution);
  return {entry.id, payload, contribution};
}

std::optional<Contribution> ContributionsStore::decode_payload(BlockStore& blocks,
                                                               const Cid& payload) const {
  if (auto it = decoded_.find(payload); it != decoded_.end()) return it->second;
  auto bytes = blocks.get_block(payload);
  if (!bytes) return std::nullopt;
  try {
    auto c = Contribution::decode(to_string(*bytes));
    decoded_.emplace(payload, c);
    return c;
  } catch (const Error& e) {
    spdlog::warn("contributions: undecodable announcement {}: {}", payload.text(), e.what());
    return std::nullopt;
  }
}

std::vector<ContributionEntry> ContributionsStore::list_contributions(
    BlockStore& blocks, const AttributeFilter& filter) const {
  std::vector<ContributionEntry> out;
  for (const auto& entry : log_.total_order()) {
    auto c = decode_payload(blocks, entry.payload);
    if (!c) continue;
    bool match = true;
    for (const auto& [k, v] : filter) {
      auto it = c->attributes.find(k);
      if (it == c->attributes.end() || it->second != v) {
        match = false;
        break;
      }
    }
    if (match) out.push_back({entry.id, entry.payload, *c});
  }
  return out;
}

ValidationsStore::ValidationsStore(std::filesystem::path journal) : journal_(std::move(journal)) {
  std::ifstream in(*journal_, std::ios::binary);
  std::string line;
  bool terminated = true;
  while (std::getline(in, line)) {
    terminated = !in.eof();
    if (line.empty()) continue;
    auto j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      spdlog::warn("validations: skipping malformed journal line");
      continue;
    }
    try {
      upsert(ValidationRecord::from_json(j));
    } catch (const Error& e) {
      spdlog::warn("validations: skipping journal line: {}", e.what());
    }
  }
  if (!terminated) std::ofstream(*journal_, std::ios::app) << '\n';
}

void ValidationsStore::upsert(const ValidationRecord& v) {
  records_[{v.subject_cid, v.validator_id, v.validator_version}] = v;
}

void ValidationsStore::record_validation(const ValidationRecord& v) {
  upsert(v);
  if (journal_) {
    std::filesystem::create_directories(journal_->parent_path());
    std::ofstream out(*journal_, std::ios::app);
    out << v.canonical_encoding() << '\n';
  }
}

std::optional<ValidationRecord> ValidationsStore::get_validation(
    const Cid& subject, const std::string& validator_id) const {
  std::optional<ValidationRecord> best;
  auto it = records_.lower_bound({subject, validator_id, std::string()});
  for (; it != records_.end(); ++it) {
    const auto& [cid, id, version] = it->first;
    if (cid != subject || id != validator_id) break;
    if (!best || newer(it->second, *best)) best = it->second;
  }
  return best;
}

std::optional<ValidationRecord> ValidationsStore::get_validation(const Cid& subject,
                                                                 const std::string& validator_id,
                                                                 const std::string& version) const {
  auto it = records_.find({subject, validator_id, version});
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::optional<ValidationRecord> ValidationsStore::latest_for(const Cid& subject) const {
  std::optional<ValidationRecord> best;
  auto it = records_.lower_bound({subject, std::string(), std::string()});
  for (; it != records_.end() && std::get<0>(it->first) == subject; ++it) {
    if (!best || newer(it->second, *best)) best = it->second;
  }
  return best;
}

std::vector<ValidationRecord> ValidationsStore::all() const {
  std::vector<ValidationRecord> out;
  for (const auto& [k, v] : records_) out.push_back(v);
  return out;
}

}  // namespace peerperf
