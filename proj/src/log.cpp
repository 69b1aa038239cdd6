#include "peerperf/log.hpp"

#include <algorithm>
#include <unordered_map>

#include "peerperf/canonical.hpp"
#include "peerperf/error.hpp"

namespace peerperf {

LogEntry LogEntry::make(std::string log_id, std::string author, std::uint64_t clock,
                        std::vector<Cid> parents, Cid payload) {
  LogEntry e;
  e.log_id = std::move(log_id);
  e.author = std::move(author);
  e.clock = clock;
  e.parents = std::move(parents);
  e.payload = payload;
  e.id = Cid::of(e.canonical_encoding());
  return e;
}

std::string LogEntry::canonical_encoding() const {
  Json parents_json = Json::array();
  for (const auto& p : parents) parents_json.push_back(p.text());
  Json j = {
      {"author", author},   {"clock", clock},           {"log_id", log_id},
      {"parents", parents_json}, {"payload", payload.text()}, {"v", 1},
  };
  return canonical_dump(j);
}

LogEntry LogEntry::decode(std::string_view text) {
  try {
    auto j = Json::parse(text);
    if (j.at("v").get<int>() != 1) throw Error(ErrorCode::kIntegrityFailure, "entry version");
    LogEntry e;
    e.log_id = j.at("log_id").get<std::string>();
    e.author = j.at("author").get<std::string>();
    e.clock = j.at("clock").get<std::uint64_t>();
    for (const auto& p : j.at("parents")) e.parents.push_back(Cid::from_text(p.get<std::string>()));
    e.payload = Cid::from_text(j.at("payload").get<std::string>());
    e.id = Cid::of(text);
    return e;
  } catch (const Json::exception& ex) {
    throw Error(ErrorCode::kIntegrityFailure, std::string("malformed entry: ") + ex.what());
  } catch (const Error& ex) {
    if (ex.code() == ErrorCode::kIntegrityFailure) throw;
    throw Error(ErrorCode::kIntegrityFailure, std::string("malformed entry: ") + ex.what());
  }
}

bool LogEntry::verify() const { return id == Cid::of(canonical_encoding()); }

const LogEntry* Log::find(const Cid& id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

void Log::insert(const LogEntry& entry) {
  for (const auto& p : entry.parents) {
    referenced_.insert(p);
    heads_.erase(p);
  }
  if (!referenced_.contains(entry.id)) heads_.insert(entry.id);
  order_.emplace(entry.clock, entry.id);
  entries_.emplace(entry.id, entry);
}

const LogEntry& Log::append(const std::string& author, const Cid& payload, const BlockStore& store) {
  if (!store.contains(payload)) throw Error(ErrorCode::kPayloadMissing, payload.text());
  std::vector<Cid> parents(heads_.begin(), heads_.end());
  std::uint64_t clock = 0;
  for (const auto& p : parents) clock = std::max(clock, entries_.at(p).clock + 1);
  auto entry = LogEntry::make(log_id_, author, clock, std::move(parents), payload);
  insert(entry);
  return entries_.at(entry.id);
}

void Log::join(std::span<const LogEntry> incoming) {
  std::unordered_map<Cid, const LogEntry*> fresh;
  for (const auto& e : incoming) {
    if (!entries_.contains(e.id)) fresh.emplace(e.id, &e);
  }
  auto clock_of = [&](const Cid& id) -> std::optional<std::uint64_t> {
    if (auto it = entries_.find(id); it != entries_.end()) return it->second.clock;
    if (auto it = fresh.find(id); it != fresh.end()) return it->second->clock;
    return std::nullopt;
  };
  for (const auto& [id, e] : fresh) {
    if (!e->verify() || e->log_id != log_id_) throw Error(ErrorCode::kIntegrityFailure, id.text());
    if (!std::is_sorted(e->parents.begin(), e->parents.end()) ||
        std::adjacent_find(e->parents.begin(), e->parents.end()) != e->parents.end()) {
      throw Error(ErrorCode::kIntegrityFailure, id.text());
    }
    std::uint64_t expected = 0;
    for (const auto& p : e->parents) {
      auto pc = clock_of(p);
      if (!pc) throw Error(ErrorCode::kDanglingParent, id.text());
      expected = std::max(expected, *pc + 1);
    }
    if (e->clock != expected) throw Error(ErrorCode::kIntegrityFailure, id.text());
  }
  for (const auto& [id, e] : fresh) insert(*e);
}

std::vector<LogEntry> Log::total_order() const {
  std::vector<LogEntry> out;
  out.reserve(entries_.size());
  for (const auto& [clock, id] : order_) out.push_back(entries_.at(id));
  return out;
}

std::set<Cid> Log::missing_entries(const std::set<Cid>& remote_heads) const {
  std::set<Cid> out;
  for (const auto& h : remote_heads) {
    if (!entries_.contains(h)) out.insert(h);
  }
  return out;
}

}  // namespace peerperf
