#include "peerperf/protocol/messages.hpp"

#include <algorithm>

#include "peerperf/canonical.hpp"
#include "peerperf/error.hpp"

namespace peerperf::protocol {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void violation(const std::string& what) {
  throw Error(ErrorCode::kProtocolViolation, what);
}

template <std::size_t N>
std::array<std::uint8_t, N> fixed_hex(const Json& j, const char* key) {
  auto raw = hex_decode(j.at(key).get<std::string>());
  if (!raw || raw->size() != N) violation(std::string("bad ") + key);
  std::array<std::uint8_t, N> out{};
  std::copy(raw->begin(), raw->end(), out.begin());
  return out;
}

PeerId peer_id_at(const Json& j, const char* key) {
  auto id = PeerId::parse(j.at(key).get<std::string>());
  if (!id) violation(std::string("bad ") + key);
  return *id;
}

Cid cid_at(const Json& j, const char* key) {
  auto cid = Cid::parse(j.at(key).get<std::string>());
  if (!cid) violation(std::string("bad ") + key);
  return *cid;
}

std::vector<Cid> cids_at(const Json& j, const char* key) {
  std::vector<Cid> out;
  for (const auto& item : j.at(key)) {
    auto cid = Cid::parse(item.get<std::string>());
    if (!cid) violation(std::string("bad ") + key);
    out.push_back(*cid);
  }
  return out;
}

Json cids_json(const std::vector<Cid>& cids) {
  Json out = Json::array();
  for (const auto& c : cids) out.push_back(c.text());
  return out;
}

}  // namespace

std::optional<PeerId> PeerId::parse(std::string_view text) {
  if (text.size() != 32) return std::nullopt;
  auto raw = hex_decode(text);
  if (!raw) return std::nullopt;
  std::array<std::uint8_t, 16> out{};
  std::copy(raw->begin(), raw->end(), out.begin());
  return PeerId(out);
}

std::string_view message_type(const Message& msg) {
  return std::visit(overloaded{
                        [](const Hello&) { return "HELLO"; },
                        [](const HelloAck&) { return "HELLO_ACK"; },
                        [](const AuthFail&) { return "AUTH_FAIL"; },
                        [](const Heads&) { return "HEADS"; },
                        [](const FetchEntries&) { return "FETCH_ENTRIES"; },
                        [](const Entries&) { return "ENTRIES"; },
                        [](const Want&) { return "WANT"; },
                        [](const Block&) { return "BLOCK"; },
                        [](const BlockMissing&) { return "BLOCK_MISSING"; },
                        [](const ValidationQuery&) { return "VALIDATION_QUERY"; },
                        [](const ValidationResponse&) { return "VALIDATION_RESPONSE"; },
                    },
                    msg);
}

std::string encode_message(const Message& msg) {
  Json j = std::visit(
      overloaded{
          [](const Hello& m) -> Json {
            return {{"peer_id", m.peer_id.text()}, {"region", m.region},
                    {"nonce", hex_encode(m.nonce)}, {"proof", hex_encode(m.proof)},
                    {"address", m.address}};
          },
          [](const HelloAck& m) -> Json {
            Json peers = Json::array();
            for (const auto& p : m.peer_list) {
              peers.push_back({{"address", p.address}, {"peer_id", p.id.text()}, {"region", p.region}});
            }
            return {{"peer_id", m.peer_id.text()}, {"region", m.region}, {"mac", hex_encode(m.mac)},
                    {"peer_list", peers}};
          },
          [](const AuthFail&) -> Json { return Json::object(); },
          [](const Heads& m) -> Json {
            return {{"log_id", m.log_id}, {"head_cids", cids_json(m.heads)}};
          },
          [](const FetchEntries& m) -> Json { return {{"cids", cids_json(m.cids)}}; },
          [](const Entries& m) -> Json { return {{"entries", m.encodings}}; },
          [](const Want& m) -> Json { return {{"cid", m.cid.text()}}; },
          [](const Block& m) -> Json {
            return {{"cid", m.cid.text()}, {"bytes", base64_encode(m.bytes)}};
          },
          [](const BlockMissing& m) -> Json { return {{"cid", m.cid.text()}}; },
          [](const ValidationQuery& m) -> Json { return {{"subject_cid", m.subject_cid.text()}}; },
          [](const ValidationResponse& m) -> Json {
            return {{"subject_cid", m.subject_cid.text()},
                    {"record", m.record ? m.record->to_json() : Json(nullptr)}};
          },
      },
      msg);
  j["type"] = std::string(message_type(msg));
  j["protocol_version"] = kProtocolVersion;
  return canonical_dump(j);
}

Message decode_message(std::string_view text) {
  auto j = Json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) violation("unparsable frame");
  try {
    if (!j.contains("protocol_version") || !j.at("protocol_version").is_number_integer() ||
        j.at("protocol_version").get<int>() != kProtocolVersion) {
      violation("unsupported protocol_version");
    }
    auto type = j.at("type").get<std::string>();
    if (type == "HELLO") {
      return Hello{peer_id_at(j, "peer_id"), j.at("region").get<std::string>(),
                   fixed_hex<16>(j, "nonce"), fixed_hex<32>(j, "proof"),
                   j.at("address").get<std::string>()};
    }
    if (type == "HELLO_ACK") {
      HelloAck m{peer_id_at(j, "peer_id"), j.at("region").get<std::string>(), fixed_hex<32>(j, "mac"), {}};
      for (const auto& p : j.at("peer_list")) {
        m.peer_list.push_back({peer_id_at(p, "peer_id"), p.at("region").get<std::string>(),
                               p.at("address").get<std::string>()});
      }
      return m;
    }
    if (type == "AUTH_FAIL") return AuthFail{};
    if (type == "HEADS") return Heads{j.at("log_id").get<std::string>(), cids_at(j, "head_cids")};
    if (type == "FETCH_ENTRIES") return FetchEntries{cids_at(j, "cids")};
    if (type == "ENTRIES") return Entries{j.at("entries").get<std::vector<std::string>>()};
    if (type == "WANT") return Want{cid_at(j, "cid")};
    if (type == "BLOCK") {
      auto bytes = base64_decode(j.at("bytes").get<std::string>());
      if (!bytes) violation("bad block encoding");
      return Block{cid_at(j, "cid"), std::move(*bytes)};
    }
    if (type == "BLOCK_MISSING") return BlockMissing{cid_at(j, "cid")};
    if (type == "VALIDATION_QUERY") return ValidationQuery{cid_at(j, "subject_cid")};
    if (type == "VALIDATION_RESPONSE") {
      ValidationResponse m{cid_at(j, "subject_cid"), std::nullopt};
      if (!j.at("record").is_null()) m.record = ValidationRecord::from_json(j.at("record"));
      return m;
    }
    violation("unknown message type " + type);
  } catch (const Json::exception& e) {
    violation(std::string("malformed frame: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kProtocolViolation) throw;
    violation(std::string("malformed frame: ") + e.what());
  }
}

Bytes encode_frame(const Message& msg) {
  auto body = encode_message(msg);
  auto n = static_cast<std::uint32_t>(body.size());
  Bytes frame{static_cast<std::uint8_t>(n >> 24), static_cast<std::uint8_t>(n >> 16),
              static_cast<std::uint8_t>(n >> 8), static_cast<std::uint8_t>(n)};
  frame.insert(frame.end(), body.begin(), body.end());
  return frame;
}

void FrameDecoder::feed(ByteView data) { buffer_.insert(buffer_.end(), data.begin(), data.end()); }

std::optional<std::string> FrameDecoder::next() {
  if (buffer_.size() < 4) return std::nullopt;
  std::uint32_t n = (std::uint32_t{buffer_[0]} << 24) | (std::uint32_t{buffer_[1]} << 16) |
                    (std::uint32_t{buffer_[2]} << 8) | std::uint32_t{buffer_[3]};
  if (n > kMaxFrameBytes) violation("frame too large");
  if (buffer_.size() < 4 + std::size_t{n}) return std::nullopt;
  std::string payload(buffer_.begin() + 4, buffer_.begin() + 4 + n);
  buffer_.erase(buffer_.begin(), buffer_.begin() + 4 + n);
  return payload;
}

}  // namespace peerperf::protocol
