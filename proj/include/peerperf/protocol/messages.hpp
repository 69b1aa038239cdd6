#pragma once

// Wire messages. Every frame is a 4-byte big-endian length followed by the
// canonical textual encoding of one message (UTF-8), which always carries
// "protocol_version": 1.

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "peerperf/cid.hpp"
#include "peerperf/records.hpp"

namespace peerperf::protocol {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::uint16_t kDefaultPort = 7201;
inline constexpr std::size_t kMaxFrameBytes = 8u << 20;

class PeerId {
 public:
  PeerId() = default;
  explicit PeerId(const std::array<std::uint8_t, 16>& raw) : raw_(raw) {}

  template <typename Rng>
  static PeerId random(Rng& rng) {
    std::array<std::uint8_t, 16> raw{};
    for (auto& b : raw) b = static_cast<std::uint8_t>(rng() & 0xff);
    return PeerId(raw);
  }
  static std::optional<PeerId> parse(std::string_view text);

  std::string text() const { return hex_encode(raw_); }
  ByteView bytes() const { return raw_; }

  friend auto operator<=>(const PeerId&, const PeerId&) = default;

 private:
  std::array<std::uint8_t, 16> raw_{};
};

struct PeerInfo {
  PeerId id;
  std::string region;
  std::string address;

  friend bool operator==(const PeerInfo&, const PeerInfo&) = default;
};

using Nonce = std::array<std::uint8_t, 16>;

// `proof` lets the responder check that the initiator knows the network key
// before it reveals its peer list; `address` is where the initiator listens.
struct Hello {
  PeerId peer_id;
  std::string region;
  Nonce nonce{};
  Digest proof{};
  std::string address;
};
struct HelloAck {
  PeerId peer_id;
  std::string region;
  Digest mac{};
  std::vector<PeerInfo> peer_list;
};
struct AuthFail {};
struct Heads {
  std::string log_id;
  std::vector<Cid> heads;
};
struct FetchEntries {
  std::vector<Cid> cids;
};
struct Entries {
  std::vector<std::string> encodings;
};
struct Want {
  Cid cid;
};
struct Block {
  Cid cid;
  Bytes bytes;
};
struct BlockMissing {
  Cid cid;
};
struct ValidationQuery {
  Cid subject_cid;
};
struct ValidationResponse {
  Cid subject_cid;
  std::optional<ValidationRecord> record;
};

using Message = std::variant<Hello, HelloAck, AuthFail, Heads, FetchEntries, Entries, Want, Block,
                             BlockMissing, ValidationQuery, ValidationResponse>;

std::string_view message_type(const Message& msg);

std::string encode_message(const Message& msg);
// Throws Error(kProtocolViolation) for malformed input or a foreign version.
Message decode_message(std::string_view text);

Bytes encode_frame(const Message& msg);

// Incremental frame reassembly for stream transports.
class FrameDecoder {
 public:
  void feed(ByteView data);
  // Next complete payload, if any. Throws Error(kProtocolViolation) for
  // oversized frames.
  std::optional<std::string> next();

 private:
  Bytes buffer_;
};

}  // namespace peerperf::protocol
