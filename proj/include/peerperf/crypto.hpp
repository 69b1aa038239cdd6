#pragma once

// Hashing, keyed hashing and text codecs used across the store and the wire
// protocol. Thin wrappers over OpenSSL.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace peerperf {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}
inline Bytes to_bytes(std::string_view s) {
  auto v = as_bytes(s);
  return {v.begin(), v.end()};
}
inline std::string to_string(ByteView b) {
  return {reinterpret_cast<const char*>(b.data()), b.size()};
}

Digest sha256(ByteView data);
Digest hmac_sha256(ByteView key, ByteView message);

// Network key: SHA-256 applied 10 000 times, starting from
// passphrase || "peerperfnet-v1". Results are memoized per passphrase.
Digest derive_network_key(std::string_view passphrase);

bool constant_time_equal(ByteView a, ByteView b);

std::string hex_encode(ByteView data);
std::optional<Bytes> hex_decode(std::string_view text);

std::string base64_encode(ByteView data);
std::optional<Bytes> base64_decode(std::string_view text);

}  // namespace peerperf
