#pragma once

#include <compare>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include "peerperf/crypto.hpp"

namespace peerperf {

// Content identifier: SHA-256 digest of a payload. Text form is
// "c1:" followed by 64 lowercase hex characters.
class Cid {
 public:
  static constexpr std::string_view kPrefix = "c1:";
  static constexpr std::size_t kTextLength = 67;

  Cid() = default;
  explicit Cid(const Digest& digest) : digest_(digest) {}

  static Cid of(ByteView bytes) { return Cid(sha256(bytes)); }
  static Cid of(std::string_view bytes) { return of(as_bytes(bytes)); }

  // Accepts exactly ^c1:[0-9a-f]{64}$.
  static std::optional<Cid> parse(std::string_view text);
  // Like parse(), but throws Error(kSchemaViolation) on malformed input.
  static Cid from_text(std::string_view text);

  std::string_view algorithm() const { return "sha256"; }
  const Digest& digest() const { return digest_; }
  std::string text() const;

  bool matches(ByteView bytes) const { return sha256(bytes) == digest_; }

  friend bool operator==(const Cid&, const Cid&) = default;
  // Byte order of the digest equals lexicographic order of the text form.
  friend std::strong_ordering operator<=>(const Cid&, const Cid&) = default;

 private:
  Digest digest_{};
};

inline std::ostream& operator<<(std::ostream& os, const Cid& cid) { return os << cid.text(); }

}  // namespace peerperf

template <>
struct std::hash<peerperf::Cid> {
  std::size_t operator()(const peerperf::Cid& cid) const noexcept {
    std::size_t h = 0;
    for (int i = 0; i < 8; ++i) h = (h << 8) | cid.digest()[static_cast<std::size_t>(i)];
    return h;
  }
};
