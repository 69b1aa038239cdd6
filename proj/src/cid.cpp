#include "peerperf/cid.hpp"

#include <algorithm>

#include "peerperf/error.hpp"

namespace peerperf {

std::optional<Cid> Cid::parse(std::string_view text) {
  if (text.size() != kTextLength || !text.starts_with(kPrefix)) return std::nullopt;
  auto raw = hex_decode(text.substr(kPrefix.size()));
  if (!raw || raw->size() != 32) return std::nullopt;
  Digest d{};
  std::copy(raw->begin(), raw->end(), d.begin());
  return Cid(d);
}

Cid Cid::from_text(std::string_view text) {
  auto cid = parse(text);
  if (!cid) throw Error(ErrorCode::kSchemaViolation, "malformed cid '" + std::string(text) + "'");
  return *cid;
}

std::string Cid::text() const {
  std::string out(kPrefix);
  out += hex_encode(digest_);
  return out;
}

}  // namespace peerperf
