#pragma once

// Canonical textual encoding used for everything that gets hashed or framed:
// JSON with lexicographically sorted keys, no insignificant whitespace, UTF-8,
// integers only. nlohmann::json keeps object keys in a std::map, which gives
// the key order for free.

#include <nlohmann/json.hpp>
#include <string>

namespace peerperf {

using Json = nlohmann::json;

inline std::string canonical_dump(const Json& j) {
  return j.dump(-1, ' ', false, Json::error_handler_t::strict);
}

}  // namespace peerperf
