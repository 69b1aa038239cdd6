#pragma once

// `key = value` text files. Blank lines and lines starting with '#' are
// ignored; list values are comma separated.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "peerperf/error.hpp"

namespace peerperf {

class KeyValues {
 public:
  explicit KeyValues(ErrorCode on_error = ErrorCode::kConfigInvalid) : on_error_(on_error) {}

  static KeyValues parse(std::string_view text, ErrorCode on_error = ErrorCode::kConfigInvalid);
  static KeyValues load(const std::filesystem::path& path,
                        ErrorCode on_error = ErrorCode::kConfigInvalid);

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool has(const std::string& key) const { return values_.contains(key); }
  std::optional<std::string> get(const std::string& key) const;

  std::string text(const std::string& key, const std::string& fallback) const;
  double number(const std::string& key, double fallback) const;
  std::uint64_t count(const std::string& key, std::uint64_t fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::vector<std::string> list(const std::string& key) const;

  // Keys not in `known` and not starting with one of `prefixes`.
  std::vector<std::string> unknown(const std::set<std::string>& known,
                                   const std::vector<std::string>& prefixes = {}) const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  [[noreturn]] void fail(const std::string& key, const std::string& why) const;

  ErrorCode on_error_;
  std::map<std::string, std::string> values_;
};

std::vector<std::string> split_list(std::string_view text);

}  // namespace peerperf
