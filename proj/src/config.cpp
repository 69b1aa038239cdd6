#include "peerperf/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace peerperf {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  while (!text.empty()) {
    auto comma = text.find(',');
    auto item = trim(text.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

KeyValues KeyValues::parse(std::string_view text, ErrorCode on_error) {
  KeyValues kv(on_error);
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = trim(text.substr(0, nl));
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(on_error, "line " + std::to_string(line_no) + ": expected key = value");
    }
    auto key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(on_error, "line " + std::to_string(line_no) + ": empty key");
    kv.values_[std::string(key)] = std::string(trim(line.substr(eq + 1)));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path, ErrorCode on_error) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(on_error, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), on_error);
}

std::optional<std::string> KeyValues::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

void KeyValues::fail(const std::string& key, const std::string& why) const {
  throw Error(on_error_, key + ": " + why);
}

std::string KeyValues::text(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double KeyValues::number(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  double out = 0;
  auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || p != v->data() + v->size()) fail(key, "not a number: " + *v);
  return out;
}

std::uint64_t KeyValues::count(const std::string& key, std::uint64_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || p != v->data() + v->size()) fail(key, "not a non-negative integer: " + *v);
  return out;
}

bool KeyValues::flag(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  fail(key, "not a boolean: " + *v);
}

std::vector<std::string> KeyValues::list(const std::string& key) const {
  auto v = get(key);
  return v ? split_list(*v) : std::vector<std::string>{};
}

std::vector<std::string> KeyValues::unknown(const std::set<std::string>& known,
                                            const std::vector<std::string>& prefixes) const {
  std::vector<std::string> out;
  for (const auto& [k, _] : values_) {
    if (known.contains(k)) continue;
    bool prefixed = false;
    for (const auto& p : prefixes) prefixed = prefixed || k.starts_with(p);
    if (!prefixed) out.push_back(k);
  }
  return out;
}

}  // namespace peerperf
