#include "peerperf/records.hpp"

#include <charconv>
#include <cmath>

#include "peerperf/error.hpp"

namespace peerperf {

std::string format_metric(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return {buf, res.ptr};
}

namespace {

double parse_metric(const std::string& key, const std::string& text) {
  double v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::kSchemaViolation, "extra_metrics." + key);
  }
  return v;
}

template <typename T>
T field(const Json& j, const char* name) {
  try {
    return j.at(name).get<T>();
  } catch (const Json::exception&) {
    throw Error(ErrorCode::kSchemaViolation, name);
  }
}

Json parse_text(std::string_view text) {
  auto j = Json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::kSchemaViolation, "parse");
  return j;
}

}  // namespace

std::vector<std::string> PerformanceRecord::violations() const {
  std::vector<std::string> out;
  if (workload.empty()) out.emplace_back("workload");
  if (framework.empty()) out.emplace_back("framework");
  if (framework_version.empty()) out.emplace_back("framework_version");
  if (machine_type.empty()) out.emplace_back("machine_type");
  if (node_count < 1) out.emplace_back("node_count");
  if (input_size_bytes < 0) out.emplace_back("input_size_bytes");
  if (runtime_ms < 1) out.emplace_back("runtime_ms");
  for (const auto& [k, v] : extra_metrics) {
    if (!std::isfinite(v)) out.push_back("extra_metrics." + k);
  }
  return out;
}

Json PerformanceRecord::to_json() const {
  Json metrics = Json::object();
  for (const auto& [k, v] : extra_metrics) metrics[k] = format_metric(v);
  return {
      {"extra_metrics", metrics},
      {"framework", framework},
      {"framework_version", framework_version},
      {"input_size_bytes", input_size_bytes},
      {"machine_type", machine_type},
      {"node_count", node_count},
      {"runtime_ms", runtime_ms},
      {"workload", workload},
  };
}

std::string PerformanceRecord::canonical_encoding() const { return canonical_dump(to_json()); }

PerformanceRecord PerformanceRecord::from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kSchemaViolation, "parse");
  PerformanceRecord r;
  r.workload = field<std::string>(j, "workload");
  r.framework = field<std::string>(j, "framework");
  r.framework_version = field<std::string>(j, "framework_version");
  r.machine_type = field<std::string>(j, "machine_type");
  r.node_count = field<std::int64_t>(j, "node_count");
  r.input_size_bytes = field<std::int64_t>(j, "input_size_bytes");
  r.runtime_ms = field<std::int64_t>(j, "runtime_ms");
  if (auto it = j.find("extra_metrics"); it != j.end()) {
    if (!it->is_object()) throw Error(ErrorCode::kSchemaViolation, "extra_metrics");
    for (const auto& [k, v] : it->items()) {
      if (v.is_string()) {
        r.extra_metrics[k] = parse_metric(k, v.get<std::string>());
      } else if (v.is_number()) {
        r.extra_metrics[k] = v.get<double>();
      } else {
        throw Error(ErrorCode::kSchemaViolation, "extra_metrics." + k);
      }
    }
  }
  return r;
}

PerformanceRecord PerformanceRecord::decode(std::string_view text) {
  return from_json(parse_text(text));
}

std::vector<std::string> Contribution::violations() const {
  std::vector<std::string> out;
  for (const auto& key : required_contribution_keys()) {
    auto it = attributes.find(key);
    if (it == attributes.end() || it->second.empty()) out.push_back(key);
  }
  return out;
}

Json Contribution::to_json() const {
  return {{"attributes", attributes}, {"created_at", created_at}, {"data_cid", data_cid.text()}};
}

std::string Contribution::canonical_encoding() const { return canonical_dump(to_json()); }

Contribution Contribution::from_json(const Json& j) {
  Contribution c;
  c.data_cid = Cid::from_text(field<std::string>(j, "data_cid"));
  c.attributes = field<Attributes>(j, "attributes");
  c.created_at = field<std::int64_t>(j, "created_at");
  return c;
}

Contribution Contribution::decode(std::string_view text) { return from_json(parse_text(text)); }

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kValid: return "valid";
    case Verdict::kInvalid: return "invalid";
    case Verdict::kInconclusive: return "inconclusive";
  }
  return "inconclusive";
}

std::optional<Verdict> parse_verdict(std::string_view text) {
  if (text == "valid") return Verdict::kValid;
  if (text == "invalid") return Verdict::kInvalid;
  if (text == "inconclusive") return Verdict::kInconclusive;
  return std::nullopt;
}

Json ValidationRecord::to_json() const {
  return {
      {"detail", detail},
      {"produced_at", produced_at},
      {"subject_cid", subject_cid.text()},
      {"validator_id", validator_id},
      {"validator_version", validator_version},
      {"verdict", std::string(to_string(verdict))},
  };
}

ValidationRecord ValidationRecord::from_json(const Json& j) {
  ValidationRecord r;
  r.subject_cid = Cid::from_text(field<std::string>(j, "subject_cid"));
  auto verdict = parse_verdict(field<std::string>(j, "verdict"));
  if (!verdict) throw Error(ErrorCode::kSchemaViolation, "verdict");
  r.verdict = *verdict;
  r.validator_id = field<std::string>(j, "validator_id");
  r.validator_version = field<std::string>(j, "validator_version");
  r.produced_at = field<std::int64_t>(j, "produced_at");
  r.detail = field<std::string>(j, "detail");
  return r;
}

}  // namespace peerperf
