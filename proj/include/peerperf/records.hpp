#pragma once

// Payload schemas: performance records, contribution announcements and
// validation verdicts, with their canonical encodings.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "peerperf/canonical.hpp"
#include "peerperf/cid.hpp"

namespace peerperf {

struct PerformanceRecord {
  std::string workload;
  std::string framework;
  std::string framework_version;
  std::string machine_type;
  std::int64_t node_count = 1;
  std::int64_t input_size_bytes = 0;
  std::int64_t runtime_ms = 1;
  std::map<std::string, double> extra_metrics;

  // Names of fields breaking the record invariants, in declaration order.
  std::vector<std::string> violations() const;

  // Floats in extra_metrics are written as shortest round-trip decimal
  // strings so the hashed form never depends on float formatting.
  std::string canonical_encoding() const;
  Json to_json() const;
  // Throws Error(kSchemaViolation) naming the first bad field.
  static PerformanceRecord from_json(const Json& j);
  static PerformanceRecord decode(std::string_view text);

  friend bool operator==(const PerformanceRecord&, const PerformanceRecord&) = default;
};

inline const std::vector<std::string>& required_contribution_keys() {
  static const std::vector<std::string> keys = {"framework", "platform", "schema_version",
                                                "submitter_region", "workload"};
  return keys;
}

using Attributes = std::map<std::string, std::string>;

struct Contribution {
  Cid data_cid;
  Attributes attributes;
  std::int64_t created_at = 0;  // ms since epoch

  std::vector<std::string> violations() const;
  std::string canonical_encoding() const;
  Json to_json() const;
  static Contribution from_json(const Json& j);
  static Contribution decode(std::string_view text);

  friend bool operator==(const Contribution&, const Contribution&) = default;
};

enum class Verdict { kValid, kInvalid, kInconclusive };

std::string_view to_string(Verdict v);
std::optional<Verdict> parse_verdict(std::string_view text);

struct ValidationRecord {
  Cid subject_cid;
  Verdict verdict = Verdict::kInconclusive;
  std::string validator_id;
  std::string validator_version;
  std::int64_t produced_at = 0;
  std::string detail;

  Json to_json() const;
  static ValidationRecord from_json(const Json& j);
  std::string canonical_encoding() const { return canonical_dump(to_json()); }

  friend bool operator==(const ValidationRecord&, const ValidationRecord&) = default;
};

std::string format_metric(double value);

}  // namespace peerperf
