#pragma once

// Local validation pipelines, vote consolidation, and the cost models used to
// study validation scaling in simulation.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "peerperf/block_store.hpp"
#include "peerperf/records.hpp"
#include "peerperf/stores.hpp"

namespace peerperf {

enum class ValidatorKind { kBuiltinSchemaRange, kCostModelStub };

struct ValidatorSpec {
  std::string validator_id = "schema-range";
  std::string version = "1";
  ValidatorKind kind = ValidatorKind::kBuiltinSchemaRange;
  std::optional<Cid> code_cid;  // addressed only, never executed
  std::map<std::string, std::string> params;
};

// Range rules read from ValidatorSpec::params (max_runtime_ms,
// max_node_count, max_input_size_bytes).
struct RangeRules {
  std::int64_t max_runtime_ms = 7LL * 24 * 3600 * 1000;
  std::int64_t max_node_count = 10000;
  std::int64_t max_input_size_bytes = 1LL << 50;

  static RangeRules from_params(const std::map<std::string, std::string>& params);
};

// Pure and deterministic. Throws Error(kIntegrityFailure) if `bytes` do not
// hash to `subject`.
ValidationRecord evaluate(const Cid& subject, ByteView bytes, const ValidatorSpec& spec,
                          std::int64_t now_ms);

// evaluate() and record the result.
ValidationRecord validate_local(const Cid& subject, ByteView bytes, const ValidatorSpec& spec,
                                ValidationsStore& store, std::int64_t now_ms);

struct Ratio {
  std::int64_t num = 2;
  std::int64_t den = 3;
};

struct VotePolicy {
  std::int64_t k_required = 5;
  std::int64_t response_timeout_ms = 2000;
  Ratio accept_threshold{2, 3};

  bool valid() const;
};

enum class VoteDecision { kMustValidateIndependently, kNetworkValid, kNetworkInvalid };

std::string_view to_string(VoteDecision d);

struct VoteOutcome {
  VoteDecision decision = VoteDecision::kMustValidateIndependently;
  // Set to kNetworkInvalid when the network rejected the subject; the local
  // node still has to validate it itself.
  std::optional<VoteDecision> advisory;

  friend bool operator==(const VoteOutcome&, const VoteOutcome&) = default;
};

// Throws Error(kMixedSubjects) if responses disagree on the subject.
VoteOutcome consolidate_votes(std::span<const ValidationRecord> responses, const VotePolicy& policy);

enum class CostShape { kConstant, kLinear, kPolynomial, kExponential, kLogarithmic };

std::string_view to_string(CostShape s);
std::optional<CostShape> parse_cost_shape(std::string_view text);

// Coefficients per shape:
//   constant     {c0}              c0
//   linear       {c0, c1}          c0 + c1*n
//   polynomial   {c0, c1, p}       c0 + c1*n^p
//   exponential  {c0, b}           min(c0*b^n, ceiling_ms)
//   logarithmic  {c0, c1}          c0 + c1*log2(1 + n)
struct CostModel {
  CostShape shape = CostShape::kConstant;
  std::vector<double> coefficients{0.0};
  double batch_overhead_ms = 0;
  double ceiling_ms = 3.6e6;

  double cost(std::uint64_t n) const;
  bool valid() const;
};

// Simulated milliseconds to validate n points, one at a time or as a batch.
double validation_cost(const CostModel& model, std::uint64_t n_points, bool batched);

struct ValidationTask {
  std::uint64_t id = 0;
  std::vector<Cid> subjects;
};

// Tracks in-flight validation work so concurrent requests for one subject
// coalesce into a single execution. Execution itself belongs to the driver.
class ValidationScheduler {
 public:
  // Subjects already in flight are dropped from the new task; nullopt when
  // nothing is left to run.
  std::optional<ValidationTask> schedule(std::span<const Cid> subjects);
  std::optional<std::uint64_t> task_for(const Cid& subject) const;
  // Releases the task's subjects; returns them.
  std::vector<Cid> complete(std::uint64_t task_id);
  std::size_t in_flight() const { return in_flight_.size(); }

 private:
  std::uint64_t next_id_ = 1;
  std::map<Cid, std::uint64_t> in_flight_;
  std::map<std::uint64_t, std::vector<Cid>> tasks_;
};

}  // namespace peerperf
