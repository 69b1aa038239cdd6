#include "peerperf/validation.hpp"

#include <algorithm>
#include <cmath>

#include "peerperf/error.hpp"

namespace peerperf {

RangeRules RangeRules::from_params(const std::map<std::string, std::string>& params) {
  RangeRules rules;
  auto read = [&](const char* key, std::int64_t& target) {
    if (auto it = params.find(key); it != params.end()) {
      try {
        target = std::stoll(it->second);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kConfigInvalid, key);
      }
    }
  };
  read("max_runtime_ms", rules.max_runtime_ms);
  read("max_node_count", rules.max_node_count);
  read("max_input_size_bytes", rules.max_input_size_bytes);
  return rules;
}

ValidationRecord evaluate(const Cid& subject, ByteView bytes, const ValidatorSpec& spec,
                          std::int64_t now_ms) {
  if (!subject.matches(bytes)) throw Error(ErrorCode::kIntegrityFailure, subject.text());
  ValidationRecord out{.subject_cid = subject,
                       .verdict = Verdict::kValid,
                       .validator_id = spec.validator_id,
                       .validator_version = spec.version,
                       .produced_at = now_ms,
                       .detail = "ok"};
  if (spec.kind == ValidatorKind::kCostModelStub) return out;

  PerformanceRecord record;
  try {
    record = PerformanceRecord::decode(to_string(bytes));
  } catch (const Error&) {
    out.verdict = Verdict::kInvalid;
    out.detail = "parse";
    return out;
  }
  if (auto bad = record.violations(); !bad.empty()) {
    out.verdict = Verdict::kInvalid;
    out.detail = bad.front();
    return out;
  }
  auto rules = RangeRules::from_params(spec.params);
  if (record.runtime_ms > rules.max_runtime_ms) {
    out.verdict = Verdict::kInvalid;
    out.detail = "runtime_ms > " + std::to_string(rules.max_runtime_ms);
  } else if (record.node_count > rules.max_node_count) {
    out.verdict = Verdict::kInvalid;
    out.detail = "node_count > " + std::to_string(rules.max_node_count);
  } else if (record.input_size_bytes > rules.max_input_size_bytes) {
    out.verdict = Verdict::kInvalid;
    out.detail = "input_size_bytes > " + std::to_string(rules.max_input_size_bytes);
  }
  return out;
}

ValidationRecord validate_local(const Cid& subject, ByteView bytes, const ValidatorSpec& spec,
                                ValidationsStore& store, std::int64_t now_ms) {
  auto record = evaluate(subject, bytes, spec, now_ms);
  store.record_validation(record);
  return record;
}

bool VotePolicy::valid() const {
  const auto& t = accept_threshold;
  // 1/2 < num/den <= 1
  return k_required >= 1 && response_timeout_ms >= 1 && t.den > 0 && 2 * t.num > t.den &&
         t.num <= t.den;
}

std::string_view to_string(VoteDecision d) {
  switch (d) {
    case VoteDecision::kMustValidateIndependently: return "must_validate_independently";
    case VoteDecision::kNetworkValid: return "network_valid";
    case VoteDecision::kNetworkInvalid: return "network_invalid";
  }
  return "must_validate_independently";
}

VoteOutcome consolidate_votes(std::span<const ValidationRecord> responses, const VotePolicy& policy) {
  for (const auto& r : responses) {
    if (r.subject_cid != responses.front().subject_cid) {
      throw Error(ErrorCode::kMixedSubjects, r.subject_cid.text());
    }
  }
  VoteOutcome out;
  auto total = static_cast<std::int64_t>(responses.size());
  if (total < policy.k_required) return out;
  std::int64_t valid = 0;
  std::int64_t invalid = 0;
  for (const auto& r : responses) {
    if (r.verdict == Verdict::kValid) ++valid;
    if (r.verdict == Verdict::kInvalid) ++invalid;
  }
  const auto& t = policy.accept_threshold;
  if (valid * t.den >= t.num * total) {
    out.decision = VoteDecision::kNetworkValid;
  } else if (invalid * t.den >= t.num * total) {
    out.advisory = VoteDecision::kNetworkInvalid;
  }
  return out;
}

std::string_view to_string(CostShape s) {
  switch (s) {
    case CostShape::kConstant: return "constant";
    case CostShape::kLinear: return "linear";
    case CostShape::kPolynomial: return "polynomial";
    case CostShape::kExponential: return "exponential";
    case CostShape::kLogarithmic: return "logarithmic";
  }
  return "constant";
}

std::optional<CostShape> parse_cost_shape(std::string_view text) {
  for (auto s : {CostShape::kConstant, CostShape::kLinear, CostShape::kPolynomial,
                 CostShape::kExponential, CostShape::kLogarithmic}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

bool CostModel::valid() const {
  auto need = [&](std::size_t n) { return coefficients.size() == n; };
  bool shape_ok = false;
  switch (shape) {
    case CostShape::kConstant: shape_ok = need(1); break;
    case CostShape::kLinear:
    case CostShape::kLogarithmic: shape_ok = need(2); break;
    case CostShape::kPolynomial: shape_ok = need(3); break;
    case CostShape::kExponential: shape_ok = need(2) && coefficients[1] >= 1.0; break;
  }
  bool nonneg = std::all_of(coefficients.begin(), coefficients.end(),
                            [](double c) { return std::isfinite(c) && c >= 0; });
  return shape_ok && nonneg && batch_overhead_ms >= 0 && ceiling_ms >= 0;
}

double CostModel::cost(std::uint64_t n) const {
  const auto& c = coefficients;
  const auto x = static_cast<double>(n);
  switch (shape) {
    case CostShape::kConstant: return c.at(0);
    case CostShape::kLinear: return c.at(0) + c.at(1) * x;
    case CostShape::kPolynomial: return c.at(0) + c.at(1) * std::pow(x, c.at(2));
    case CostShape::kExponential: return std::min(c.at(0) * std::pow(c.at(1), x), ceiling_ms);
    case CostShape::kLogarithmic: return c.at(0) + c.at(1) * std::log2(1.0 + x);
  }
  return 0;
}

double validation_cost(const CostModel& model, std::uint64_t n_points, bool batched) {
  if (batched) return model.cost(n_points) + model.batch_overhead_ms;
  const auto n = static_cast<double>(n_points);
  return n * model.cost(1) + n * model.batch_overhead_ms;
}

std::optional<ValidationTask> ValidationScheduler::schedule(std::span<const Cid> subjects) {
  ValidationTask task{.id = next_id_, .subjects = {}};
  for (const auto& s : subjects) {
    if (in_flight_.contains(s)) continue;
    if (std::find(task.subjects.begin(), task.subjects.end(), s) != task.subjects.end()) continue;
    task.subjects.push_back(s);
  }
  if (task.subjects.empty()) return std::nullopt;
  ++next_id_;
  for (const auto& s : task.subjects) in_flight_[s] = task.id;
  tasks_[task.id] = task.subjects;
  return task;
}

std::optional<std::uint64_t> ValidationScheduler::task_for(const Cid& subject) const {
  auto it = in_flight_.find(subject);
  if (it == in_flight_.end()) return std::nullopt;
  return it->second;
}

std::vector<Cid> ValidationScheduler::complete(std::uint64_t task_id) {
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) return {};
  auto subjects = std::move(it->second);
  tasks_.erase(it);
  for (const auto& s : subjects) in_flight_.erase(s);
  return subjects;
}

}  // namespace peerperf
