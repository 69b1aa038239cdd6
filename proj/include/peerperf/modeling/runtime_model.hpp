#pragma once

// Baseline scale-out runtime model: ordinary least squares of runtime_ms on
// the basis (1, 1/n, log2 n, n) in the node count n.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "peerperf/canonical.hpp"
#include "peerperf/modeling/training.hpp"

namespace peerperf::modeling {

using Basis = std::array<double, 4>;

Basis runtime_basis(std::int64_t node_count);

struct RuntimeModel {
  std::string workload;
  std::string framework;
  Basis weights{};
  std::size_t rows = 0;
  double residual_sum_squares = 0;
  double rmse = 0;
  double max_abs_residual = 0;

  Json to_json() const;
  // Throws Error(kSchemaViolation).
  static RuntimeModel from_json(const Json& j);
  void save(const std::filesystem::path& path) const;
  static RuntimeModel load(const std::filesystem::path& path);
};

struct Observation {
  std::int64_t node_count = 1;
  double runtime_ms = 0;
};

// OLS over raw observations. Throws Error(kInsufficientData) below 4 rows
// and Error(kRankDeficient) when the design matrix lacks full column rank.
RuntimeModel fit_observations(std::span<const Observation> obs);

// Fits on the rows matching workload and framework. Throws
// Error(kInsufficientData) below 4 rows and Error(kRankDeficient) when the
// design matrix lacks full column rank.
RuntimeModel fit_runtime_model(const TrainingSet& ts, const std::string& workload, const std::string& framework);

struct Prediction {
  double runtime_ms = 0;
  bool clamped = false;  // the raw value was negative
};

// Throws Error(kSchemaViolation) for node_count < 1.
Prediction predict_runtime(const RuntimeModel& m, std::int64_t node_count);

}  // namespace peerperf::modeling
