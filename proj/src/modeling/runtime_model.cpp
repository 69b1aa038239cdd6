#include "peerperf/modeling/runtime_model.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "peerperf/error.hpp"

namespace peerperf::modeling {

Basis runtime_basis(std::int64_t node_count) {
  const auto n = static_cast<double>(node_count);
  return {1.0, 1.0 / n, std::log2(n), n};
}

Json RuntimeModel::to_json() const {
  return {{"basis", {"1", "1/n", "log2(n)", "n"}},
          {"framework", framework},
          {"max_abs_residual", max_abs_residual},
          {"residual_sum_squares", residual_sum_squares},
          {"rmse", rmse},
          {"rows", rows},
          {"weights", weights},
          {"workload", workload}};
}

RuntimeModel RuntimeModel::from_json(const Json& j) {
  try {
    RuntimeModel m;
    m.workload = j.at("workload").get<std::string>();
    m.framework = j.at("framework").get<std::string>();
    m.weights = j.at("weights").get<Basis>();
    m.rows = j.at("rows").get<std::size_t>();
    m.residual_sum_squares = j.at("residual_sum_squares").get<double>();
    m.rmse = j.at("rmse").get<double>();
    m.max_abs_residual = j.at("max_abs_residual").get<double>();
    return m;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, e.what());
  }
}

void RuntimeModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << to_json().dump(2) << "\n";
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

RuntimeModel RuntimeModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return from_json(Json::parse(ss.str()));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, e.what());
  }
}

RuntimeModel fit_observations(std::span<const Observation> obs) {
  if (obs.size() < 4) {
    throw Error(ErrorCode::kInsufficientData, std::to_string(obs.size()) + " matching rows, need 4");
  }
  const auto m = static_cast<Eigen::Index>(obs.size());
  Eigen::MatrixXd x(m, 4);
  Eigen::VectorXd y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& o = obs[static_cast<std::size_t>(i)];
    auto b = runtime_basis(o.node_count);
    for (Eigen::Index k = 0; k < 4; ++k) x(i, k) = b[static_cast<std::size_t>(k)];
    y(i) = o.runtime_ms;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < 4) {
    throw Error(ErrorCode::kRankDeficient, "design matrix rank " + std::to_string(qr.rank()) + " < 4");
  }
  Eigen::VectorXd w = qr.solve(y);
  Eigen::VectorXd r = y - x * w;

  RuntimeModel model;
  for (std::size_t k = 0; k < 4; ++k) model.weights[k] = w(static_cast<Eigen::Index>(k));
  model.rows = obs.size();
  model.residual_sum_squares = r.squaredNorm();
  model.rmse = std::sqrt(model.residual_sum_squares / static_cast<double>(m));
  model.max_abs_residual = r.cwiseAbs().maxCoeff();
  return model;
}

RuntimeModel fit_runtime_model(const TrainingSet& ts, const std::string& workload, const std::string& framework) {
  std::vector<Observation> obs;
  for (const auto& r : ts.rows) {
    if (r.record.workload == workload && r.record.framework == framework) {
      obs.push_back({r.record.node_count, static_cast<double>(r.record.runtime_ms)});
    }
  }
  auto model = fit_observations(obs);
  model.workload = workload;
  model.framework = framework;
  return model;
}

Prediction predict_runtime(const RuntimeModel& m, std::int64_t node_count) {
  if (node_count < 1) throw Error(ErrorCode::kSchemaViolation, "node_count must be >= 1");
  auto b = runtime_basis(node_count);
  double v = 0;
  for (std::size_t k = 0; k < 4; ++k) v += m.weights[k] * b[k];
  if (v < 0) {
    spdlog::warn("predicted runtime {} ms for {} nodes clamped to 0", v, node_count);
    return {0, true};
  }
  return {v, false};
}

}  // namespace peerperf::modeling
