#include <doctest.h>

#include <cmath>

#include "peerperf/error.hpp"
#include "peerperf/modeling/runtime_model.hpp"
#include "peerperf/modeling/training.hpp"
#include "support.hpp"

using namespace peerperf;
using namespace peerperf::modeling;
using testing::error_code;

namespace {

double generator(std::int64_t n) {
  auto x = static_cast<double>(n);
  return 1000 + 5000 / x + 200 * std::log2(x) + 10 * x;
}

std::vector<Observation> generated() {
  std::vector<Observation> obs;
  for (std::int64_t n : {2, 4, 8, 16, 32}) obs.push_back({n, generator(n)});
  return obs;
}

// Normal equations (X'X) w = X'y solved by Gauss-Jordan in long double.
std::array<long double, 4> normal_equations(const std::vector<Observation>& obs) {
  long double a[4][5] = {};
  for (const auto& o : obs) {
    long double n = o.node_count;
    long double b[4] = {1.0L, 1.0L / n, std::log2(n), n};
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) a[i][j] += b[i] * b[j];
      a[i][4] += b[i] * o.runtime_ms;
    }
  }
  for (int c = 0; c < 4; ++c) {
    int pivot = c;
    for (int r = c + 1; r < 4; ++r) {
      if (std::fabs(a[r][c]) > std::fabs(a[pivot][c])) pivot = r;
    }
    for (int k = 0; k < 5; ++k) std::swap(a[c][k], a[pivot][k]);
    for (int r = 0; r < 4; ++r) {
      if (r == c) continue;
      long double f = a[r][c] / a[c][c];
      for (int k = c; k < 5; ++k) a[r][k] -= f * a[c][k];
    }
  }
  return {a[0][4] / a[0][0], a[1][4] / a[1][1], a[2][4] / a[2][2], a[3][4] / a[3][3]};
}

double rss(const Basis& w, const std::vector<Observation>& obs) {
  double s = 0;
  for (const auto& o : obs) {
    auto b = runtime_basis(o.node_count);
    double p = w[0] * b[0] + w[1] * b[1] + w[2] * b[2] + w[3] * b[3];
    s += (o.runtime_ms - p) * (o.runtime_ms - p);
  }
  return s;
}

PerformanceRecord rec(std::int64_t nodes, std::int64_t runtime, const std::string& workload = "sort") {
  PerformanceRecord r;
  r.workload = workload;
  r.framework = "spark";
  r.framework_version = "3.3";
  r.machine_type = "e2-standard-4";
  r.node_count = nodes;
  r.input_size_bytes = 1 << 20;
  r.runtime_ms = runtime;
  return r;
}

struct FakeAccess : DataAccess {
  struct Shared {
    Cid cid;
    Attributes attrs;
    Bytes bytes;
    bool held = true;
    bool valid = true;
  };
  std::vector<Shared> shared;
  std::vector<std::pair<Cid, Bytes>> priv;
  std::vector<Cid> fetched;

  Cid share(const PerformanceRecord& r, bool valid = true, bool held = true) {
    auto text = r.canonical_encoding();
    Cid cid = Cid::of(text);
    shared.push_back({cid, {{"workload", r.workload}, {"framework", r.framework}}, to_bytes(text), held, valid});
    return cid;
  }
  Cid keep_private(const PerformanceRecord& r) {
    auto text = r.canonical_encoding();
    priv.emplace_back(Cid::of(text), to_bytes(text));
    return priv.back().first;
  }

  std::vector<ContributionRef> contributions(const AttributeFilter& filter, ValidityPolicy policy) override {
    std::vector<ContributionRef> out;
    for (const auto& s : shared) {
      bool match = true;
      for (const auto& [k, v] : filter) match = match && s.attrs.count(k) && s.attrs.at(k) == v;
      if (match && (policy == ValidityPolicy::kAny || s.valid)) out.push_back({s.cid, s.attrs, s.held});
    }
    return out;
  }
  std::optional<Bytes> block(const Cid& cid, bool fetch_missing, bool) override {
    for (const auto& s : shared) {
      if (s.cid != cid) continue;
      if (!s.held && !fetch_missing) return std::nullopt;
      if (!s.held) fetched.push_back(cid);
      return s.bytes;
    }
    return std::nullopt;
  }
  std::vector<std::pair<Cid, Bytes>> private_blocks() override { return priv; }
};

}  // namespace

TEST_CASE("generate-then-fit recovers the weights") {
  auto obs = generated();
  auto m = fit_observations(obs);
  const double w[4] = {1000, 5000, 200, 10};
  for (int k = 0; k < 4; ++k) CHECK(std::fabs(m.weights[k] - w[k]) <= 1e-6 * std::fabs(w[k]));
  CHECK(m.rows == 5);
  CHECK(m.max_abs_residual < 1e-6);
  auto p = predict_runtime(m, 8);
  CHECK(std::fabs(p.runtime_ms - generator(8)) <= 1e-6 * generator(8));
  CHECK_FALSE(p.clamped);
}

TEST_CASE("fit errors") {
  auto obs = generated();
  obs.resize(3);
  CHECK(error_code([&] { fit_observations(obs); }) == ErrorCode::kInsufficientData);
  std::vector<Observation> same(6, Observation{4, 2000});
  CHECK(error_code([&] { fit_observations(same); }) == ErrorCode::kRankDeficient);
  std::vector<Observation> three_points = {{1, 1}, {2, 2}, {4, 3}, {4, 3}, {2, 2}};
  CHECK(error_code([&] { fit_observations(three_points); }) == ErrorCode::kRankDeficient);
}

TEST_CASE("predictions") {
  RuntimeModel zero;
  CHECK(predict_runtime(zero, 5).runtime_ms == 0);
  RuntimeModel m;
  m.weights = {3, 5, 7, 11};
  CHECK(predict_runtime(m, 1).runtime_ms == 3 + 5 + 0 + 11);
  m.weights = {-100, 0, 0, 1};
  auto p = predict_runtime(m, 10);
  CHECK(p.runtime_ms == 0);
  CHECK(p.clamped);
  CHECK(error_code([&] { predict_runtime(m, 0); }) == ErrorCode::kSchemaViolation);
}

TEST_CASE("property: fit equals the normal-equations solution and minimizes squared error") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Observation> obs;
    std::size_t rows = 5 + rng() % 4;
    for (std::size_t i = 0; i < rows; ++i) {
      obs.push_back({1 + static_cast<std::int64_t>(rng() % 64), 100.0 + static_cast<double>(rng() % 100000)});
    }
    RuntimeModel m;
    try {
      m = fit_observations(obs);
    } catch (const Error& e) {
      REQUIRE(e.code() == ErrorCode::kRankDeficient);
      continue;
    }
    auto oracle = normal_equations(obs);
    double scale = 0;
    for (auto v : oracle) scale = std::max(scale, static_cast<double>(std::fabs(v)));
    for (int k = 0; k < 4; ++k) REQUIRE(std::fabs(m.weights[k] - static_cast<double>(oracle[k])) <= 1e-6 * scale + 1e-6);
    double best = rss(m.weights, obs);
    REQUIRE(std::fabs(best - m.residual_sum_squares) <= 1e-6 * (1 + best));
    for (int k = 0; k < 4; ++k) {
      for (double d : {-1e-3, 1e-3}) {
        auto w = m.weights;
        w[k] += d * (1 + std::fabs(w[k]));
        REQUIRE(rss(w, obs) >= best * (1 - 1e-12));
      }
    }
  }
}

TEST_CASE("fit is deterministic and round trips through JSON") {
  testing::TempDir dir;
  TrainingSet ts;
  for (std::int64_t n : {2, 4, 8, 16, 32, 64}) ts.rows.push_back({Cid{}, RowSource::kShared, rec(n, std::llround(generator(n)))});
  ts.rows.push_back({Cid{}, RowSource::kShared, rec(4, 1, "grep")});
  auto a = fit_runtime_model(ts, "sort", "spark");
  auto b = fit_runtime_model(ts, "sort", "spark");
  CHECK(a.weights == b.weights);
  CHECK(a.rows == 6);
  a.save(dir.path() / "model.json");
  auto c = RuntimeModel::load(dir.path() / "model.json");
  CHECK(c.weights == a.weights);
  CHECK(c.workload == "sort");
  CHECK(error_code([&] { fit_runtime_model(ts, "grep", "spark"); }) == ErrorCode::kInsufficientData);
}

TEST_CASE("training set from private rows only") {
  FakeAccess access;
  access.keep_private(rec(2, 100));
  access.keep_private(rec(4, 80));
  auto ts = assemble_training_set(access, {}, ValidityPolicy::kAny, true);
  REQUIRE(ts.rows.size() == 2);
  for (const auto& r : ts.rows) CHECK(r.source == RowSource::kLocalPrivate);
  CHECK(ts.issues.empty());
}

TEST_CASE("validity policy filters shared rows") {
  FakeAccess access;
  std::set<Cid> valid;
  for (int i = 0; i < 3; ++i) valid.insert(access.share(rec(2 + i, 100)));
  Cid bad = access.share(rec(9, 100), false);
  auto ts = assemble_training_set(access, {}, ValidityPolicy::kOwnValidOnly, true);
  std::set<Cid> got;
  for (const auto& r : ts.rows) got.insert(r.cid);
  CHECK(got == valid);
  CHECK_FALSE(got.contains(bad));
  CHECK(assemble_training_set(access, {}, ValidityPolicy::kAny, true).rows.size() == 4);
}

TEST_CASE("a row both shared and private appears once, as shared") {
  FakeAccess access;
  Cid both = access.share(rec(2, 100));
  access.keep_private(rec(2, 100));
  access.keep_private(rec(3, 90));
  auto ts = assemble_training_set(access, {}, ValidityPolicy::kAny, true);
  REQUIRE(ts.rows.size() == 2);
  CHECK(ts.rows[0].cid == both);
  CHECK(ts.rows[0].source == RowSource::kShared);
  CHECK(ts.rows[1].source == RowSource::kLocalPrivate);
}

TEST_CASE("unfetchable, corrupt and malformed rows are reported, not fatal") {
  FakeAccess access;
  Cid remote = access.share(rec(2, 100), true, false);
  Cid corrupt = access.share(rec(3, 100));
  access.shared.back().bytes[5] ^= 1;
  Cid zero = access.share(rec(0, 100));
  access.share(rec(5, 100));

  auto offline = assemble_training_set(access, {}, ValidityPolicy::kAny, false);
  CHECK(offline.rows.size() == 1);
  std::map<Cid, std::string> issues;
  for (const auto& i : offline.issues) issues[i.cid] = i.problem;
  CHECK(issues.at(remote) == "NotFoundAnywhere");
  CHECK(issues.at(corrupt) == "IntegrityFailure");
  CHECK(issues.at(zero).find("SchemaViolation") != std::string::npos);

  auto online = assemble_training_set(access, {}, ValidityPolicy::kAny, true);
  CHECK(online.rows.size() == 2);
  CHECK(access.fetched == std::vector<Cid>{remote});
}

TEST_CASE("training set CSV") {
  FakeAccess access;
  Cid c = access.share(rec(4, 1234));
  auto csv = assemble_training_set(access, {}, ValidityPolicy::kAny, true).to_csv();
  CHECK(csv == "cid,source,workload,framework,framework_version,machine_type,node_count,input_size_bytes,runtime_ms\n" +
                   c.text() + ",shared,sort,spark,3.3,e2-standard-4,4,1048576,1234\n");
}
