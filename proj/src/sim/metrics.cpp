#include "peerperf/sim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "peerperf/records.hpp"

namespace peerperf::sim {

namespace {

double coefficient_of_variation(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0;
  double mean = 0;
  for (auto x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (mean == 0) return 0;
  double var = 0;
  for (auto x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(xs.size())) / mean;
}

struct Samples {
  std::vector<std::int64_t> values;

  double mean() const {
    double sum = 0;
    for (auto v : values) sum += static_cast<double>(v);
    return values.empty() ? 0 : sum / static_cast<double>(values.size());
  }
  Json to_json() const {
    std::int64_t mx = 0;
    std::vector<double> xs;
    for (auto v : values) {
      mx = std::max(mx, v);
      xs.push_back(static_cast<double>(v));
    }
    return {{"avg_us", mean()}, {"cv", coefficient_of_variation(xs)}, {"max_us", mx},
            {"samples", values.size()}};
  }
};

}  // namespace

Json summarize(const std::vector<EventRecord>& events) {
  std::map<std::string, std::string> region_of;
  std::map<std::string, std::int64_t> submitted;
  std::map<std::string, std::map<std::string, std::int64_t>> replicated;  // entry -> peer -> t
  std::map<std::string, std::pair<std::int64_t, double>> boot_start;
  Json joins = Json::array();
  Json validation = Json::object();
  Json query_latency = Json::object();
  std::optional<bool> converged;
  std::map<std::string, Samples> transfers;

  for (const auto& e : events) {
    if (e.type == "peer") {
      region_of[e.peer] = e.subject;
    } else if (e.type == "contribution_submitted") {
      submitted.emplace(e.subject, e.time_us);
    } else if (e.type == "entry_replicated") {
      replicated[e.subject].emplace(e.peer, e.time_us);
    } else if (e.type == "bootstrap_start") {
      boot_start[e.peer] = {e.time_us, e.value};
    } else if (e.type == "bootstrap_complete") {
      auto it = boot_start.find(e.peer);
      if (it == boot_start.end()) continue;
      joins.push_back({{"cluster_size", static_cast<std::int64_t>(it->second.second)},
                       {"peer", e.peer},
                       {"region", region_of.count(e.peer) ? region_of[e.peer] : ""},
                       {"started_us", it->second.first},
                       {"time_us", e.time_us - it->second.first}});
    } else if (e.type == "validation_run") {
      validation[e.subject] = format_metric(e.value);
    } else if (e.type == "validation_query_latency") {
      query_latency[e.subject] = static_cast<std::int64_t>(e.value);
    } else if (e.type == "transfer") {
      transfers[e.subject].values.push_back(static_cast<std::int64_t>(e.value));
    } else if (e.type == "converged") {
      converged = e.value != 0;
    }
  }

  const auto peer_count = region_of.size();
  std::map<std::string, Samples> per_region;
  std::map<std::string, Samples> per_peer;
  std::vector<std::int64_t> all_peer;
  std::size_t fully = 0;
  for (const auto& [entry, t0] : submitted) {
    auto it = replicated.find(entry);
    std::int64_t worst = 0;
    std::size_t count = 0;
    if (it != replicated.end()) {
      for (const auto& [peer, t] : it->second) {
        auto dt = t - t0;
        worst = std::max(worst, dt);
        ++count;
        per_region[region_of[peer]].values.push_back(dt);
        per_peer[peer].values.push_back(dt);
      }
    }
    if (peer_count > 0 && count + 1 >= peer_count) {
      ++fully;
      all_peer.push_back(worst);
    }
  }
  std::sort(all_peer.begin(), all_peer.end());
  auto under = static_cast<std::size_t>(
      std::count_if(all_peer.begin(), all_peer.end(), [](auto v) { return v < kReplicationTargetUs; }));
  // Spread of per-peer mean replication times inside each region, and of the
  // region means across regions.
  std::map<std::string, std::vector<double>> peer_means;
  for (const auto& [peer, stats] : per_peer) peer_means[region_of[peer]].push_back(stats.mean());
  Json regions = Json::object();
  std::vector<double> region_means;
  for (const auto& [region, stats] : per_region) {
    regions[region] = stats.to_json();
    regions[region]["peer_cv"] = coefficient_of_variation(peer_means[region]);
    region_means.push_back(stats.mean());
  }
  auto percentile = [&](double q) -> std::int64_t {
    if (all_peer.empty()) return 0;
    auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(all_peer.size()))) - 1;
    return all_peer[std::min(idx, all_peer.size() - 1)];
  };

  Json summary = {
      {"peers", peer_count},
      {"replication",
       {{"contributions", submitted.size()},
        {"fully_replicated", fully},
        {"under_target", under},
        {"p50_all_peer_us", percentile(0.5)},
        {"p99_all_peer_us", percentile(0.99)},
        {"max_all_peer_us", all_peer.empty() ? 0 : all_peer.back()},
        {"per_region", regions},
        {"region_cv", coefficient_of_variation(region_means)}}},
      {"bootstrap", {{"joins", joins}}},
      {"validation", {{"runs_ms", validation}, {"query_latency_us", query_latency}}},
  };
  Json transfer = Json::object();
  for (const auto& [size, stats] : transfers) transfer[size] = stats.to_json();
  summary["transfer"] = transfer;
  summary["converged"] = converged ? Json(*converged) : Json(nullptr);
  return summary;
}

namespace {

std::vector<double> ranks(const std::vector<double>& xs) {
  std::vector<std::size_t> idx(xs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return xs[a] < xs[b]; });
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) out[idx[k]] = r;
    i = j + 1;
  }
  return out;
}

double median(std::vector<double> xs) {
  if (xs.empty()) return 0;
  std::sort(xs.begin(), xs.end());
  auto n = xs.size();
  return n % 2 ? xs[n / 2] : (xs[n / 2 - 1] + xs[n / 2]) / 2.0;
}

}  // namespace

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) return 0;
  auto rx = ranks(xs);
  auto ry = ranks(ys);
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0;
  return sxy / std::sqrt(sxx * syy);
}

BootstrapAnalysis analyze_bootstrap(const Json& summary, const std::string& root_region) {
  struct Join {
    double cluster;
    double started;
    std::string region;
    double time;
  };
  std::vector<Join> joins;
  for (const auto& j : summary.at("bootstrap").at("joins")) {
    joins.push_back({j.at("cluster_size").get<double>(), j.at("started_us").get<double>(),
                     j.at("region").get<std::string>(), j.at("time_us").get<double>()});
  }
  std::stable_sort(joins.begin(), joins.end(), [](const Join& a, const Join& b) { return a.started < b.started; });

  BootstrapAnalysis out;
  std::vector<double> index, time;
  std::set<std::string> seen = {root_region};
  std::vector<double> first;
  std::vector<std::pair<double, double>> later;  // cluster size, time
  double max_first_cluster = 0;
  for (std::size_t i = 0; i < joins.size(); ++i) {
    index.push_back(static_cast<double>(i));
    time.push_back(joins[i].time);
    if (seen.insert(joins[i].region).second) {
      first.push_back(joins[i].time);
      max_first_cluster = std::max(max_first_cluster, joins[i].cluster);
    } else {
      later.emplace_back(joins[i].cluster, joins[i].time);
    }
  }
  out.spearman = spearman(index, time);
  std::vector<double> comparable;
  for (const auto& [cluster, t] : later) {
    if (cluster <= max_first_cluster + static_cast<double>(seen.size())) comparable.push_back(t);
  }
  out.first_in_region = first.size();
  out.same_region = comparable.size();
  out.first_in_region_median_us = median(first);
  out.same_region_median_us = median(comparable);
  return out;
}

bool replay_check(const MetricsReport& report) { return summarize(report.events) == report.summary; }

std::string events_csv(const std::vector<EventRecord>& events) {
  std::string out = "time_us,peer,event,subject,value\n";
  for (const auto& e : events) {
    out += std::to_string(e.time_us) + "," + e.peer + "," + e.type + "," + e.subject + "," +
           format_metric(e.value) + "\n";
  }
  return out;
}

std::string summary_json(const MetricsReport& report) { return report.summary.dump(2) + "\n"; }

void write_report(const MetricsReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "events.csv", std::ios::binary) << events_csv(report.events);
  std::ofstream(dir / "summary.json", std::ios::binary) << summary_json(report);
}

}  // namespace peerperf::sim
