#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "peerperf/error.hpp"
#include "peerperf/modeling/runtime_model.hpp"
#include "peerperf/modeling/training.hpp"
#include "peerperf/node/config.hpp"
#include "peerperf/node/http.hpp"
#include "peerperf/node/node.hpp"
#include "peerperf/sim/scenario.hpp"

using namespace peerperf;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> pairs(const std::vector<std::string>& items) {
  std::map<std::string, std::string> out;
  for (const auto& item : items) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kSchemaViolation, "expected key=value: " + item);
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

// Prints the body and maps HTTP failures to exit code 1.
int print_response(const node::HttpResponse& r) {
  std::cout << r.body;
  if (!r.body.empty() && r.body.back() != '\n') std::cout << "\n";
  return r.status >= 200 && r.status < 300 ? 0 : 1;
}

int serve(const std::string& config_path) {
  node::NodeConfig config;
  try {
    config = node::load_node_config(config_path);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return node::kExitConfig;
  }
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  try {
    node::Node n(config);
    n.start();
    node::ApiServer api(n, config.api_address);
    api.start();
    spdlog::info("peer {} on {}, API on {}:{}", n.id().text(), n.p2p_address(),
                 node::split_address(config.api_address).first, api.port());
    int sig = 0;
    sigwait(&signals, &sig);
    spdlog::info("shutting down");
    api.stop();
    n.stop();
    return node::kExitOk;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    switch (e.code()) {
      case ErrorCode::kConfigInvalid: return node::kExitConfig;
      case ErrorCode::kBindFailure: return node::kExitBind;
      case ErrorCode::kBootstrapFailure: return node::kExitBootstrap;
      default: return node::kExitConfig;
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"peerperfnet: share and model distributed dataflow performance data"};
  app.require_subcommand(1);
  std::string api = "127.0.0.1:7280";

  auto* serve_cmd = app.add_subcommand("serve", "run a node");
  std::string config_path;
  serve_cmd->add_option("--config", config_path, "node config file")->required();

  auto add_api = [&](CLI::App* cmd) { cmd->add_option("--api", api, "node API address")->capture_default_str(); };

  auto* contribute = app.add_subcommand("contribute", "publish (or privately store) a performance record");
  add_api(contribute);
  std::string record_path;
  std::vector<std::string> attrs;
  bool keep_private = false, force = false;
  contribute->add_option("--record", record_path, "record JSON file")->required();
  contribute->add_option("--attr", attrs, "attribute key=value (repeatable)");
  contribute->add_flag("--private", keep_private, "store locally without sharing");
  contribute->add_flag("--force", force, "publish even if local validation says invalid");

  auto* query = app.add_subcommand("query", "list contributions");
  add_api(query);
  std::string validity = "any";
  std::vector<std::string> filters;
  query->add_option("--validity", validity, "any | network_or_own_valid | own_valid_only")->capture_default_str();
  query->add_option("--filter", filters, "attribute key=value (repeatable)");

  auto* fetch = app.add_subcommand("fetch", "get a block by cid");
  add_api(fetch);
  std::string cid_text, out_path;
  bool pin = false;
  fetch->add_option("cid", cid_text)->required();
  fetch->add_flag("--pin", pin);
  fetch->add_option("--out", out_path, "write bytes here instead of stdout");

  auto* validate = app.add_subcommand("validate", "run the local validator, or ask the network");
  add_api(validate);
  bool network = false;
  validate->add_option("cid", cid_text)->required();
  validate->add_flag("--network", network, "ask connected peers for their verdicts");

  auto* status = app.add_subcommand("status", "node status");
  add_api(status);

  auto* sim = app.add_subcommand("sim", "simulator");
  sim->require_subcommand(1);
  auto* sim_run = sim->add_subcommand("run", "run a scenario");
  std::string scenario_path, out_dir = "sim-out";
  std::optional<std::uint64_t> seed;
  bool full_scale = false;
  sim_run->add_option("--scenario", scenario_path, "scenario file")->required();
  sim_run->add_option("--seed", seed);
  sim_run->add_option("--out", out_dir, "output directory")->capture_default_str();
  sim_run->add_flag("--full-scale", full_scale, "replication_burst with 11133 files");

  auto* model = app.add_subcommand("model", "baseline runtime model");
  model->require_subcommand(1);
  auto* fit = model->add_subcommand("fit", "assemble a training set and fit");
  add_api(fit);
  std::string workload, framework, model_path = "model.json", csv_path;
  bool no_fetch = false;
  fit->add_option("--workload", workload)->required();
  fit->add_option("--framework", framework)->required();
  fit->add_option("--validity", validity, "validity policy")->capture_default_str();
  fit->add_option("--filter", filters, "extra attribute key=value (repeatable)");
  fit->add_option("--out", model_path, "model file")->capture_default_str();
  fit->add_option("--csv", csv_path, "also export the training set as CSV");
  fit->add_flag("--no-fetch", no_fetch, "use only blocks already held locally");
  auto* predict = model->add_subcommand("predict", "predict runtime for a scale-out");
  std::int64_t nodes = 0;
  predict->add_option("--model", model_path)->required();
  predict->add_option("--nodes", nodes)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve_cmd) return serve(config_path);
    if (*contribute) {
      Json body = {{"record", Json::parse(read_file(record_path))}, {"attributes", pairs(attrs)}, {"force", force}};
      if (keep_private) body["share"] = false;
      return print_response(node::http_request(api, "POST", "/v1/contributions", body.dump()));
    }
    if (*query) {
      std::string target = "/v1/contributions?validity=" + validity;
      for (const auto& [k, v] : pairs(filters)) target += "&" + k + "=" + v;
      return print_response(node::http_request(api, "GET", target));
    }
    if (*fetch) {
      auto r = node::http_request(api, "GET", "/v1/blocks/" + cid_text + "?pin=" + (pin ? "true" : "false"));
      if (r.status != 200) return print_response(r);
      if (out_path.empty()) {
        std::cout << r.body;
      } else {
        std::ofstream(out_path, std::ios::binary) << r.body;
      }
      return 0;
    }
    if (*validate) {
      if (!network) {
        auto r = node::http_request(api, "POST", "/v1/validations/" + cid_text);
        if (r.status >= 300) return print_response(r);
      }
      return print_response(node::http_request(api, "GET", "/v1/validations/" + cid_text +
                                                                "?network=" + (network ? "true" : "false")));
    }
    if (*status) return print_response(node::http_request(api, "GET", "/v1/status"));
    if (*sim_run) {
      auto s = sim::load_scenario(scenario_path);
      if (seed) s.seed = *seed;
      if (full_scale) s.full_scale = true;
      auto report = sim::run_scenario(s);
      sim::write_report(report, out_dir);
      std::cout << sim::summary_json(report);
      return 0;
    }
    if (*fit) {
      auto policy = node::parse_validity_policy(validity);
      if (!policy) throw Error(ErrorCode::kConfigInvalid, "validity: " + validity);
      auto filter = pairs(filters);
      filter["workload"] = workload;
      filter["framework"] = framework;
      modeling::HttpDataAccess access(api);
      auto ts = modeling::assemble_training_set(access, filter, *policy, !no_fetch);
      for (const auto& issue : ts.issues) spdlog::warn("skipped {}: {}", issue.cid.text(), issue.problem);
      if (!csv_path.empty()) std::ofstream(csv_path, std::ios::binary) << ts.to_csv();
      auto m = modeling::fit_runtime_model(ts, workload, framework);
      m.save(model_path);
      std::cout << m.to_json().dump(2) << "\n";
      return 0;
    }
    if (*predict) {
      auto m = modeling::RuntimeModel::load(model_path);
      auto p = modeling::predict_runtime(m, nodes);
      std::cout << Json{{"node_count", nodes}, {"runtime_ms", p.runtime_ms}, {"clamped", p.clamped}}.dump() << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const Json::exception& e) {
    std::cerr << "bad JSON: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
