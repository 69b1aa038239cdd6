#include "peerperf/node/http.hpp"

#include <httplib.h>

#include "peerperf/error.hpp"

namespace peerperf::node {

namespace {

void reply_error(httplib::Response& res, const Error& e) {
  res.status = http_status(e.code());
  res.set_content(Json{{"error", std::string(to_string(e.code()))}, {"detail", e.detail()}}.dump() + "\n",
                  "application/json");
}

void reply_json(httplib::Response& res, const Json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump() + "\n", "application/json");
}

bool truthy(const httplib::Request& req, const char* key) {
  return req.has_param(key) && (req.get_param_value(key) == "true" || req.get_param_value(key) == "1");
}

Cid path_cid(const httplib::Request& req) { return Cid::from_text(req.matches[1].str()); }

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      reply_error(res, e);
    } catch (const Json::exception& e) {
      reply_error(res, Error(ErrorCode::kSchemaViolation, e.what()));
    }
  };
}

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSchemaViolation:
    case ErrorCode::kConfigInvalid: return 400;
    case ErrorCode::kNotFound:
    case ErrorCode::kNotFoundAnywhere: return 404;
    case ErrorCode::kValidationFailedPrePublish: return 422;
    case ErrorCode::kTimeout: return 504;
    default: return 500;
  }
}

ApiServer::ApiServer(Node& node, const std::string& address) : node_(node) {
  auto [host, port] = split_address(address);
  host_ = host;
  requested_port_ = port;
  server_ = std::make_unique<httplib::Server>();
  auto& s = *server_;

  s.Post("/v1/contributions", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto body = Json::parse(req.body);
    auto record = PerformanceRecord::from_json(body.at("record"));
    Attributes attributes = body.value("attributes", Json::object()).get<Attributes>();
    std::optional<bool> share;
    if (body.contains("share")) share = body.at("share").get<bool>();
    bool force = body.value("force", false);
    reply_json(res, node_.api_contribute(record, attributes, share, force).to_json(), 201);
  }));

  s.Get("/v1/contributions", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto policy = ValidityPolicy::kAny;
    AttributeFilter filter;
    for (const auto& [k, v] : req.params) {
      if (k == "validity") {
        auto p = parse_validity_policy(v);
        if (!p) throw Error(ErrorCode::kSchemaViolation, "validity: " + v);
        policy = *p;
      } else {
        filter[k] = v;
      }
    }
    Json rows = Json::array();
    for (const auto& r : node_.api_query(filter, policy)) rows.push_back(r.to_json());
    reply_json(res, rows);
  }));

  s.Get(R"(/v1/blocks/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto cid = path_cid(req);
    Bytes bytes;
    if (truthy(req, "local")) {
      auto local = node_.call([&](protocol::Peer& p) { return p.blocks().get_block(cid); });
      if (!local) throw Error(ErrorCode::kNotFound, cid.text());
      bytes = std::move(*local);
    } else {
      bytes = node_.api_fetch(cid, truthy(req, "pin"));
    }
    res.set_content(std::string(bytes.begin(), bytes.end()), "application/octet-stream");
  }));

  s.Post(R"(/v1/validations/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto task = node_.api_validate(path_cid(req));
    reply_json(res, {{"task_id", task ? Json(*task) : Json(nullptr)}}, 202);
  }));

  s.Get(R"(/v1/validations/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto cid = path_cid(req);
    auto own = node_.api_own_validation(cid);
    Json out = {{"subject_cid", cid.text()}, {"own", own ? own->to_json() : Json(nullptr)}, {"network", nullptr}};
    std::optional<VoteOutcome> network;
    if (truthy(req, "network")) {
      network = node_.api_network_verdict(cid);
    } else {
      network = node_.call([&](protocol::Peer& p) { return p.network_verdict(cid); });
    }
    if (network) {
      out["network"] = {{"decision", std::string(to_string(network->decision))},
                        {"advisory", network->advisory ? Json(std::string(to_string(*network->advisory))) : Json(nullptr)}};
    }
    reply_json(res, out);
  }));

  s.Get("/v1/private-records", guarded([this](const httplib::Request&, httplib::Response& res) {
    Json rows = Json::array();
    for (const auto& [cid, record] : node_.api_private_records()) {
      rows.push_back({{"cid", cid.text()}, {"record", record.to_json()}});
    }
    reply_json(res, rows);
  }));

  s.Get("/v1/status", guarded([this](const httplib::Request&, httplib::Response& res) {
    res.set_content(node_.status().to_text(), "text/plain");
  }));
}

ApiServer::~ApiServer() { stop(); }

void ApiServer::start() {
  if (requested_port_ == 0) {
    int p = server_->bind_to_any_port(host_);
    if (p <= 0) throw Error(ErrorCode::kBindFailure, "api " + host_);
    port_ = static_cast<std::uint16_t>(p);
  } else {
    if (!server_->bind_to_port(host_, requested_port_)) {
      throw Error(ErrorCode::kBindFailure, "api " + host_ + ":" + std::to_string(requested_port_));
    }
    port_ = requested_port_;
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
}

void ApiServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

HttpResponse http_request(const std::string& address, const std::string& method, const std::string& target,
                          const std::string& body, const std::string& content_type) {
  auto [host, port] = split_address(address);
  httplib::Client client(host, port);
  client.set_read_timeout(30, 0);
  httplib::Result r = method == "POST" ? client.Post(target, body, content_type) : client.Get(target);
  if (!r) throw Error(ErrorCode::kIo, "cannot reach API at " + address + ": " + httplib::to_string(r.error()));
  return {r->status, r->body};
}

}  // namespace peerperf::node
