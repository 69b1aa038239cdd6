#pragma once

// Loopback HTTP API in front of a Node, and a small client for the CLI.
//
//   POST /v1/contributions           {"record", "attributes", "share"?, "force"?}
//   GET  /v1/contributions?validity=any|network_or_own_valid|own_valid_only&<attr>=<value>
//   GET  /v1/blocks/{cid}?pin=true|false&local=true|false
//   POST /v1/validations/{cid}       schedule the local validator
//   GET  /v1/validations/{cid}?network=true|false
//   GET  /v1/private-records
//   GET  /v1/status                  text/plain key=value

#include <cstdint>
#include <memory>
#include <string>
#include <thread>

#include "peerperf/node/node.hpp"

namespace httplib {
class Server;
}

namespace peerperf::node {

class ApiServer {
 public:
  ApiServer(Node& node, const std::string& address);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Throws Error(kBindFailure).
  void start();
  void stop();
  std::uint16_t port() const { return port_; }

 private:
  Node& node_;
  std::string host_;
  std::uint16_t requested_port_;
  std::uint16_t port_ = 0;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Throws Error(kIo) when the API cannot be reached.
HttpResponse http_request(const std::string& address, const std::string& method, const std::string& target,
                          const std::string& body = {}, const std::string& content_type = "application/json");

// HTTP status for an error code.
int http_status(ErrorCode code);

}  // namespace peerperf::node
