#pragma once

// Blocking TCP plumbing for the daemon: one reader and one writer thread
// per connection, a bounded outbound queue, and an accept thread.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "peerperf/protocol/messages.hpp"

namespace peerperf::node {

class Connection {
 public:
  using OnMessage = std::function<void(std::uint64_t conn, protocol::Message msg)>;
  using OnClose = std::function<void(std::uint64_t conn, std::string reason)>;

  static constexpr std::size_t kMaxQueuedFrames = 4096;

  // Takes ownership of a connected socket and starts its threads.
  Connection(int fd, std::uint64_t id, bool outbound, std::string address, OnMessage on_message,
             OnClose on_close);
  ~Connection();
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  // False when closed. A full queue drops its oldest frame.
  bool send(Bytes frame);
  void close();

  std::uint64_t id() const { return id_; }
  bool outbound() const { return outbound_; }
  const std::string& address() const { return address_; }

 private:
  void read_loop();
  void write_loop();

  int fd_;
  std::uint64_t id_;
  bool outbound_;
  std::string address_;
  OnMessage on_message_;
  OnClose on_close_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Bytes> queue_;
  std::atomic<bool> closed_{false};
  std::thread reader_;
  std::thread writer_;
};

class Listener {
 public:
  using OnAccept = std::function<void(int fd, std::string peer_address)>;

  // Throws Error(kBindFailure).
  Listener(const std::string& host, std::uint16_t port, OnAccept on_accept);
  ~Listener();
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  std::uint16_t port() const { return port_; }
  void stop();

 private:
  int fd_;
  std::uint16_t port_;
  std::atomic<bool> stopped_{false};
  std::thread thread_;
};

// Connected socket or -1.
int dial_tcp(const std::string& host, std::uint16_t port, int timeout_ms);

}  // namespace peerperf::node
