#include "peerperf/node/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <spdlog/spdlog.h>

#include "peerperf/error.hpp"

namespace peerperf::node {

Connection::Connection(int fd, std::uint64_t id, bool outbound, std::string address,
                       OnMessage on_message, OnClose on_close)
    : fd_(fd),
      id_(id),
      outbound_(outbound),
      address_(std::move(address)),
      on_message_(std::move(on_message)),
      on_close_(std::move(on_close)) {
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  reader_ = std::thread([this] { read_loop(); });
  writer_ = std::thread([this] { write_loop(); });
}

Connection::~Connection() {
  close();
  if (reader_.joinable()) reader_.join();
  if (writer_.joinable()) writer_.join();
  ::close(fd_);
}

bool Connection::send(Bytes frame) {
  std::lock_guard lock(mu_);
  if (closed_) return false;
  if (queue_.size() >= kMaxQueuedFrames) {
    spdlog::warn("connection {}: outbound queue full, dropping oldest frame", address_);
    queue_.pop_front();
  }
  queue_.push_back(std::move(frame));
  cv_.notify_one();
  return true;
}

void Connection::close() {
  {
    std::lock_guard lock(mu_);
    if (closed_.exchange(true)) return;
    cv_.notify_all();
  }
  ::shutdown(fd_, SHUT_RDWR);
}

void Connection::read_loop() {
  protocol::FrameDecoder decoder;
  std::string reason = "closed by peer";
  std::uint8_t buf[64 * 1024];
  try {
    for (;;) {
      auto n = ::recv(fd_, buf, sizeof buf, 0);
      if (n == 0) break;
      if (n < 0) {
        if (errno == EINTR) continue;
        reason = std::strerror(errno);
        break;
      }
      decoder.feed(ByteView(buf, static_cast<std::size_t>(n)));
      while (auto body = decoder.next()) on_message_(id_, protocol::decode_message(*body));
    }
  } catch (const Error& e) {
    reason = e.what();
  }
  if (closed_) reason = "closed locally";
  close();
  on_close_(id_, reason);
}

void Connection::write_loop() {
  for (;;) {
    Bytes frame;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return closed_ || !queue_.empty(); });
      if (closed_) return;
      frame = std::move(queue_.front());
      queue_.pop_front();
    }
    std::size_t off = 0;
    while (off < frame.size()) {
      auto n = ::send(fd_, frame.data() + off, frame.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        close();
        return;
      }
      off += static_cast<std::size_t>(n);
    }
  }
}

namespace {

addrinfo* resolve(const std::string& host, std::uint16_t port, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  auto service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0) return nullptr;
  return res;
}

}  // namespace

Listener::Listener(const std::string& host, std::uint16_t port, OnAccept on_accept) {
  auto* res = resolve(host, port, true);
  if (!res) throw Error(ErrorCode::kBindFailure, "cannot resolve " + host);
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (fd_ < 0 || ::bind(fd_, res->ai_addr, res->ai_addrlen) != 0 || ::listen(fd_, 64) != 0) {
    std::string why = std::strerror(errno);
    ::freeaddrinfo(res);
    if (fd_ >= 0) ::close(fd_);
    throw Error(ErrorCode::kBindFailure, host + ":" + std::to_string(port) + ": " + why);
  }
  ::freeaddrinfo(res);
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
  thread_ = std::thread([this, on_accept = std::move(on_accept)] {
    while (!stopped_) {
      pollfd p{fd_, POLLIN, 0};
      if (::poll(&p, 1, 100) <= 0) continue;
      sockaddr_in peer{};
      socklen_t plen = sizeof peer;
      int c = ::accept(fd_, reinterpret_cast<sockaddr*>(&peer), &plen);
      if (c < 0) continue;
      char ip[INET_ADDRSTRLEN] = {};
      ::inet_ntop(AF_INET, &peer.sin_addr, ip, sizeof ip);
      on_accept(c, std::string(ip) + ":" + std::to_string(ntohs(peer.sin_port)));
    }
  });
}

Listener::~Listener() {
  stop();
  ::close(fd_);
}

void Listener::stop() {
  if (stopped_.exchange(true)) return;
  if (thread_.joinable()) thread_.join();
}

int dial_tcp(const std::string& host, std::uint16_t port, int timeout_ms) {
  auto* res = resolve(host, port, false);
  if (!res) return -1;
  int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    return -1;
  }
  int flags = ::fcntl(fd, F_GETFL, 0);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(fd, res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (rc != 0 && errno != EINPROGRESS) {
    ::close(fd);
    return -1;
  }
  if (rc != 0) {
    pollfd p{fd, POLLOUT, 0};
    int err = 0;
    socklen_t len = sizeof err;
    if (::poll(&p, 1, timeout_ms) != 1 || ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len) != 0 || err != 0) {
      ::close(fd);
      return -1;
    }
  }
  ::fcntl(fd, F_SETFL, flags);
  return fd;
}

}  // namespace peerperf::node
