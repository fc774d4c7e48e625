#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <deque>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bbrtune/agents/wire.hpp"

namespace bbrtune::agents {

using Frame = std::vector<std::uint8_t>;

// One end of a bidirectional, FIFO, frame-oriented link.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual void send(const Frame& f) = 0;
  // Next whole frame, or nullopt if none is available.
  virtual std::optional<Frame> receive() = 0;
};

class MemoryChannel : public Channel {
 public:
  using Queue = std::deque<Frame>;
  MemoryChannel(std::shared_ptr<Queue> in, std::shared_ptr<Queue> out) : in_(std::move(in)), out_(std::move(out)) {}

  void send(const Frame& f) override { out_->push_back(f); }
  std::optional<Frame> receive() override {
    if (in_->empty()) return std::nullopt;
    Frame f = std::move(in_->front());
    in_->pop_front();
    return f;
  }

 private:
  std::shared_ptr<Queue> in_, out_;
};

inline std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> memory_pair() {
  auto a = std::make_shared<MemoryChannel::Queue>();
  auto b = std::make_shared<MemoryChannel::Queue>();
  return {std::make_unique<MemoryChannel>(a, b), std::make_unique<MemoryChannel>(b, a)};
}

// Blocking TCP stream carrying the same length-prefixed frames.
class TcpChannel : public Channel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  ~TcpChannel() override {
    if (fd_ >= 0) ::close(fd_);
  }
  TcpChannel(const TcpChannel&) = delete;
  TcpChannel& operator=(const TcpChannel&) = delete;

  static std::unique_ptr<TcpChannel> connect(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
      throw std::runtime_error("cannot resolve " + host);
    const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0 || ::connect(fd, res->ai_addr, res->ai_addrlen) != 0) {
      ::freeaddrinfo(res);
      if (fd >= 0) ::close(fd);
      throw std::runtime_error("cannot connect to " + host + ":" + std::to_string(port) + ": " + std::strerror(errno));
    }
    ::freeaddrinfo(res);
    return std::make_unique<TcpChannel>(fd);
  }

  void send(const Frame& f) override {
    std::size_t off = 0;
    while (off < f.size()) {
      const auto n = ::send(fd_, f.data() + off, f.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw std::runtime_error(std::string("tcp send failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::optional<Frame> receive() override {
    for (;;) {
      if (const std::size_t len = frame_length(buf_.data(), buf_.size())) {
        Frame f(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(len));
        buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(len));
        return f;
      }
      std::uint8_t tmp[4096];
      const auto n = ::recv(fd_, tmp, sizeof(tmp), 0);
      if (n == 0) return std::nullopt;
      if (n < 0) {
        if (errno == EINTR) continue;
        throw std::runtime_error(std::string("tcp recv failed: ") + std::strerror(errno));
      }
      buf_.insert(buf_.end(), tmp, tmp + n);
    }
  }

 private:
  int fd_;
  std::vector<std::uint8_t> buf_;
};

class TcpListener {
 public:
  // Port 0 picks a free port.
  explicit TcpListener(const std::string& host = "127.0.0.1", std::uint16_t port = 0) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw std::runtime_error("socket() failed");
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &a.sin_addr) != 1) throw std::runtime_error("bad listen address " + host);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&a), sizeof(a)) != 0 || ::listen(fd_, 16) != 0) {
      ::close(fd_);
      throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port) + ": " + std::strerror(errno));
    }
    socklen_t len = sizeof(a);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&a), &len);
    port_ = ntohs(a.sin_port);
  }
  ~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
  }
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  std::unique_ptr<TcpChannel> accept() {
    const int c = ::accept(fd_, nullptr, nullptr);
    if (c < 0) throw std::runtime_error(std::string("accept failed: ") + std::strerror(errno));
    return std::make_unique<TcpChannel>(c);
  }

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

// Loopback pair for in-process use: connect() completes against the backlog
// before accept() runs, so one thread suffices.
inline std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> tcp_pair(const std::string& host = "127.0.0.1",
                                                                              std::uint16_t port = 0) {
  TcpListener l(host, port);
  auto client = TcpChannel::connect(host, l.port());
  auto server = l.accept();
  return {std::move(client), std::move(server)};
}

}  // namespace bbrtune::agents
