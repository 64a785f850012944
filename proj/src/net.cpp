#include "pathprobe/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/ip.h>
#include <netinet/ip_icmp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

namespace pathprobe::net {

namespace {

using Clock = std::chrono::steady_clock;

class Fd {
 public:
  explicit Fd(int fd = -1) : fd_(fd) {}
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  int get() const { return fd_; }
  void reset(int fd) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = fd;
  }
  explicit operator bool() const { return fd_ >= 0; }

 private:
  int fd_;
};

int remaining_ms(Clock::time_point deadline) {
  auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now()).count();
  return left < 0 ? 0 : static_cast<int>(left);
}

bool send_all(int fd, std::string_view data, Clock::time_point deadline) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    pollfd p{fd, POLLOUT, 0};
    if (::poll(&p, 1, remaining_ms(deadline)) <= 0) return false;
    ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && (errno == EAGAIN || errno == EINTR)) continue;
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

bool recv_exact(int fd, unsigned char* buf, std::size_t len, Clock::time_point deadline) {
  std::size_t got = 0;
  while (got < len) {
    pollfd p{fd, POLLIN, 0};
    if (::poll(&p, 1, remaining_ms(deadline)) <= 0) return false;
    ssize_t n = ::recv(fd, buf + got, len - got, 0);
    if (n < 0 && (errno == EAGAIN || errno == EINTR)) continue;
    if (n <= 0) return false;
    got += static_cast<std::size_t>(n);
  }
  return true;
}

enum class ConnectStatus { ok, refused, timeout, failed };

ConnectStatus connect_to(int fd, std::uint32_t ip_host_order, std::uint16_t port,
                         Clock::time_point deadline, std::string& error) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = htonl(ip_host_order);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0) {
    return ConnectStatus::ok;
  }
  if (errno != EINPROGRESS) {
    error = std::strerror(errno);
    return errno == ECONNREFUSED ? ConnectStatus::refused : ConnectStatus::failed;
  }
  pollfd p{fd, POLLOUT, 0};
  if (::poll(&p, 1, remaining_ms(deadline)) <= 0) return ConnectStatus::timeout;
  int err = 0;
  socklen_t len = sizeof err;
  ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
  if (err == 0) return ConnectStatus::ok;
  error = std::strerror(err);
  if (err == ETIMEDOUT) return ConnectStatus::timeout;
  return err == ECONNREFUSED ? ConnectStatus::refused : ConnectStatus::failed;
}

std::optional<std::uint32_t> resolve_ipv4(const std::string& host) {
  if (auto ip = Ipv4::parse(host)) return ip->value();
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || !res) return std::nullopt;
  auto ip = ntohl(reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr.s_addr);
  ::freeaddrinfo(res);
  return ip;
}

/// An ICMP Time Exceeded quoting our TCP segment, if one is waiting.
std::optional<Ipv4> read_time_exceeded(int raw_fd, std::uint32_t dst, std::uint16_t sport) {
  unsigned char buf[1500];
  ssize_t n = ::recv(raw_fd, buf, sizeof buf, MSG_DONTWAIT);
  if (n < static_cast<ssize_t>(sizeof(iphdr))) return std::nullopt;
  const auto* outer = reinterpret_cast<const iphdr*>(buf);
  const std::size_t outer_len = outer->ihl * 4u;
  if (static_cast<std::size_t>(n) < outer_len + 8 + sizeof(iphdr) + 4) return std::nullopt;
  const auto* icmp = reinterpret_cast<const icmphdr*>(buf + outer_len);
  if (icmp->type != ICMP_TIME_EXCEEDED) return std::nullopt;
  const auto* inner = reinterpret_cast<const iphdr*>(buf + outer_len + 8);
  const std::size_t inner_len = inner->ihl * 4u;
  if (static_cast<std::size_t>(n) < outer_len + 8 + inner_len + 4) return std::nullopt;
  if (inner->protocol != IPPROTO_TCP || ntohl(inner->daddr) != dst) return std::nullopt;
  std::uint16_t quoted_sport = 0;
  std::memcpy(&quoted_sport, buf + outer_len + 8 + inner_len, 2);
  if (ntohs(quoted_sport) != sport) return std::nullopt;
  return Ipv4(ntohl(outer->saddr));
}

}  // namespace

std::string socks5_connect(int fd, Ipv4 target, std::uint16_t port,
                           const std::optional<Socks5Credentials>& credentials,
                           Millis timeout) {
  const auto deadline = Clock::now() + timeout;
  std::string greeting = credentials ? std::string("\x05\x02\x00\x02", 4)
                                     : std::string("\x05\x01\x00", 3);
  if (!send_all(fd, greeting, deadline)) return "socks5: greeting not sent";
  unsigned char choice[2];
  if (!recv_exact(fd, choice, 2, deadline)) return "socks5: no method selection";
  if (choice[0] != 0x05) return "socks5: bad version in method selection";
  if (choice[1] == 0x02) {
    if (!credentials) return "socks5: proxy demands credentials";
    const auto& c = *credentials;
    if (c.username.size() > 255 || c.password.size() > 255) {
      return "socks5: credentials too long";
    }
    std::string auth;
    auth += '\x01';
    auth += static_cast<char>(c.username.size());
    auth += c.username;
    auth += static_cast<char>(c.password.size());
    auth += c.password;
    if (!send_all(fd, auth, deadline)) return "socks5: auth not sent";
    unsigned char status[2];
    if (!recv_exact(fd, status, 2, deadline)) return "socks5: no auth reply";
    if (status[1] != 0x00) return "socks5: authentication rejected";
  } else if (choice[1] != 0x00) {
    return "socks5: no acceptable auth method";
  }

  std::string req("\x05\x01\x00\x01", 4);
  const std::uint32_t ip = target.value();
  req += static_cast<char>((ip >> 24) & 0xff);
  req += static_cast<char>((ip >> 16) & 0xff);
  req += static_cast<char>((ip >> 8) & 0xff);
  req += static_cast<char>(ip & 0xff);
  req += static_cast<char>((port >> 8) & 0xff);
  req += static_cast<char>(port & 0xff);
  if (!send_all(fd, req, deadline)) return "socks5: connect request not sent";
  unsigned char head[4];
  if (!recv_exact(fd, head, 4, deadline)) return "socks5: no connect reply";
  if (head[0] != 0x05) return "socks5: bad version in connect reply";
  if (head[1] != 0x00) return "socks5: connect failed with code " + std::to_string(head[1]);
  std::size_t rest = 0;
  switch (head[3]) {
    case 0x01: rest = 4 + 2; break;
    case 0x04: rest = 16 + 2; break;
    case 0x03: {
      unsigned char len = 0;
      if (!recv_exact(fd, &len, 1, deadline)) return "socks5: truncated bind address";
      rest = len + 2u;
      break;
    }
    default: return "socks5: unknown address type in reply";
  }
  unsigned char skip[260];
  if (!recv_exact(fd, skip, rest, deadline)) return "socks5: truncated connect reply";
  return {};
}

NetTransport::NetTransport() {
  int fd = ::socket(AF_INET, SOCK_RAW | SOCK_CLOEXEC, IPPROTO_ICMP);
  if (fd >= 0) {
    icmp_probe_ok_ = true;
    ::close(fd);
  }
}

NetTransport::~NetTransport() = default;

ExchangeResult NetTransport::exchange(const VantagePoint& vp, const ControlServer& server,
                                      std::string_view request, Millis timeout,
                                      std::optional<int> ttl) {
  const auto start = Clock::now();
  const auto deadline = start + timeout;
  ExchangeResult res;
  auto finish = [&](ExchangeResult::Kind kind) {
    res.kind = kind;
    res.elapsed = std::chrono::duration_cast<Millis>(Clock::now() - start);
    return res;
  };

  Fd fd(::socket(AF_INET, SOCK_STREAM | SOCK_NONBLOCK | SOCK_CLOEXEC, 0));
  if (!fd) {
    res.error = std::strerror(errno);
    return finish(ExchangeResult::Kind::setup_failed);
  }

  std::string error;
  const auto* socks = std::get_if<Socks5Access>(&vp.access);
  std::uint32_t connect_ip = server.address.value();
  std::uint16_t connect_port = server.port;
  if (socks) {
    auto proxy = resolve_ipv4(socks->host);
    if (!proxy) {
      res.error = "cannot resolve proxy " + socks->host;
      return finish(ExchangeResult::Kind::setup_failed);
    }
    connect_ip = *proxy;
    connect_port = socks->port;
  }
  switch (connect_to(fd.get(), connect_ip, connect_port, deadline, error)) {
    case ConnectStatus::ok: break;
    case ConnectStatus::timeout: return finish(ExchangeResult::Kind::timeout);
    case ConnectStatus::refused:
    case ConnectStatus::failed:
      res.error = socks ? "proxy connect: " + error : error;
      return finish(ExchangeResult::Kind::setup_failed);
  }
  if (socks) {
    error = socks5_connect(fd.get(), server.address, server.port, socks->credentials,
                           Millis(remaining_ms(deadline)));
    if (!error.empty()) {
      res.error = error;
      return finish(ExchangeResult::Kind::setup_failed);
    }
  }

  Fd raw;
  std::uint16_t local_port = 0;
  if (ttl && !socks) {
    // The handshake went out with the default TTL; only the request is limited.
    int t = *ttl;
    ::setsockopt(fd.get(), IPPROTO_IP, IP_TTL, &t, sizeof t);
    if (icmp_probe_ok_) {
      raw.reset(::socket(AF_INET, SOCK_RAW | SOCK_CLOEXEC, IPPROTO_ICMP));
      sockaddr_in local{};
      socklen_t len = sizeof local;
      ::getsockname(fd.get(), reinterpret_cast<sockaddr*>(&local), &len);
      local_port = ntohs(local.sin_port);
    }
  }

  if (!send_all(fd.get(), request, deadline)) {
    if (errno == ECONNRESET || errno == EPIPE) return finish(ExchangeResult::Kind::reset);
    return finish(ExchangeResult::Kind::timeout);
  }

  char chunk[4096];
  for (;;) {
    pollfd fds[2] = {{fd.get(), POLLIN, 0}, {raw.get(), POLLIN, 0}};
    const nfds_t nfds = raw ? 2 : 1;
    int ready = ::poll(fds, nfds, remaining_ms(deadline));
    if (ready < 0 && errno == EINTR) continue;
    if (ready <= 0) {
      return finish(res.bytes.empty() ? ExchangeResult::Kind::timeout
                                       : ExchangeResult::Kind::response);
    }
    if (raw && (fds[1].revents & POLLIN)) {
      if (auto hop = read_time_exceeded(raw.get(), server.address.value(), local_port)) {
        res.responder = *hop;
        return finish(ExchangeResult::Kind::ttl_exceeded);
      }
    }
    if (fds[0].revents & (POLLIN | POLLERR | POLLHUP)) {
      ssize_t n = ::recv(fd.get(), chunk, sizeof chunk, 0);
      if (n > 0) {
        res.bytes.append(chunk, static_cast<std::size_t>(n));
        continue;
      }
      if (n < 0 && (errno == EAGAIN || errno == EINTR)) continue;
      // A FIN or RST with nothing before it is a teardown.
      if (res.bytes.empty()) return finish(ExchangeResult::Kind::reset);
      return finish(ExchangeResult::Kind::response);
    }
  }
}

TimestampMs NetTransport::now_ms(const VantagePoint&) {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

bool NetTransport::supports_ttl(const VantagePoint& vp) const { return !vp.via_socks(); }

}  // namespace pathprobe::net
