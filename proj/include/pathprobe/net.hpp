#pragma once

// Transport over real sockets: direct TCP from this host, or a SOCKS5
// proxy (RFC 1928, with RFC 1929 username/password when configured).

#include <cstdint>
#include <optional>
#include <string>

#include "pathprobe/transport.hpp"

namespace pathprobe::net {

class NetTransport : public Transport {
 public:
  NetTransport();
  ~NetTransport() override;
  NetTransport(const NetTransport&) = delete;
  NetTransport& operator=(const NetTransport&) = delete;

  ExchangeResult exchange(const VantagePoint& vp, const ControlServer& server,
                          std::string_view request, Millis timeout,
                          std::optional<int> ttl) override;
  TimestampMs now_ms(const VantagePoint& vp) override;
  bool supports_ttl(const VantagePoint& vp) const override;

  /// Whether ICMP Time Exceeded can be observed (needs a raw socket).
  bool icmp_capture() const noexcept { return icmp_probe_ok_; }

 private:
  bool icmp_probe_ok_ = false;
};

/// Performs the SOCKS5 greeting, optional authentication and CONNECT on an
/// already connected socket. Returns an error message, empty on success.
std::string socks5_connect(int fd, Ipv4 target, std::uint16_t port,
                           const std::optional<Socks5Credentials>& credentials,
                           Millis timeout);

}  // namespace pathprobe::net
