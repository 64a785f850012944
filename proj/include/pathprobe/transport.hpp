#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "pathprobe/model.hpp"

namespace pathprobe {

/// What a single request/response exchange looked like from the client side.
struct ExchangeResult {
  enum class Kind {
    response,      // bytes arrived and the connection closed or went idle
    reset,         // RST, or FIN with no payload
    timeout,       // nothing within the deadline
    ttl_exceeded,  // ICMP Time Exceeded for a TTL-limited probe
    setup_failed,  // could not open the path (proxy handshake, refused, ...)
  };

  Kind kind = Kind::timeout;
  std::string bytes;
  std::optional<Ipv4> responder;  // ICMP source, or the injecting hop if known
  Millis elapsed{0};
  std::string error;  // setup_failed only
};

/// Carries probe bytes from a vantage point to a control server. The real
/// network and simnet both implement this.
class Transport {
 public:
  virtual ~Transport() = default;

  /// Opens a fresh connection, sends `request` (with the given IP TTL when
  /// set), and collects the reply until close or `timeout`.
  virtual ExchangeResult exchange(const VantagePoint& vp,
                                  const ControlServer& server,
                                  std::string_view request, Millis timeout,
                                  std::optional<int> ttl) = 0;

  /// Clock seen by `vp`; simnet keeps one logical clock per vantage point.
  virtual TimestampMs now_ms(const VantagePoint& vp) = 0;

  virtual bool supports_ttl(const VantagePoint& vp) const = 0;
};

}  // namespace pathprobe
