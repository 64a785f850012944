#pragma once

// Core measurement types shared by every pathprobe module. Nothing in here
// performs I/O; wire encodings live in codec.hpp.

#include <chrono>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pathprobe {

using Asn = std::uint32_t;
using Millis = std::chrono::milliseconds;

/// Milliseconds since the Unix epoch on the real network, or since the start
/// of the simulated clock under simnet.
using TimestampMs = std::int64_t;

class Ipv4 {
 public:
  constexpr Ipv4() = default;
  constexpr explicit Ipv4(std::uint32_t host_order) : value_(host_order) {}

  static std::optional<Ipv4> parse(std::string_view text);

  constexpr std::uint32_t value() const noexcept { return value_; }
  std::string str() const;

  friend constexpr auto operator<=>(Ipv4, Ipv4) = default;

 private:
  std::uint32_t value_ = 0;
};

bool is_valid_hostname(std::string_view name);
bool is_known_country(std::string_view code);
bool is_sentinel_token(std::string_view token);

struct TestDomain {
  std::string name;
  std::string country_scope;

  friend bool operator==(const TestDomain&, const TestDomain&) = default;
};

struct Socks5Credentials {
  std::string username;
  std::string password;

  friend bool operator==(const Socks5Credentials&, const Socks5Credentials&) = default;
};

struct DirectAccess {
  friend bool operator==(const DirectAccess&, const DirectAccess&) = default;
};

struct Socks5Access {
  std::string host;
  std::uint16_t port = 1080;
  std::optional<Socks5Credentials> credentials;

  friend bool operator==(const Socks5Access&, const Socks5Access&) = default;
};

using Access = std::variant<DirectAccess, Socks5Access>;

struct VantagePoint {
  std::string id;
  Ipv4 address;
  std::string country;
  Asn asn = 0;
  Access access = DirectAccess{};

  bool via_socks() const noexcept {
    return std::holds_alternative<Socks5Access>(access);
  }

  friend bool operator==(const VantagePoint&, const VantagePoint&) = default;
};

struct ControlServer {
  std::string id;
  Ipv4 address;
  std::uint16_t port = 80;
  std::string platform;
  std::string region;
  std::string sentinel_token;

  friend bool operator==(const ControlServer&, const ControlServer&) = default;
};

inline constexpr Millis kDefaultProbeTimeout{5000};
inline constexpr int kDefaultMaxAttempts = 5;  // 1 initial + 4 retries

struct ProbeSpec {
  VantagePoint vp;
  ControlServer server;
  TestDomain domain;
  Millis timeout = kDefaultProbeTimeout;
  int max_attempts = kDefaultMaxAttempts;

  friend bool operator==(const ProbeSpec&, const ProbeSpec&) = default;
};

namespace outcome {

struct Sentinel {
  friend bool operator==(const Sentinel&, const Sentinel&) = default;
};
struct Blockpage {
  std::string signature_id;
  friend bool operator==(const Blockpage&, const Blockpage&) = default;
};
struct Reset {
  friend bool operator==(const Reset&, const Reset&) = default;
};
struct Timeout {
  friend bool operator==(const Timeout&, const Timeout&) = default;
};
struct OtherPayload {
  std::string body_digest;  // sha-256, 64 lowercase hex chars
  std::optional<std::string> title;
  friend bool operator==(const OtherPayload&, const OtherPayload&) = default;
};

}  // namespace outcome

using ProbeOutcome = std::variant<outcome::Sentinel, outcome::Blockpage,
                                  outcome::Reset, outcome::Timeout,
                                  outcome::OtherPayload>;

template <typename T>
bool is(const ProbeOutcome& o) {
  return std::holds_alternative<T>(o);
}

std::string describe(const ProbeOutcome& o);

enum class MechanismKind { drop, reset, blockpage };

struct Mechanism {
  MechanismKind kind = MechanismKind::drop;
  std::string signature_id;  // blockpage only

  static Mechanism drop() { return {MechanismKind::drop, {}}; }
  static Mechanism reset() { return {MechanismKind::reset, {}}; }
  static Mechanism blockpage(std::string id) {
    return {MechanismKind::blockpage, std::move(id)};
  }

  friend bool operator==(const Mechanism&, const Mechanism&) = default;
};

std::string describe(const Mechanism& m);

struct Verdict {
  enum class Kind { uncensored, censored, anomalous };

  Kind kind = Kind::uncensored;
  std::optional<Mechanism> mechanism;  // set iff censored

  static Verdict uncensored() { return {Kind::uncensored, std::nullopt}; }
  static Verdict censored(Mechanism m) { return {Kind::censored, std::move(m)}; }
  static Verdict anomalous() { return {Kind::anomalous, std::nullopt}; }

  bool is_censored() const noexcept { return kind == Kind::censored; }

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

std::string describe(const Verdict& v);

/// Verdict implied by a record's terminal outcome. A Timeout maps to
/// Censored(Drop) only when every allowed attempt timed out.
Verdict verdict_for(const ProbeOutcome& final_outcome, int attempts,
                    int max_attempts);

struct Attempt {
  ProbeOutcome outcome;
  std::optional<Millis> rtt;

  friend bool operator==(const Attempt&, const Attempt&) = default;
};

namespace flag {
inline constexpr std::string_view kInconclusive = "inconclusive";
inline constexpr std::string_view kTransportError = "transport_error";
inline constexpr std::string_view kExcludedCacheOnline = "excluded:cache_online";
inline constexpr std::string_view kExcludedCacheOffline = "excluded:cache_offline";
}  // namespace flag

struct ProbeRecord {
  ProbeSpec spec;
  std::vector<Attempt> attempts;
  ProbeOutcome final_outcome = outcome::Timeout{};
  Verdict verdict;
  TimestampMs started_at = 0;
  TimestampMs ended_at = 0;
  int epoch = 0;
  std::string campaign_id;
  std::vector<std::string> flags;

  bool has_flag(std::string_view f) const;
  bool inconclusive() const { return has_flag(flag::kInconclusive); }

  friend bool operator==(const ProbeRecord&, const ProbeRecord&) = default;
};

/// Shape check of a single record: attempt count bounds, all non-final
/// attempts Timeout, final outcome equals the last attempt, verdict agrees.
std::vector<std::string> check_record(const ProbeRecord& r);

struct Responder {
  Ipv4 ip;
  std::optional<Asn> asn;
  std::string label;

  friend bool operator==(const Responder&, const Responder&) = default;
};

enum class HopSignal { ttl_exceeded, silent, censor_sign, sentinel_reached };

struct TraceHop {
  int ttl = 1;
  std::optional<Responder> responder;  // nullopt: nothing identified the hop
  HopSignal signal = HopSignal::silent;
  std::optional<Mechanism> mechanism;  // censor_sign only

  bool terminal() const noexcept {
    return signal == HopSignal::censor_sign ||
           signal == HopSignal::sentinel_reached;
  }

  friend bool operator==(const TraceHop&, const TraceHop&) = default;
};

struct TraceTerminal {
  enum class Kind { sentinel, censored, exhausted };
  Kind kind = Kind::exhausted;
  std::optional<Mechanism> mechanism;

  friend bool operator==(const TraceTerminal&, const TraceTerminal&) = default;
};

struct TraceResult {
  ProbeSpec spec;
  std::vector<TraceHop> hops;
  std::optional<int> censor_hop;
  TraceTerminal terminal;

  friend bool operator==(const TraceResult&, const TraceResult&) = default;
};

std::vector<std::string> check_trace(const TraceResult& t);

enum class ExclusionReason { cache_online, cache_offline };

std::string_view to_string(ExclusionReason r);

struct Dataset {
  std::vector<ProbeRecord> records;
  std::map<std::string, ExclusionReason> excluded_vps;
  std::vector<ControlServer> servers;
  std::vector<VantagePoint> vps;
  std::vector<TestDomain> domains;

  bool excluded(const std::string& vp_id) const {
    return excluded_vps.contains(vp_id);
  }

  /// Rebuilds the catalogs and exclusion map from the records themselves.
  static Dataset from_records(std::vector<ProbeRecord> records);

  /// Catalog-reference violations (records naming unknown ids).
  std::vector<std::string> check() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SocksEndpointSource {
  std::string endpoint;
  std::optional<Socks5Credentials> credentials;
};

struct CampaignCaps {
  int per_country_per_epoch = 80;
};

struct ProbeSettings {
  Millis timeout = kDefaultProbeTimeout;
  int max_attempts = kDefaultMaxAttempts;
  int parallel = 64;
  std::string user_agent = "pathprobe/1.0";
};

struct TracerouteSettings {
  int max_ttl = 40;
  Millis per_hop_timeout{2000};
};

struct ReferenceServerPair {
  TestDomain shared_domain;
  ControlServer server_a;
  ControlServer server_b;
};

struct SentinelSettings {
  std::string description =
      "This server is part of an Internet path-diversity measurement. "
      "It answers every HTTP request with this fixed page.";
  std::string bind = "0.0.0.0";
  std::optional<std::uint16_t> port;  // defaults to the server's own port
  std::string log_dir = ".";
};

struct VettingSettings {
  int min_clean_vps = 50;
  std::vector<VantagePoint> clean_vps;
};

struct CampaignConfig {
  std::string campaign_id;
  std::optional<std::uint64_t> seed;
  std::vector<ControlServer> servers;
  std::vector<VantagePoint> vps;
  std::vector<TestDomain> domains;
  std::optional<ReferenceServerPair> reference_pair;
  std::string legit_titles_path;
  std::string signature_db_path;
  CampaignCaps caps;
  ProbeSettings probe;
  TracerouteSettings traceroute;
  SentinelSettings sentinel;
  VettingSettings vetting;
};

/// Invariant violations across the campaign catalogs. Empty iff clean.
std::vector<std::string> validate_campaign(const CampaignConfig& config);

}  // namespace pathprobe
