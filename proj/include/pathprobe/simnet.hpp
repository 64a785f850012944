#pragma once

// Deterministic simulated internetwork. ASes are chains of routers joined by
// policy-typed links; requests follow valley-free routes and may meet censor
// or cache middleboxes on the way. SimTransport plugs the whole thing into
// the prober, vetting and tracer in place of real sockets.

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pathprobe/model.hpp"
#include "pathprobe/transport.hpp"

namespace pathprobe::simnet {

inline constexpr Millis kPerHopLatency{10};
inline constexpr int kDefaultPacketTtl = 64;

enum class AsRole { eyeball, transit, cloud };

struct AsNode {
  Asn asn = 0;
  AsRole role = AsRole::transit;
  int router_count = 1;
  std::vector<bool> router_responds;  // empty: every router answers ICMP
  std::vector<Ipv4> router_ips;       // empty: derived from the ASN
  std::string country;                // empty: the AS is its own region

  bool responds(int router_index) const;
  Ipv4 router_ip(int router_index) const;
};

/// Relation of `a` to `b`: a is b's customer, peer, or provider.
enum class Relation { customer_of, peer, provider_of };

struct Link {
  Asn a = 0;
  Asn b = 0;
  Relation relation = Relation::peer;
};

enum class Direction { inbound, outbound, both };
enum class CensorAction { drop, rst, blockpage };
enum class TtlCopyMode { remaining, original };

struct Censor {
  Asn asn = 0;
  int router_index = 0;
  Direction direction = Direction::both;
  std::vector<std::string> blocked_domains;   // exact host or any subdomain
  std::vector<std::string> blocked_keywords;  // case-insensitive substrings
  CensorAction action = CensorAction::rst;
  std::string signature_id;  // blockpage only
  std::string body;          // blockpage only: raw response or bare HTML
  bool ttl_copy = false;
  TtlCopyMode ttl_copy_mode = TtlCopyMode::remaining;

  /// Host header / request line trigger test, direction aside.
  bool triggers(std::string_view host, std::string_view request_line) const;
  std::string blockpage_response() const;
};

struct CacheProxy {
  Asn asn = 0;
  int router_index = 0;
};

struct HostPlacement {
  std::string id;
  Asn asn = 0;
};

class Topology {
 public:
  std::vector<AsNode> nodes;
  std::vector<Link> links;
  std::vector<Censor> censors;
  std::vector<CacheProxy> caches;
  std::vector<HostPlacement> vps;
  std::vector<HostPlacement> servers;
  std::uint64_t seed = 0;

  /// Parses the topology JSON document and runs validate(). Throws
  /// Error(topology_invalid).
  static Topology from_json_text(std::string_view text);
  static Topology load(const std::string& path);
  std::string to_json_text() const;

  /// Structural checks plus valley-free reachability from every VP to
  /// every server. Throws Error(topology_invalid).
  void validate() const;

  const AsNode* node(Asn asn) const;
  std::optional<Asn> vp_asn(const std::string& id) const;
  std::optional<Asn> server_asn(const std::string& id) const;

  /// Relation of a to b, if linked.
  std::optional<Relation> relation(Asn a, Asn b) const;
  std::vector<Asn> neighbors(Asn asn, Relation as_seen_from_asn) const;

  /// Region used for inbound/outbound decisions: country, or the AS itself.
  std::string region(Asn asn) const;
};

/// Best valley-free AS path src -> dst: customer routes over peer routes
/// over provider routes, then shorter, then lower next-hop ASN.
/// Throws Error(no_valley_free_path).
std::vector<Asn> route(const Topology& topo, Asn src, Asn dst);

/// Best path from every AS that has one, toward dst.
std::map<Asn, std::vector<Asn>> routes_to(const Topology& topo, Asn dst);

/// True iff the path climbs customer->provider links, crosses at most one
/// peer link, then only descends.
bool is_valley_free(const Topology& topo, const std::vector<Asn>& path);

struct RouterHop {
  int hop = 0;  // TTL at which this router is reached
  Asn asn = 0;
  int router_index = 0;
  Ipv4 ip;
  bool responds = true;
};

std::vector<RouterHop> hop_chain(const Topology& topo, const std::vector<Asn>& as_path);

struct Packet {
  Asn src_asn = 0;
  Asn dst_asn = 0;
  int ttl = kDefaultPacketTtl;
  std::string http_payload;
  std::string server_response;  // what the destination answers if reached
};

struct DeliveryEvent {
  enum class Kind {
    icmp_ttl_exceeded,
    injected_rst,
    injected_blockpage,
    dropped,
    delivered_to_server,
    cached_response,
  };
  enum class DropCause { none, censor, silent_router, injected_expired };

  Kind kind = Kind::dropped;
  DropCause cause = DropCause::none;
  std::optional<RouterHop> at;  // router that answered, injected or dropped
  std::string body;             // response bytes seen by the client
  int round_trip_hops = 0;      // for the latency model

  bool censored() const {
    return kind == Kind::injected_rst || kind == Kind::injected_blockpage ||
           (kind == Kind::dropped &&
            (cause == DropCause::censor || cause == DropCause::injected_expired));
  }
};

/// Per-clone mutable middlebox state: what each cache has stored by Host.
struct CacheState {
  std::map<std::pair<std::size_t, std::string>, std::string> stored;
};

/// Walks one request along its router chain. Caches act before censors at
/// the same router; the first acting middlebox decides. A reply from the
/// destination is stored by every cache it passes on the way back.
DeliveryEvent deliver(const Topology& topo, const std::vector<RouterHop>& chain,
                      const Packet& packet, CacheState& caches);
DeliveryEvent deliver(const Topology& topo, const Packet& packet, CacheState& caches);

/// Transport backed by a topology. Each vantage point owns an independent
/// clone of the middlebox state and its own logical clock, so results do
/// not depend on how vantage points are spread across worker threads.
class SimTransport : public Transport {
 public:
  explicit SimTransport(std::shared_ptr<const Topology> topo,
                        std::string sentinel_description = {});

  ExchangeResult exchange(const VantagePoint& vp, const ControlServer& server,
                          std::string_view request, Millis timeout,
                          std::optional<int> ttl) override;
  TimestampMs now_ms(const VantagePoint& vp) override;
  bool supports_ttl(const VantagePoint& vp) const override;

  const Topology& topology() const { return *topo_; }
  const std::vector<RouterHop>& chain(Asn src, Asn dst);

 private:
  struct Shard {
    std::mutex mu;
    CacheState caches;
    TimestampMs clock = 0;
  };
  Shard& shard(const std::string& vp_id);
  const std::string& server_response(const ControlServer& server);

  std::shared_ptr<const Topology> topo_;
  std::string description_;
  std::mutex mu_;
  std::map<std::string, std::unique_ptr<Shard>> shards_;
  std::map<std::string, std::string> responses_;
  std::map<std::pair<Asn, Asn>, std::vector<RouterHop>> chains_;
};

struct WhatIfEntry {
  std::string server_id;
  double censored_fraction = 0.0;
};

/// Ranks candidate servers by the fraction of `domains` censored on the
/// path from `vp`, ascending; ties by server id.
std::vector<WhatIfEntry> whatif_min_censorship(const Topology& topo,
                                               const VantagePoint& vp,
                                               const std::vector<TestDomain>& domains,
                                               const std::vector<ControlServer>& candidates);

}  // namespace pathprobe::simnet
