#pragma once

// Application-layer traceroute: the censor-triggering request is re-sent with
// IP TTL 1, 2, ... and each reply tells how far the request travelled.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pathprobe/model.hpp"
#include "pathprobe/prober.hpp"
#include "pathprobe/transport.hpp"

namespace pathprobe::tracer {

inline constexpr int kMaxTtlLimit = 64;

struct TraceOptions {
  Millis per_hop_timeout{2000};
  int retries_per_hop = 1;  // extra tries before a hop is Silent
  std::string user_agent{prober::kDefaultUserAgent};
};

/// Throws Error(unsupported_transport) for SOCKS VPs or transports that
/// cannot set the TTL, Error(invalid_argument) for max_ttl outside [1, 64].
TraceResult app_traceroute(const ProbeSpec& spec, int max_ttl, Transport& transport,
                           const prober::BlockpageSignatureDB& db,
                           const TraceOptions& options = {});

/// Longest-prefix IPv4 to ASN map.
class IpAsnTable {
 public:
  struct Entry {
    Asn asn = 0;
    std::string label;
  };

  /// Lines of `<a.b.c.d/len> <asn> [label...]`; '#' starts a comment.
  static IpAsnTable from_text(std::string_view text);
  static IpAsnTable load(const std::string& path);

  void add(Ipv4 prefix, int length, Entry entry);
  std::optional<Entry> lookup(Ipv4 ip) const;
  std::size_t size() const noexcept { return count_; }

 private:
  // One hash map per prefix length, keyed by the masked address.
  std::array<std::unordered_map<std::uint32_t, Entry>, 33> by_length_;
  std::size_t count_ = 0;
};

/// Fills responder asn/label from the table; unmapped responders keep an
/// empty asn.
TraceResult annotate_asn(TraceResult result, const IpAsnTable& table);

enum class TableFormat { text, csv };

/// One row per ttl, one column per trace ordered by platform, region and
/// server id. Silent hops print `*`, the censor hop `Censor: <ip>`.
std::string render_trace_table(const std::vector<TraceResult>& results,
                               TableFormat format = TableFormat::text);

}  // namespace pathprobe::tracer
