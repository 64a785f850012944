#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "pathprobe/model.hpp"
#include "pathprobe/transport.hpp"

namespace pathprobe::prober {

inline constexpr std::string_view kDefaultUserAgent = "pathprobe/1.0";

enum class MatchKind { substring, title_equals, redirect_location_prefix };

struct Signature {
  std::string id;
  MatchKind kind = MatchKind::substring;
  std::string pattern;
};

/// Known blockpage fingerprints, consulted in order; first match wins.
class BlockpageSignatureDB {
 public:
  BlockpageSignatureDB() = default;
  /// Throws Error(invalid_argument) on duplicate ids or empty patterns.
  explicit BlockpageSignatureDB(std::vector<Signature> entries);

  /// JSON array of {"id", "kind", "pattern"}.
  static BlockpageSignatureDB from_json_text(std::string_view text);
  static BlockpageSignatureDB load(const std::string& path);

  const std::vector<Signature>& entries() const noexcept { return entries_; }
  bool contains(std::string_view id) const;

  /// Id of the first signature matching the raw response, if any.
  std::optional<std::string> match(std::string_view raw_response) const;

 private:
  std::vector<Signature> entries_;
};

/// The exact probe bytes: GET / with the lower-cased domain as Host.
std::string build_request(const TestDomain& domain,
                          std::string_view user_agent = kDefaultUserAgent);

/// Maps one raw exchange onto an outcome. Pure: same input, same answer.
ProbeOutcome classify(const ExchangeResult& response, const ControlServer& server,
                      const BlockpageSignatureDB& db);

struct ProbeOptions {
  std::string user_agent{kDefaultUserAgent};
  int epoch = 0;
  std::string campaign_id;
};

/// One measurement with the timeout/retry policy: only Timeout outcomes are
/// retried, up to spec.max_attempts in total.
ProbeRecord probe(const ProbeSpec& spec, const BlockpageSignatureDB& db,
                  Transport& transport, const ProbeOptions& options = {});

struct MatrixPolicy {
  int per_country_cap = 80;
  int parallel = 64;
  Millis timeout = kDefaultProbeTimeout;
  int max_attempts = kDefaultMaxAttempts;
  ProbeOptions probe;
};

struct Schedule {
  std::vector<VantagePoint> scheduled;
  std::vector<std::pair<VantagePoint, std::string>> discarded;
};

/// Applies the once-per-epoch reuse rule and the per-country cap, keeping
/// offered order.
Schedule schedule_vps(const std::vector<VantagePoint>& offered, int per_country_cap);

/// Domains a vantage point probes: those scoped to its country.
std::vector<TestDomain> domains_for(const VantagePoint& vp,
                                    const std::vector<TestDomain>& domains);

using RecordSink = std::function<void(ProbeRecord)>;

/// Probes every scheduled (vp, server, domain) triple. Each vantage point's
/// triples run sequentially in server-then-domain order; up to
/// `policy.parallel` vantage points run at once. Records reach `sink` one at
/// a time, grouped by vantage point in schedule order.
Schedule run_matrix(const std::vector<VantagePoint>& vps,
                    const std::vector<ControlServer>& servers,
                    const std::vector<TestDomain>& domains, const MatrixPolicy& policy,
                    const BlockpageSignatureDB& db, Transport& transport,
                    const RecordSink& sink);

}  // namespace pathprobe::prober
