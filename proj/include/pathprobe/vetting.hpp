#pragma once

// Vantage-point hygiene run around a campaign: the online two-server cache
// test, the offline landing-page title check, and certification that no
// censor sits in front of the control servers themselves.

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pathprobe/model.hpp"
#include "pathprobe/prober.hpp"
#include "pathprobe/transport.hpp"

namespace pathprobe::vetting {

struct CacheTestResult {
  std::string vp_id;
  bool keep = false;
  std::string reason;  // set when excluded
};

struct CacheTestOptions {
  Millis timeout = kDefaultProbeTimeout;
  int max_attempts = kDefaultMaxAttempts;
  std::string user_agent{prober::kDefaultUserAgent};
};

/// Probes server_a then server_b for the shared domain, each on a fresh
/// connection. Keeps the VP only when the second reply carries token_b.
CacheTestResult cache_test(const VantagePoint& vp, const ReferenceServerPair& pair,
                           Transport& transport, const CacheTestOptions& options = {});

/// cache_test over many VPs, `parallel` at a time; results in input order.
std::vector<CacheTestResult> cache_test_all(const std::vector<VantagePoint>& vps,
                                            const ReferenceServerPair& pair,
                                            Transport& transport,
                                            const CacheTestOptions& options, int parallel);

/// Domain name to canonical landing-page title.
class LegitTitleTable {
 public:
  LegitTitleTable() = default;
  explicit LegitTitleTable(std::map<std::string, std::string> titles);

  /// JSON object {domain: title}.
  static LegitTitleTable from_json_text(std::string_view text);
  static LegitTitleTable load(const std::string& path);

  const std::string* find(const std::string& domain) const;
  std::size_t size() const noexcept { return titles_.size(); }

 private:
  std::map<std::string, std::string> titles_;
};

/// VPs with any OtherPayload whose title equals the domain's legit title.
std::set<std::string> offline_cache_check(const Dataset& dataset, const LegitTitleTable& table);

using DomainPicker = std::function<std::vector<TestDomain>(const VantagePoint&)>;

/// Picks the domains that are not scoped to the VP's own country.
DomainPicker uncensored_for_country(std::vector<TestDomain> domains);

struct InboundFailure {
  std::string vp_id;
  std::string server_id;
  std::string domain;
  ProbeOutcome outcome;
};

struct ServerInboundStatus {
  std::string server_id;
  bool pass = true;
  int probes = 0;
};

struct InboundReport {
  std::vector<ServerInboundStatus> servers;
  std::vector<InboundFailure> failures;

  bool all_pass() const;
  std::vector<std::string> failing_servers() const;
};

struct InboundOptions {
  int min_clean_vps = 50;
  prober::MatrixPolicy policy;
};

/// Probes every server from every clean VP. A server passes iff all of its
/// probes come back Sentinel. Throws Error(insufficient_evidence) when there
/// are fewer than max(1, min_clean_vps) clean VPs or nothing to probe.
InboundReport verify_inbound_clean(const std::vector<VantagePoint>& clean_vps,
                                   const std::vector<ControlServer>& servers,
                                   const DomainPicker& picker, Transport& transport,
                                   const prober::BlockpageSignatureDB& db,
                                   const InboundOptions& options = {});

}  // namespace pathprobe::vetting
