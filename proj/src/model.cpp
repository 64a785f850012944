#include "pathprobe/model.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <array>
#include <set>

#include "pathprobe/error.hpp"

namespace pathprobe {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::body_too_large: return "body-too-large";
    case ErrorCode::bind_failure: return "bind-failure";
    case ErrorCode::config_invalid: return "config-invalid";
    case ErrorCode::io_error: return "io-error";
    case ErrorCode::unsupported_transport: return "unsupported-transport";
    case ErrorCode::insufficient_evidence: return "insufficient-evidence";
    case ErrorCode::unknown_country: return "unknown-country";
    case ErrorCode::no_valley_free_path: return "no-valley-free-path";
    case ErrorCode::too_few_columns: return "too-few-columns";
    case ErrorCode::empty_input: return "empty-input";
    case ErrorCode::schema_mismatch: return "schema-mismatch";
    case ErrorCode::no_records: return "no-records";
    case ErrorCode::topology_invalid: return "topology-invalid";
  }
  return "unknown";
}

std::optional<Ipv4> Ipv4::parse(std::string_view text) {
  if (text.empty() || text.size() > 15) return std::nullopt;
  std::string buf(text);
  in_addr addr{};
  if (inet_pton(AF_INET, buf.c_str(), &addr) != 1) return std::nullopt;
  return Ipv4(ntohl(addr.s_addr));
}

std::string Ipv4::str() const {
  return std::to_string((value_ >> 24) & 0xff) + "." +
         std::to_string((value_ >> 16) & 0xff) + "." +
         std::to_string((value_ >> 8) & 0xff) + "." +
         std::to_string(value_ & 0xff);
}

bool is_valid_hostname(std::string_view name) {
  if (name.empty() || name.size() > 253) return false;
  if (name.back() == '.') name.remove_suffix(1);
  std::size_t start = 0;
  while (start <= name.size()) {
    auto dot = name.find('.', start);
    if (dot == std::string_view::npos) dot = name.size();
    auto label = name.substr(start, dot - start);
    if (label.empty() || label.size() > 63) return false;
    if (label.front() == '-' || label.back() == '-') return false;
    for (char c : label) {
      bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                (c >= '0' && c <= '9') || c == '-' || c == '_';
      if (!ok) return false;
    }
    start = dot + 1;
  }
  return true;
}

namespace {

// ISO 3166-1 alpha-2, officially assigned codes.
constexpr std::array<std::string_view, 249> kCountryCodes = {
    "AD", "AE", "AF", "AG", "AI", "AL", "AM", "AO", "AQ", "AR", "AS", "AT",
    "AU", "AW", "AX", "AZ", "BA", "BB", "BD", "BE", "BF", "BG", "BH", "BI",
    "BJ", "BL", "BM", "BN", "BO", "BQ", "BR", "BS", "BT", "BV", "BW", "BY",
    "BZ", "CA", "CC", "CD", "CF", "CG", "CH", "CI", "CK", "CL", "CM", "CN",
    "CO", "CR", "CU", "CV", "CW", "CX", "CY", "CZ", "DE", "DJ", "DK", "DM",
    "DO", "DZ", "EC", "EE", "EG", "EH", "ER", "ES", "ET", "FI", "FJ", "FK",
    "FM", "FO", "FR", "GA", "GB", "GD", "GE", "GF", "GG", "GH", "GI", "GL",
    "GM", "GN", "GP", "GQ", "GR", "GS", "GT", "GU", "GW", "GY", "HK", "HM",
    "HN", "HR", "HT", "HU", "ID", "IE", "IL", "IM", "IN", "IO", "IQ", "IR",
    "IS", "IT", "JE", "JM", "JO", "JP", "KE", "KG", "KH", "KI", "KM", "KN",
    "KP", "KR", "KW", "KY", "KZ", "LA", "LB", "LC", "LI", "LK", "LR", "LS",
    "LT", "LU", "LV", "LY", "MA", "MC", "MD", "ME", "MF", "MG", "MH", "MK",
    "ML", "MM", "MN", "MO", "MP", "MQ", "MR", "MS", "MT", "MU", "MV", "MW",
    "MX", "MY", "MZ", "NA", "NC", "NE", "NF", "NG", "NI", "NL", "NO", "NP",
    "NR", "NU", "NZ", "OM", "PA", "PE", "PF", "PG", "PH", "PK", "PL", "PM",
    "PN", "PR", "PS", "PT", "PW", "PY", "QA", "RE", "RO", "RS", "RU", "RW",
    "SA", "SB", "SC", "SD", "SE", "SG", "SH", "SI", "SJ", "SK", "SL", "SM",
    "SN", "SO", "SR", "SS", "ST", "SV", "SX", "SY", "SZ", "TC", "TD", "TF",
    "TG", "TH", "TJ", "TK", "TL", "TM", "TN", "TO", "TR", "TT", "TV", "TW",
    "TZ", "UA", "UG", "UM", "US", "UY", "UZ", "VA", "VC", "VE", "VG", "VI",
    "VN", "VU", "WF", "WS", "YE", "YT", "ZA", "ZM", "ZW"};

}  // namespace

bool is_known_country(std::string_view code) {
  return std::binary_search(kCountryCodes.begin(), kCountryCodes.end(), code);
}

bool is_sentinel_token(std::string_view token) {
  return token.size() == 32 &&
         std::all_of(token.begin(), token.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

std::string describe(const ProbeOutcome& o) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, outcome::Sentinel>) {
          return "sentinel";
        } else if constexpr (std::is_same_v<T, outcome::Blockpage>) {
          return "blockpage(" + v.signature_id + ")";
        } else if constexpr (std::is_same_v<T, outcome::Reset>) {
          return "reset";
        } else if constexpr (std::is_same_v<T, outcome::Timeout>) {
          return "timeout";
        } else {
          return "other_payload(" + v.body_digest.substr(0, 12) + ")";
        }
      },
      o);
}

std::string describe(const Mechanism& m) {
  switch (m.kind) {
    case MechanismKind::drop: return "drop";
    case MechanismKind::reset: return "reset";
    case MechanismKind::blockpage: return "blockpage(" + m.signature_id + ")";
  }
  return "?";
}

std::string describe(const Verdict& v) {
  switch (v.kind) {
    case Verdict::Kind::uncensored: return "uncensored";
    case Verdict::Kind::anomalous: return "anomalous";
    case Verdict::Kind::censored:
      return "censored(" + (v.mechanism ? describe(*v.mechanism) : "?") + ")";
  }
  return "?";
}

Verdict verdict_for(const ProbeOutcome& final_outcome, int attempts,
                    int max_attempts) {
  return std::visit(
      [&](const auto& v) -> Verdict {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, outcome::Sentinel>) {
          return Verdict::uncensored();
        } else if constexpr (std::is_same_v<T, outcome::Blockpage>) {
          return Verdict::censored(Mechanism::blockpage(v.signature_id));
        } else if constexpr (std::is_same_v<T, outcome::Reset>) {
          return Verdict::censored(Mechanism::reset());
        } else if constexpr (std::is_same_v<T, outcome::Timeout>) {
          if (attempts >= max_attempts) return Verdict::censored(Mechanism::drop());
          return Verdict::anomalous();
        } else {
          return Verdict::anomalous();
        }
      },
      final_outcome);
}

bool ProbeRecord::has_flag(std::string_view f) const {
  return std::any_of(flags.begin(), flags.end(), [&](const std::string& s) {
    return s == f || (s.size() > f.size() && s.compare(0, f.size(), f) == 0 &&
                      s[f.size()] == ':');
  });
}

std::vector<std::string> check_record(const ProbeRecord& r) {
  std::vector<std::string> out;
  const auto n = static_cast<int>(r.attempts.size());
  if (n < 1 || n > r.spec.max_attempts) {
    out.push_back("attempt count " + std::to_string(n) + " outside [1, " +
                  std::to_string(r.spec.max_attempts) + "]");
  }
  for (int i = 0; i + 1 < n; ++i) {
    if (!is<outcome::Timeout>(r.attempts[i].outcome)) {
      out.push_back("non-final attempt " + std::to_string(i) + " is " +
                    describe(r.attempts[i].outcome));
    }
  }
  if (n > 0 && !(r.attempts.back().outcome == r.final_outcome)) {
    out.push_back("final_outcome differs from last attempt");
  }
  if (!(verdict_for(r.final_outcome, n, r.spec.max_attempts) == r.verdict)) {
    out.push_back("verdict " + describe(r.verdict) +
                  " inconsistent with final outcome " +
                  describe(r.final_outcome));
  }
  return out;
}

std::vector<std::string> check_trace(const TraceResult& t) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i < t.hops.size(); ++i) {
    if (t.hops[i].ttl <= t.hops[i - 1].ttl) out.push_back("hops not ascending");
  }
  for (std::size_t i = 0; i + 1 < t.hops.size(); ++i) {
    if (t.hops[i].terminal()) out.push_back("hop follows a terminal signal");
  }
  const TraceHop* censor = nullptr;
  for (const auto& h : t.hops) {
    if (h.signal == HopSignal::censor_sign) {
      censor = &h;
      break;
    }
  }
  const bool censored = t.terminal.kind == TraceTerminal::Kind::censored;
  if (censored != t.censor_hop.has_value()) {
    out.push_back("censor_hop presence disagrees with terminal");
  }
  if (t.censor_hop && (!censor || censor->ttl != *t.censor_hop)) {
    out.push_back("censor_hop does not match the CensorSign hop");
  }
  return out;
}

std::string_view to_string(ExclusionReason r) {
  return r == ExclusionReason::cache_online ? "cache_online" : "cache_offline";
}

Dataset Dataset::from_records(std::vector<ProbeRecord> records) {
  Dataset ds;
  std::set<std::string> seen_vp, seen_server;
  std::set<std::pair<std::string, std::string>> seen_domain;
  for (const auto& r : records) {
    if (seen_vp.insert(r.spec.vp.id).second) ds.vps.push_back(r.spec.vp);
    if (seen_server.insert(r.spec.server.id).second) {
      ds.servers.push_back(r.spec.server);
    }
    if (seen_domain.insert({r.spec.domain.name, r.spec.domain.country_scope}).second) {
      ds.domains.push_back(r.spec.domain);
    }
    if (r.has_flag(flag::kExcludedCacheOnline)) {
      ds.excluded_vps.emplace(r.spec.vp.id, ExclusionReason::cache_online);
    } else if (r.has_flag(flag::kExcludedCacheOffline)) {
      ds.excluded_vps.emplace(r.spec.vp.id, ExclusionReason::cache_offline);
    }
  }
  ds.records = std::move(records);
  return ds;
}

std::vector<std::string> Dataset::check() const {
  std::set<std::string> vp_ids, server_ids;
  std::set<std::string> domain_names;
  for (const auto& v : vps) vp_ids.insert(v.id);
  for (const auto& s : servers) server_ids.insert(s.id);
  for (const auto& d : domains) domain_names.insert(d.name);
  std::vector<std::string> out;
  for (const auto& r : records) {
    if (!vp_ids.contains(r.spec.vp.id)) out.push_back("unknown vp " + r.spec.vp.id);
    if (!server_ids.contains(r.spec.server.id)) {
      out.push_back("unknown server " + r.spec.server.id);
    }
    if (!domain_names.contains(r.spec.domain.name)) {
      out.push_back("unknown domain " + r.spec.domain.name);
    }
  }
  for (const auto& [id, reason] : excluded_vps) {
    if (!vp_ids.contains(id)) out.push_back("exclusion names unknown vp " + id);
  }
  return out;
}

namespace {

void check_vp(const VantagePoint& vp, std::vector<std::string>& out,
              std::string_view where) {
  const std::string who = std::string(where) + " vp '" + vp.id + "'";
  if (vp.id.empty()) out.push_back(std::string(where) + " vp with empty id");
  if (vp.asn == 0) out.push_back(who + ": asn must be positive");
  if (vp.country.empty()) {
    out.push_back(who + ": country must be non-empty");
  } else if (!is_known_country(vp.country)) {
    out.push_back(who + ": unknown country code '" + vp.country + "'");
  }
  if (const auto* socks = std::get_if<Socks5Access>(&vp.access)) {
    if (socks->host.empty() || socks->port == 0) {
      out.push_back(who + ": socks5 endpoint must be host:port");
    }
  }
}

void check_server(const ControlServer& s, std::vector<std::string>& out,
                  std::string_view where) {
  const std::string who = std::string(where) + " server '" + s.id + "'";
  if (s.id.empty()) out.push_back(std::string(where) + " server with empty id");
  if (!is_sentinel_token(s.sentinel_token)) {
    out.push_back(who + ": sentinel_token must be 32 lowercase hex chars");
  }
  if (s.platform.empty() || s.region.empty()) {
    out.push_back(who + ": platform and region are required");
  }
}

}  // namespace

std::vector<std::string> validate_campaign(const CampaignConfig& config) {
  std::vector<std::string> out;
  if (config.campaign_id.empty()) out.push_back("campaign_id is empty");

  std::map<std::string, std::string> token_owner;
  std::map<std::pair<std::string, std::string>, std::string> placement_owner;
  std::set<std::string> server_ids;
  auto add_server = [&](const ControlServer& s, std::string_view where) {
    check_server(s, out, where);
    if (auto [it, fresh] = token_owner.emplace(s.sentinel_token, s.id); !fresh) {
      out.push_back("duplicate sentinel_token on servers '" + it->second +
                    "' and '" + s.id + "'");
    }
    return server_ids.insert(s.id).second;
  };
  for (const auto& s : config.servers) {
    if (!add_server(s, "")) out.push_back("duplicate server id '" + s.id + "'");
    auto key = std::make_pair(s.platform, s.region);
    if (auto [it, fresh] = placement_owner.emplace(key, s.id); !fresh) {
      out.push_back("servers '" + it->second + "' and '" + s.id +
                    "' share platform/region " + s.platform + "/" + s.region);
    }
  }
  if (config.reference_pair) {
    const auto& pair = *config.reference_pair;
    add_server(pair.server_a, "reference");
    add_server(pair.server_b, "reference");
    if (pair.server_a.address == pair.server_b.address) {
      out.push_back("reference servers must have distinct addresses");
    }
    if (!is_valid_hostname(pair.shared_domain.name)) {
      out.push_back("reference shared_domain '" + pair.shared_domain.name +
                    "' is not a valid hostname");
    }
  }

  std::set<std::string> vp_ids;
  for (const auto& vp : config.vps) {
    check_vp(vp, out, "");
    if (!vp_ids.insert(vp.id).second) out.push_back("duplicate vp id '" + vp.id + "'");
  }
  for (const auto& vp : config.vetting.clean_vps) check_vp(vp, out, "clean");

  for (const auto& d : config.domains) {
    if (!is_valid_hostname(d.name)) {
      out.push_back("domain '" + d.name + "' is not a valid hostname");
    }
    if (!is_known_country(d.country_scope)) {
      out.push_back("domain '" + d.name + "' has unknown country scope '" +
                    d.country_scope + "'");
    }
  }

  if (config.probe.timeout.count() <= 0) out.push_back("probe timeout must be positive");
  if (config.probe.max_attempts < 1) out.push_back("max_attempts must be at least 1");
  if (config.probe.parallel < 1) out.push_back("parallel must be at least 1");
  if (config.caps.per_country_per_epoch < 1) {
    out.push_back("per_country_per_epoch must be at least 1");
  }
  if (config.traceroute.max_ttl < 1 || config.traceroute.max_ttl > 64) {
    out.push_back("traceroute max_ttl must be in [1, 64]");
  }
  if (config.traceroute.per_hop_timeout.count() <= 0) {
    out.push_back("traceroute per_hop_timeout must be positive");
  }
  return out;
}

}  // namespace pathprobe
