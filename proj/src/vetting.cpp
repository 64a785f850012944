#include "pathprobe/vetting.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "parallel.hpp"
#include "pathprobe/error.hpp"
#include "pathprobe/http.hpp"

namespace pathprobe::vetting {

namespace {

const char* kind_name(ExchangeResult::Kind k) {
  switch (k) {
    case ExchangeResult::Kind::response: return "response";
    case ExchangeResult::Kind::reset: return "reset";
    case ExchangeResult::Kind::timeout: return "timeout";
    case ExchangeResult::Kind::ttl_exceeded: return "ttl exceeded";
    case ExchangeResult::Kind::setup_failed: return "setup failed";
  }
  return "?";
}

ExchangeResult fetch(const VantagePoint& vp, const ControlServer& server,
                     const std::string& request, const CacheTestOptions& options,
                     Transport& transport) {
  ExchangeResult res;
  for (int i = 0; i < std::max(options.max_attempts, 1); ++i) {
    res = transport.exchange(vp, server, request, options.timeout, std::nullopt);
    if (res.kind != ExchangeResult::Kind::timeout &&
        res.kind != ExchangeResult::Kind::setup_failed) {
      break;
    }
  }
  return res;
}

bool carries(const ExchangeResult& r, const std::string& token) {
  return r.kind == ExchangeResult::Kind::response && !token.empty() &&
         http::body_of(r.bytes).find(token) != std::string::npos;
}

}  // namespace

CacheTestResult cache_test(const VantagePoint& vp, const ReferenceServerPair& pair,
                           Transport& transport, const CacheTestOptions& options) {
  const std::string request = prober::build_request(pair.shared_domain, options.user_agent);
  CacheTestResult result{vp.id, false, {}};

  const ExchangeResult first = fetch(vp, pair.server_a, request, options, transport);
  if (first.kind != ExchangeResult::Kind::response) {
    result.reason = std::string("first reference probe failed: ") + kind_name(first.kind);
    if (!first.error.empty()) result.reason += " (" + first.error + ")";
    return result;
  }

  const ExchangeResult second = fetch(vp, pair.server_b, request, options, transport);
  if (carries(second, pair.server_b.sentinel_token)) {
    result.keep = true;
  } else if (carries(second, pair.server_a.sentinel_token)) {
    result.reason = "second reference probe replayed " + pair.server_a.id + "'s payload";
  } else {
    result.reason = std::string("second reference probe inconclusive: ") + kind_name(second.kind);
  }
  return result;
}

std::vector<CacheTestResult> cache_test_all(const std::vector<VantagePoint>& vps,
                                            const ReferenceServerPair& pair,
                                            Transport& transport,
                                            const CacheTestOptions& options, int parallel) {
  std::vector<CacheTestResult> out(vps.size());
  detail::parallel_for(vps.size(), parallel, [&](std::size_t i) {
    out[i] = cache_test(vps[i], pair, transport, options);
  });
  for (const auto& r : out) {
    if (!r.keep) spdlog::info("vp {} excluded by cache test: {}", r.vp_id, r.reason);
  }
  return out;
}

LegitTitleTable::LegitTitleTable(std::map<std::string, std::string> titles) {
  for (auto& [domain, title] : titles) titles_.emplace(domain, http::trim(title));
}

LegitTitleTable LegitTitleTable::from_json_text(std::string_view text) {
  try {
    auto j = nlohmann::json::parse(text);
    return LegitTitleTable(j.get<std::map<std::string, std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("legit title table: ") + e.what());
  }
}

LegitTitleTable LegitTitleTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot read legit title table " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

const std::string* LegitTitleTable::find(const std::string& domain) const {
  auto it = titles_.find(domain);
  return it == titles_.end() ? nullptr : &it->second;
}

std::set<std::string> offline_cache_check(const Dataset& dataset, const LegitTitleTable& table) {
  std::set<std::string> out;
  for (const auto& r : dataset.records) {
    const auto* other = std::get_if<outcome::OtherPayload>(&r.final_outcome);
    if (!other || !other->title) continue;
    const std::string* legit = table.find(r.spec.domain.name);
    if (legit && http::iequals(http::trim(*other->title), *legit)) out.insert(r.spec.vp.id);
  }
  return out;
}

DomainPicker uncensored_for_country(std::vector<TestDomain> domains) {
  return [domains = std::move(domains)](const VantagePoint& vp) {
    std::vector<TestDomain> out;
    std::copy_if(domains.begin(), domains.end(), std::back_inserter(out),
                 [&](const TestDomain& d) { return d.country_scope != vp.country; });
    return out;
  };
}

bool InboundReport::all_pass() const {
  return std::all_of(servers.begin(), servers.end(),
                     [](const ServerInboundStatus& s) { return s.pass; });
}

std::vector<std::string> InboundReport::failing_servers() const {
  std::vector<std::string> out;
  for (const auto& s : servers) {
    if (!s.pass) out.push_back(s.server_id);
  }
  return out;
}

InboundReport verify_inbound_clean(const std::vector<VantagePoint>& clean_vps,
                                   const std::vector<ControlServer>& servers,
                                   const DomainPicker& picker, Transport& transport,
                                   const prober::BlockpageSignatureDB& db,
                                   const InboundOptions& options) {
  const auto needed = static_cast<std::size_t>(std::max(1, options.min_clean_vps));
  if (clean_vps.size() < needed) {
    throw Error(ErrorCode::insufficient_evidence,
                "need at least " + std::to_string(needed) + " clean vantage points, have " +
                    std::to_string(clean_vps.size()));
  }

  // One row of records per clean VP, probed server-then-domain.
  std::vector<std::vector<ProbeRecord>> rows(clean_vps.size());
  detail::parallel_for(clean_vps.size(), options.policy.parallel, [&](std::size_t i) {
    const auto domains = picker(clean_vps[i]);
    for (const auto& server : servers) {
      for (const auto& d : domains) {
        ProbeSpec spec{clean_vps[i], server, d, options.policy.timeout,
                       options.policy.max_attempts};
        rows[i].push_back(prober::probe(spec, db, transport, options.policy.probe));
      }
    }
  });

  InboundReport report;
  std::map<std::string, std::size_t> index;
  for (const auto& s : servers) {
    index[s.id] = report.servers.size();
    report.servers.push_back({s.id, true, 0});
  }
  for (const auto& row : rows) {
    for (const auto& rec : row) {
      auto& status = report.servers[index[rec.spec.server.id]];
      ++status.probes;
      if (is<outcome::Sentinel>(rec.final_outcome)) continue;
      status.pass = false;
      report.failures.push_back(
          {rec.spec.vp.id, rec.spec.server.id, rec.spec.domain.name, rec.final_outcome});
    }
  }
  for (const auto& s : report.servers) {
    if (s.probes == 0) {
      throw Error(ErrorCode::insufficient_evidence,
                  "no uncensored domains to probe server " + s.server_id + " with");
    }
  }
  return report;
}

}  // namespace pathprobe::vetting
