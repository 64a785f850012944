#include "pathprobe/prober.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "pathprobe/digest.hpp"
#include "pathprobe/error.hpp"
#include "pathprobe/http.hpp"

namespace pathprobe::prober {

namespace {

MatchKind parse_kind(const std::string& s) {
  if (s == "substring") return MatchKind::substring;
  if (s == "title-equals") return MatchKind::title_equals;
  if (s == "redirect-location-prefix") return MatchKind::redirect_location_prefix;
  throw Error(ErrorCode::invalid_argument, "unknown signature kind '" + s + "'");
}

bool matches(const Signature& sig, std::string_view raw,
             const std::optional<http::Response>& parsed) {
  switch (sig.kind) {
    case MatchKind::substring:
      return raw.find(sig.pattern) != std::string_view::npos;
    case MatchKind::title_equals: {
      auto title = http::extract_title(parsed ? std::string_view(parsed->body) : raw);
      return title && http::iequals(*title, http::trim(sig.pattern));
    }
    case MatchKind::redirect_location_prefix: {
      if (!parsed || parsed->status < 300 || parsed->status > 399) return false;
      auto location = parsed->header("Location");
      return location && http::istarts_with(*location, sig.pattern);
    }
  }
  return false;
}

}  // namespace

BlockpageSignatureDB::BlockpageSignatureDB(std::vector<Signature> entries)
    : entries_(std::move(entries)) {
  std::set<std::string> ids;
  for (const auto& e : entries_) {
    if (e.id.empty() || e.pattern.empty()) {
      throw Error(ErrorCode::invalid_argument, "signature id and pattern must be non-empty");
    }
    if (!ids.insert(e.id).second) {
      throw Error(ErrorCode::invalid_argument, "duplicate signature id '" + e.id + "'");
    }
  }
}

BlockpageSignatureDB BlockpageSignatureDB::from_json_text(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("signature db: ") + e.what());
  }
  if (!j.is_array()) throw Error(ErrorCode::invalid_argument, "signature db must be an array");
  std::vector<Signature> entries;
  for (const auto& item : j) {
    entries.push_back({item.at("id").get<std::string>(),
                       parse_kind(item.at("kind").get<std::string>()),
                       item.at("pattern").get<std::string>()});
  }
  return BlockpageSignatureDB(std::move(entries));
}

BlockpageSignatureDB BlockpageSignatureDB::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot read signature db " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

bool BlockpageSignatureDB::contains(std::string_view id) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Signature& s) { return s.id == id; });
}

std::optional<std::string> BlockpageSignatureDB::match(std::string_view raw) const {
  const auto parsed = http::parse_response(raw);
  for (const auto& sig : entries_) {
    if (matches(sig, raw, parsed)) return sig.id;
  }
  return std::nullopt;
}

std::string build_request(const TestDomain& domain, std::string_view user_agent) {
  std::string req = "GET / HTTP/1.1\r\nHost: ";
  req += http::to_lower(domain.name);
  req += "\r\nUser-Agent: ";
  req += user_agent;
  req += "\r\nAccept: */*\r\nConnection: close\r\n\r\n";
  return req;
}

ProbeOutcome classify(const ExchangeResult& response, const ControlServer& server,
                      const BlockpageSignatureDB& db) {
  switch (response.kind) {
    case ExchangeResult::Kind::reset:
      return outcome::Reset{};
    case ExchangeResult::Kind::timeout:
    case ExchangeResult::Kind::ttl_exceeded:
    case ExchangeResult::Kind::setup_failed:
      return outcome::Timeout{};
    case ExchangeResult::Kind::response:
      break;
  }
  const std::string body = http::body_of(response.bytes);
  if (!server.sentinel_token.empty() &&
      body.find(server.sentinel_token) != std::string::npos) {
    return outcome::Sentinel{};
  }
  if (auto id = db.match(response.bytes)) return outcome::Blockpage{*id};
  return outcome::OtherPayload{sha256_hex(body), http::extract_title(body)};
}

ProbeRecord probe(const ProbeSpec& spec, const BlockpageSignatureDB& db,
                  Transport& transport, const ProbeOptions& options) {
  ProbeRecord rec;
  rec.spec = spec;
  rec.epoch = options.epoch;
  rec.campaign_id = options.campaign_id;
  rec.started_at = transport.now_ms(spec.vp);

  const std::string request = build_request(spec.domain, options.user_agent);
  bool setup_failure = false;
  std::string last_error;
  for (int i = 0; i < std::max(spec.max_attempts, 1); ++i) {
    ExchangeResult res = transport.exchange(spec.vp, spec.server, request, spec.timeout,
                                            std::nullopt);
    ProbeOutcome out = classify(res, spec.server, db);
    std::optional<Millis> rtt;
    if (!is<outcome::Timeout>(out)) rtt = res.elapsed;
    if (res.kind == ExchangeResult::Kind::setup_failed) {
      setup_failure = true;
      last_error = res.error;
    }
    rec.attempts.push_back({out, rtt});
    if (!is<outcome::Timeout>(out)) break;
  }
  rec.final_outcome = rec.attempts.back().outcome;
  rec.verdict = verdict_for(rec.final_outcome, static_cast<int>(rec.attempts.size()),
                            spec.max_attempts);
  if (setup_failure) {
    rec.flags.push_back(std::string(flag::kTransportError) + ":" + last_error);
    if (is<outcome::Timeout>(rec.final_outcome)) {
      rec.flags.emplace_back(flag::kInconclusive);
    }
  }
  rec.ended_at = transport.now_ms(spec.vp);
  return rec;
}

Schedule schedule_vps(const std::vector<VantagePoint>& offered, int per_country_cap) {
  Schedule s;
  std::set<std::string> seen;
  std::map<std::string, int> per_country;
  for (const auto& vp : offered) {
    if (!seen.insert(vp.id).second) {
      s.discarded.emplace_back(vp, "already selected this epoch");
      continue;
    }
    int& n = per_country[vp.country];
    if (n >= per_country_cap) {
      s.discarded.emplace_back(vp, "country " + vp.country + " cap of " +
                                       std::to_string(per_country_cap) + " reached");
      continue;
    }
    ++n;
    s.scheduled.push_back(vp);
  }
  for (const auto& [vp, why] : s.discarded) {
    spdlog::info("vp {} not scheduled: {}", vp.id, why);
  }
  return s;
}

std::vector<TestDomain> domains_for(const VantagePoint& vp,
                                    const std::vector<TestDomain>& domains) {
  std::vector<TestDomain> out;
  std::copy_if(domains.begin(), domains.end(), std::back_inserter(out),
               [&](const TestDomain& d) { return d.country_scope == vp.country; });
  return out;
}

Schedule run_matrix(const std::vector<VantagePoint>& vps,
                    const std::vector<ControlServer>& servers,
                    const std::vector<TestDomain>& domains, const MatrixPolicy& policy,
                    const BlockpageSignatureDB& db, Transport& transport,
                    const RecordSink& sink) {
  Schedule schedule = schedule_vps(vps, policy.per_country_cap);
  const std::size_t n = schedule.scheduled.size();
  if (n == 0) return schedule;

  std::vector<std::vector<ProbeRecord>> blocks(n);
  std::vector<bool> done(n, false);
  std::size_t next_emit = 0;
  std::mutex emit_mu;
  std::atomic<std::size_t> next_vp{0};

  auto worker = [&] {
    for (std::size_t i = next_vp++; i < n; i = next_vp++) {
      const VantagePoint& vp = schedule.scheduled[i];
      std::vector<ProbeRecord> block;
      for (const auto& server : servers) {
        for (const auto& domain : domains_for(vp, domains)) {
          ProbeSpec spec{vp, server, domain, policy.timeout, policy.max_attempts};
          block.push_back(probe(spec, db, transport, policy.probe));
        }
      }
      std::lock_guard lock(emit_mu);
      blocks[i] = std::move(block);
      done[i] = true;
      while (next_emit < n && done[next_emit]) {
        for (auto& r : blocks[next_emit]) sink(std::move(r));
        blocks[next_emit].clear();
        ++next_emit;
      }
    }
  };

  const auto threads = static_cast<std::size_t>(std::max(policy.parallel, 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(threads, n); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return schedule;
}

}  // namespace pathprobe::prober
