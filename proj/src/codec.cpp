#include "pathprobe/codec.hpp"

#include "pathprobe/error.hpp"

namespace pathprobe {

namespace {

[[noreturn]] void bad(const std::string& what) {
  throw Error(ErrorCode::schema_mismatch, what);
}

template <typename T>
std::optional<T> opt(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

}  // namespace

std::string_view to_string(HopSignal s) {
  switch (s) {
    case HopSignal::ttl_exceeded: return "ttl_exceeded";
    case HopSignal::silent: return "silent";
    case HopSignal::censor_sign: return "censor_sign";
    case HopSignal::sentinel_reached: return "sentinel_reached";
  }
  return "silent";
}

std::string_view to_string(MechanismKind k) {
  switch (k) {
    case MechanismKind::drop: return "drop";
    case MechanismKind::reset: return "reset";
    case MechanismKind::blockpage: return "blockpage";
  }
  return "drop";
}

ExclusionReason exclusion_reason_from_string(std::string_view s) {
  if (s == "cache_online") return ExclusionReason::cache_online;
  if (s == "cache_offline") return ExclusionReason::cache_offline;
  bad("unknown exclusion reason '" + std::string(s) + "'");
}

void to_json(Json& j, const Ipv4& v) { j = v.str(); }

void from_json(const Json& j, Ipv4& v) {
  auto parsed = Ipv4::parse(j.get<std::string>());
  if (!parsed) bad("bad IPv4 address '" + j.get<std::string>() + "'");
  v = *parsed;
}

void to_json(Json& j, const TestDomain& v) {
  j = Json{{"name", v.name}, {"country_scope", v.country_scope}};
}

void from_json(const Json& j, TestDomain& v) {
  v.name = j.at("name").get<std::string>();
  v.country_scope = j.at("country_scope").get<std::string>();
}

void to_json(Json& j, const VantagePoint& v) {
  j = Json{{"id", v.id}, {"ip", v.address}, {"country", v.country}, {"asn", v.asn}};
  if (const auto* s = std::get_if<Socks5Access>(&v.access)) {
    Json access{{"type", "socks5"}, {"host", s->host}, {"port", s->port}};
    if (s->credentials) {
      access["username"] = s->credentials->username;
      access["password"] = s->credentials->password;
    }
    j["access"] = std::move(access);
  } else {
    j["access"] = Json{{"type", "direct"}};
  }
}

void from_json(const Json& j, VantagePoint& v) {
  v.id = j.at("id").get<std::string>();
  v.address = j.at("ip").get<Ipv4>();
  v.country = j.at("country").get<std::string>();
  v.asn = j.at("asn").get<Asn>();
  v.access = DirectAccess{};
  auto it = j.find("access");
  if (it == j.end() || it->is_null()) return;
  const std::string type = it->value("type", std::string("direct"));
  if (type == "direct") return;
  if (type != "socks5") bad("unknown vp access type '" + type + "'");
  Socks5Access s;
  s.host = it->at("host").get<std::string>();
  s.port = it->value("port", std::uint16_t{1080});
  if (it->contains("username")) {
    s.credentials = Socks5Credentials{it->at("username").get<std::string>(),
                                      it->value("password", std::string())};
  }
  v.access = std::move(s);
}

void to_json(Json& j, const ControlServer& v) {
  j = Json{{"id", v.id},       {"ip", v.address},     {"port", v.port},
           {"platform", v.platform}, {"region", v.region}, {"sentinel_token", v.sentinel_token}};
}

void from_json(const Json& j, ControlServer& v) {
  v.id = j.at("id").get<std::string>();
  v.address = j.at("ip").get<Ipv4>();
  v.port = j.value("port", std::uint16_t{80});
  v.platform = j.value("platform", std::string());
  v.region = j.value("region", std::string());
  v.sentinel_token = j.value("sentinel_token", std::string());
}

void to_json(Json& j, const ProbeSpec& v) {
  j = Json{{"vp", v.vp},
           {"server", v.server},
           {"domain", v.domain},
           {"timeout_ms", v.timeout.count()},
           {"max_attempts", v.max_attempts}};
}

void from_json(const Json& j, ProbeSpec& v) {
  v.vp = j.at("vp").get<VantagePoint>();
  v.server = j.at("server").get<ControlServer>();
  v.domain = j.at("domain").get<TestDomain>();
  v.timeout = Millis(j.value("timeout_ms", kDefaultProbeTimeout.count()));
  v.max_attempts = j.value("max_attempts", kDefaultMaxAttempts);
}

namespace outcome {

void to_json(Json& j, const ProbeOutcome& v) {
  std::visit(
      [&](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, Sentinel>) {
          j = Json{{"type", "sentinel"}};
        } else if constexpr (std::is_same_v<T, Blockpage>) {
          j = Json{{"type", "blockpage"}, {"signature_id", o.signature_id}};
        } else if constexpr (std::is_same_v<T, Reset>) {
          j = Json{{"type", "reset"}};
        } else if constexpr (std::is_same_v<T, Timeout>) {
          j = Json{{"type", "timeout"}};
        } else {
          j = Json{{"type", "other_payload"}, {"body_digest", o.body_digest}};
          j["title"] = o.title ? Json(*o.title) : Json(nullptr);
        }
      },
      v);
}

void from_json(const Json& j, ProbeOutcome& v) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "sentinel") {
    v = Sentinel{};
  } else if (type == "blockpage") {
    v = Blockpage{j.at("signature_id").get<std::string>()};
  } else if (type == "reset") {
    v = Reset{};
  } else if (type == "timeout") {
    v = Timeout{};
  } else if (type == "other_payload") {
    v = OtherPayload{j.at("body_digest").get<std::string>(), opt<std::string>(j, "title")};
  } else {
    bad("unknown outcome type '" + type + "'");
  }
}

}  // namespace outcome

void to_json(Json& j, const Mechanism& v) {
  j = Json{{"type", to_string(v.kind)}};
  if (v.kind == MechanismKind::blockpage) j["signature_id"] = v.signature_id;
}

void from_json(const Json& j, Mechanism& v) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "drop") {
    v = Mechanism::drop();
  } else if (type == "reset") {
    v = Mechanism::reset();
  } else if (type == "blockpage") {
    v = Mechanism::blockpage(j.value("signature_id", std::string()));
  } else {
    bad("unknown mechanism type '" + type + "'");
  }
}

void to_json(Json& j, const Verdict& v) {
  switch (v.kind) {
    case Verdict::Kind::uncensored: j = Json{{"type", "uncensored"}}; break;
    case Verdict::Kind::anomalous: j = Json{{"type", "anomalous"}}; break;
    case Verdict::Kind::censored:
      j = Json{{"type", "censored"}};
      if (v.mechanism) j["mechanism"] = *v.mechanism;
      break;
  }
}

void from_json(const Json& j, Verdict& v) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "uncensored") {
    v = Verdict::uncensored();
  } else if (type == "anomalous") {
    v = Verdict::anomalous();
  } else if (type == "censored") {
    v = Verdict::censored(j.at("mechanism").get<Mechanism>());
  } else {
    bad("unknown verdict type '" + type + "'");
  }
}

void to_json(Json& j, const Attempt& v) {
  j = Json{{"outcome", v.outcome}};
  j["rtt_ms"] = v.rtt ? Json(v.rtt->count()) : Json(nullptr);
}

void from_json(const Json& j, Attempt& v) {
  v.outcome = j.at("outcome").get<ProbeOutcome>();
  auto rtt = opt<std::int64_t>(j, "rtt_ms");
  v.rtt = rtt ? std::optional<Millis>(Millis(*rtt)) : std::nullopt;
}

void to_json(Json& j, const ProbeRecord& v) {
  j = Json{{"schema_version", kSchemaVersion},
           {"campaign_id", v.campaign_id},
           {"epoch", v.epoch},
           {"ts_start", v.started_at},
           {"ts_end", v.ended_at},
           {"vp", v.spec.vp},
           {"server", v.spec.server},
           {"domain", v.spec.domain.name},
           {"domain_scope", v.spec.domain.country_scope},
           {"timeout_ms", v.spec.timeout.count()},
           {"max_attempts", v.spec.max_attempts},
           {"attempts", v.attempts},
           {"final_outcome", v.final_outcome},
           {"verdict", v.verdict},
           {"flags", v.flags}};
}

void from_json(const Json& j, ProbeRecord& v) {
  v.campaign_id = j.value("campaign_id", std::string());
  v.epoch = j.value("epoch", 0);
  v.started_at = j.value("ts_start", TimestampMs{0});
  v.ended_at = j.value("ts_end", TimestampMs{0});
  v.spec.vp = j.at("vp").get<VantagePoint>();
  v.spec.server = j.at("server").get<ControlServer>();
  v.spec.domain.name = j.at("domain").get<std::string>();
  v.spec.domain.country_scope = j.value("domain_scope", v.spec.vp.country);
  v.spec.timeout = Millis(j.value("timeout_ms", kDefaultProbeTimeout.count()));
  v.spec.max_attempts = j.value("max_attempts", kDefaultMaxAttempts);
  v.attempts = j.at("attempts").get<std::vector<Attempt>>();
  v.final_outcome = j.at("final_outcome").get<ProbeOutcome>();
  v.verdict = j.at("verdict").get<Verdict>();
  v.flags = j.value("flags", std::vector<std::string>{});
}

void to_json(Json& j, const Responder& v) {
  j = Json{{"ip", v.ip}, {"label", v.label}};
  j["asn"] = v.asn ? Json(*v.asn) : Json(nullptr);
}

void from_json(const Json& j, Responder& v) {
  v.ip = j.at("ip").get<Ipv4>();
  v.asn = opt<Asn>(j, "asn");
  v.label = j.value("label", std::string());
}

void to_json(Json& j, const TraceHop& v) {
  j = Json{{"ttl", v.ttl}, {"signal", to_string(v.signal)}};
  j["responder"] = v.responder ? Json(*v.responder) : Json(nullptr);
  if (v.mechanism) j["mechanism"] = *v.mechanism;
}

void from_json(const Json& j, TraceHop& v) {
  v.ttl = j.at("ttl").get<int>();
  const std::string signal = j.at("signal").get<std::string>();
  if (signal == "ttl_exceeded") {
    v.signal = HopSignal::ttl_exceeded;
  } else if (signal == "silent") {
    v.signal = HopSignal::silent;
  } else if (signal == "censor_sign") {
    v.signal = HopSignal::censor_sign;
  } else if (signal == "sentinel_reached") {
    v.signal = HopSignal::sentinel_reached;
  } else {
    bad("unknown hop signal '" + signal + "'");
  }
  v.responder = opt<Responder>(j, "responder");
  v.mechanism = opt<Mechanism>(j, "mechanism");
}

void to_json(Json& j, const TraceResult& v) {
  j = Json{{"spec", v.spec}, {"hops", v.hops}};
  j["censor_hop"] = v.censor_hop ? Json(*v.censor_hop) : Json(nullptr);
  Json terminal;
  switch (v.terminal.kind) {
    case TraceTerminal::Kind::sentinel: terminal["type"] = "sentinel"; break;
    case TraceTerminal::Kind::censored: terminal["type"] = "censored"; break;
    case TraceTerminal::Kind::exhausted: terminal["type"] = "exhausted"; break;
  }
  if (v.terminal.mechanism) terminal["mechanism"] = *v.terminal.mechanism;
  j["terminal"] = std::move(terminal);
}

void from_json(const Json& j, TraceResult& v) {
  v.spec = j.at("spec").get<ProbeSpec>();
  v.hops = j.at("hops").get<std::vector<TraceHop>>();
  v.censor_hop = opt<int>(j, "censor_hop");
  const Json& t = j.at("terminal");
  const std::string type = t.at("type").get<std::string>();
  if (type == "sentinel") {
    v.terminal.kind = TraceTerminal::Kind::sentinel;
  } else if (type == "censored") {
    v.terminal.kind = TraceTerminal::Kind::censored;
  } else if (type == "exhausted") {
    v.terminal.kind = TraceTerminal::Kind::exhausted;
  } else {
    bad("unknown trace terminal '" + type + "'");
  }
  v.terminal.mechanism = opt<Mechanism>(t, "mechanism");
}

void to_json(Json& j, const Dataset& v) {
  Json excluded = Json::object();
  for (const auto& [id, reason] : v.excluded_vps) excluded[id] = to_string(reason);
  j = Json{{"records", v.records},
           {"excluded_vps", std::move(excluded)},
           {"servers", v.servers},
           {"vps", v.vps},
           {"domains", v.domains}};
}

void from_json(const Json& j, Dataset& v) {
  v.records = j.at("records").get<std::vector<ProbeRecord>>();
  v.excluded_vps.clear();
  for (const auto& [id, reason] : j.at("excluded_vps").items()) {
    v.excluded_vps.emplace(id, exclusion_reason_from_string(reason.get<std::string>()));
  }
  v.servers = j.at("servers").get<std::vector<ControlServer>>();
  v.vps = j.at("vps").get<std::vector<VantagePoint>>();
  v.domains = j.at("domains").get<std::vector<TestDomain>>();
}

}  // namespace pathprobe
