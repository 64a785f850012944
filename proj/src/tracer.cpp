#include "pathprobe/tracer.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "pathprobe/error.hpp"
#include "pathprobe/http.hpp"

namespace pathprobe::tracer {

namespace {

std::uint32_t mask_for(int length) {
  return length == 0 ? 0u : ~std::uint32_t{0} << (32 - length);
}

TraceHop hop_from(const ExchangeResult& res, int ttl, const ProbeSpec& spec,
                  const prober::BlockpageSignatureDB& db) {
  TraceHop hop;
  hop.ttl = ttl;
  if (res.responder) hop.responder = Responder{*res.responder, std::nullopt, {}};
  switch (res.kind) {
    case ExchangeResult::Kind::ttl_exceeded:
      hop.signal = res.responder ? HopSignal::ttl_exceeded : HopSignal::silent;
      return hop;
    case ExchangeResult::Kind::reset:
      hop.signal = HopSignal::censor_sign;
      hop.mechanism = Mechanism::reset();
      return hop;
    case ExchangeResult::Kind::timeout:
    case ExchangeResult::Kind::setup_failed:
      hop.signal = HopSignal::silent;
      hop.responder.reset();
      return hop;
    case ExchangeResult::Kind::response:
      break;
  }
  const ProbeOutcome out = prober::classify(res, spec.server, db);
  if (is<outcome::Sentinel>(out)) {
    hop.signal = HopSignal::sentinel_reached;
    if (!hop.responder) hop.responder = Responder{spec.server.address, std::nullopt, {}};
  } else {
    // Anything other than our own page is someone else answering for the server.
    hop.signal = HopSignal::censor_sign;
    const auto* bp = std::get_if<outcome::Blockpage>(&out);
    hop.mechanism = Mechanism::blockpage(bp ? bp->signature_id : std::string());
  }
  return hop;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string responder_text(const Responder& r) {
  std::string s = r.ip.str();
  if (r.asn) s += " AS" + std::to_string(*r.asn);
  if (!r.label.empty()) s += " " + r.label;
  return s;
}

std::string cell_text(const TraceResult& t, const TraceHop& hop) {
  switch (hop.signal) {
    case HopSignal::silent:
      return "*";
    case HopSignal::ttl_exceeded:
      return hop.responder ? responder_text(*hop.responder) : "*";
    case HopSignal::censor_sign:
      return hop.responder ? "Censor: " + responder_text(*hop.responder) : "Censor:";
    case HopSignal::sentinel_reached: {
      std::string s = hop.responder ? hop.responder->ip.str() : t.spec.server.address.str();
      if (!t.spec.server.region.empty()) s += " (" + t.spec.server.region + ")";
      return s;
    }
  }
  return "";
}

}  // namespace

TraceResult app_traceroute(const ProbeSpec& spec, int max_ttl, Transport& transport,
                           const prober::BlockpageSignatureDB& db,
                           const TraceOptions& options) {
  if (max_ttl < 1 || max_ttl > kMaxTtlLimit) {
    throw Error(ErrorCode::invalid_argument,
                "max_ttl must be in [1, " + std::to_string(kMaxTtlLimit) + "]");
  }
  if (spec.vp.via_socks() || !transport.supports_ttl(spec.vp)) {
    throw Error(ErrorCode::unsupported_transport,
                "vp " + spec.vp.id + " cannot send TTL-limited packets");
  }
  const std::string request = prober::build_request(spec.domain, options.user_agent);
  TraceResult result;
  result.spec = spec;
  result.terminal.kind = TraceTerminal::Kind::exhausted;
  for (int ttl = 1; ttl <= max_ttl; ++ttl) {
    TraceHop hop;
    for (int attempt = 0; attempt <= std::max(options.retries_per_hop, 0); ++attempt) {
      const ExchangeResult res =
          transport.exchange(spec.vp, spec.server, request, options.per_hop_timeout, ttl);
      hop = hop_from(res, ttl, spec, db);
      if (hop.signal != HopSignal::silent) break;
    }
    result.hops.push_back(hop);
    if (hop.signal == HopSignal::censor_sign) {
      result.censor_hop = ttl;
      result.terminal = {TraceTerminal::Kind::censored, hop.mechanism};
      break;
    }
    if (hop.signal == HopSignal::sentinel_reached) {
      result.terminal = {TraceTerminal::Kind::sentinel, std::nullopt};
      break;
    }
  }
  return result;
}

IpAsnTable IpAsnTable::from_text(std::string_view text) {
  IpAsnTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string cidr, asn_text;
    if (!(fields >> cidr)) continue;
    auto fail = [&](const std::string& why) {
      throw Error(ErrorCode::invalid_argument,
                  "ip-asn table line " + std::to_string(lineno) + ": " + why);
    };
    if (!(fields >> asn_text)) fail("missing ASN");
    std::string label;
    std::getline(fields, label);
    auto slash = cidr.find('/');
    auto ip = Ipv4::parse(cidr.substr(0, slash));
    int length = 32;
    if (slash != std::string::npos) {
      const char* b = cidr.data() + slash + 1;
      const char* e = cidr.data() + cidr.size();
      auto [p, ec] = std::from_chars(b, e, length);
      if (ec != std::errc() || p != e || length < 0 || length > 32) fail("bad prefix length");
    }
    if (!ip) fail("bad address '" + cidr + "'");
    if (asn_text.starts_with("AS") || asn_text.starts_with("as")) asn_text.erase(0, 2);
    Asn asn = 0;
    auto [p, ec] = std::from_chars(asn_text.data(), asn_text.data() + asn_text.size(), asn);
    if (ec != std::errc() || p != asn_text.data() + asn_text.size()) fail("bad ASN");
    table.add(*ip, length, {asn, http::trim(label)});
  }
  return table;
}

IpAsnTable IpAsnTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot read ip-asn table " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

void IpAsnTable::add(Ipv4 prefix, int length, Entry entry) {
  auto& bucket = by_length_.at(static_cast<std::size_t>(length));
  if (bucket.insert_or_assign(prefix.value() & mask_for(length), std::move(entry)).second) {
    ++count_;
  }
}

std::optional<IpAsnTable::Entry> IpAsnTable::lookup(Ipv4 ip) const {
  for (int length = 32; length >= 0; --length) {
    const auto& bucket = by_length_[static_cast<std::size_t>(length)];
    if (bucket.empty()) continue;
    auto it = bucket.find(ip.value() & mask_for(length));
    if (it != bucket.end()) return it->second;
  }
  return std::nullopt;
}

TraceResult annotate_asn(TraceResult result, const IpAsnTable& table) {
  for (auto& hop : result.hops) {
    if (!hop.responder) continue;
    if (auto e = table.lookup(hop.responder->ip)) {
      hop.responder->asn = e->asn;
      hop.responder->label = e->label;
    } else {
      hop.responder->asn.reset();
    }
  }
  return result;
}

std::string render_trace_table(const std::vector<TraceResult>& results, TableFormat format) {
  std::vector<const TraceResult*> cols;
  for (const auto& r : results) cols.push_back(&r);
  std::stable_sort(cols.begin(), cols.end(), [](const TraceResult* a, const TraceResult* b) {
    const auto& x = a->spec.server;
    const auto& y = b->spec.server;
    return std::tie(x.platform, x.region, x.id) < std::tie(y.platform, y.region, y.id);
  });
  int rows = 0;
  for (const auto* c : cols) {
    if (!c->hops.empty()) rows = std::max(rows, c->hops.back().ttl);
  }

  std::vector<std::vector<std::string>> grid(static_cast<std::size_t>(rows),
                                             std::vector<std::string>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    for (const auto& hop : cols[c]->hops) {
      grid[static_cast<std::size_t>(hop.ttl - 1)][c] = cell_text(*cols[c], hop);
    }
  }

  std::ostringstream out;
  if (format == TableFormat::csv) {
    out << "ttl";
    for (const auto* c : cols) {
      out << ',' << csv_field(c->spec.server.platform + " " + c->spec.server.region);
    }
    out << '\n';
    for (int r = 0; r < rows; ++r) {
      out << r + 1;
      for (const auto& cell : grid[static_cast<std::size_t>(r)]) out << ',' << csv_field(cell);
      out << '\n';
    }
    return out.str();
  }

  out << "Hops";
  for (const auto* c : cols) out << '\t' << c->spec.server.platform;
  out << "\n";
  for (const auto* c : cols) out << '\t' << c->spec.server.region;
  out << '\n';
  for (int r = 0; r < rows; ++r) {
    out << "ttl = " << r + 1;
    for (const auto& cell : grid[static_cast<std::size_t>(r)]) out << '\t' << cell;
    out << '\n';
  }
  return out.str();
}

}  // namespace pathprobe::tracer
