#include "pathprobe/simnet.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <json.hpp>
#include <set>
#include <sstream>

#include "pathprobe/error.hpp"
#include "pathprobe/http.hpp"
#include "pathprobe/prober.hpp"
#include "pathprobe/sentinel.hpp"

namespace pathprobe::simnet {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorCode::topology_invalid, what);
}

AsRole parse_role(const std::string& s) {
  if (s == "eyeball") return AsRole::eyeball;
  if (s == "transit") return AsRole::transit;
  if (s == "cloud") return AsRole::cloud;
  invalid("unknown AS role '" + s + "'");
}

const char* role_name(AsRole r) {
  switch (r) {
    case AsRole::eyeball: return "eyeball";
    case AsRole::transit: return "transit";
    case AsRole::cloud: return "cloud";
  }
  return "transit";
}

Relation parse_relation(const std::string& s) {
  if (s == "customer-of") return Relation::customer_of;
  if (s == "peer") return Relation::peer;
  if (s == "provider-of") return Relation::provider_of;
  invalid("unknown link relation '" + s + "'");
}

const char* relation_name(Relation r) {
  switch (r) {
    case Relation::customer_of: return "customer-of";
    case Relation::peer: return "peer";
    case Relation::provider_of: return "provider-of";
  }
  return "peer";
}

Relation inverse(Relation r) {
  switch (r) {
    case Relation::customer_of: return Relation::provider_of;
    case Relation::provider_of: return Relation::customer_of;
    case Relation::peer: return Relation::peer;
  }
  return r;
}

Direction parse_direction(const std::string& s) {
  if (s == "inbound") return Direction::inbound;
  if (s == "outbound") return Direction::outbound;
  if (s == "both") return Direction::both;
  invalid("unknown censor direction '" + s + "'");
}

const char* direction_name(Direction d) {
  switch (d) {
    case Direction::inbound: return "inbound";
    case Direction::outbound: return "outbound";
    case Direction::both: return "both";
  }
  return "both";
}

Censor parse_censor(const json& j) {
  Censor c;
  c.asn = j.at("asn").get<Asn>();
  c.router_index = j.value("router_index", 0);
  c.direction = parse_direction(j.value("direction", std::string("both")));
  const json& bl = j.at("blocklist");
  if (bl.is_array()) {
    c.blocked_domains = bl.get<std::vector<std::string>>();
  } else {
    c.blocked_domains = bl.value("domains", std::vector<std::string>{});
    c.blocked_keywords = bl.value("keywords", std::vector<std::string>{});
  }
  const json& action = j.at("action");
  std::string type = action.is_string() ? action.get<std::string>()
                                        : action.at("type").get<std::string>();
  if (type == "drop") {
    c.action = CensorAction::drop;
  } else if (type == "rst") {
    c.action = CensorAction::rst;
  } else if (type == "blockpage") {
    c.action = CensorAction::blockpage;
    const json& src = action.is_object() ? action : j;
    c.signature_id = src.value("signature_id", std::string());
    c.body = src.value("body", std::string());
  } else {
    invalid("unknown censor action '" + type + "'");
  }
  c.ttl_copy = j.value("ttl_copy", false);
  std::string mode = j.value("ttl_copy_mode", std::string("remaining"));
  if (mode == "remaining") {
    c.ttl_copy_mode = TtlCopyMode::remaining;
  } else if (mode == "original") {
    c.ttl_copy_mode = TtlCopyMode::original;
  } else {
    invalid("unknown ttl_copy_mode '" + mode + "'");
  }
  return c;
}

json censor_to_json(const Censor& c) {
  json j{{"asn", c.asn},
         {"router_index", c.router_index},
         {"direction", direction_name(c.direction)},
         {"blocklist", {{"domains", c.blocked_domains}, {"keywords", c.blocked_keywords}}},
         {"ttl_copy", c.ttl_copy},
         {"ttl_copy_mode", c.ttl_copy_mode == TtlCopyMode::remaining ? "remaining" : "original"}};
  switch (c.action) {
    case CensorAction::drop: j["action"] = "drop"; break;
    case CensorAction::rst: j["action"] = "rst"; break;
    case CensorAction::blockpage:
      j["action"] = {{"type", "blockpage"}, {"signature_id", c.signature_id}, {"body", c.body}};
      break;
  }
  return j;
}

std::vector<HostPlacement> parse_hosts(const json& arr) {
  std::vector<HostPlacement> out;
  for (const auto& h : arr) out.push_back({h.at("id").get<std::string>(), h.at("asn").get<Asn>()});
  return out;
}

bool host_matches_domain(std::string_view host, std::string_view domain) {
  if (http::iequals(host, domain)) return true;
  return host.size() > domain.size() &&
         http::iequals(host.substr(host.size() - domain.size()), domain) &&
         host[host.size() - domain.size() - 1] == '.';
}

bool direction_applies(Direction d, bool src_inside, bool dst_inside) {
  if (src_inside && dst_inside) return false;  // internal traffic
  if (!src_inside && !dst_inside) return true;  // transit
  if (src_inside) return d != Direction::inbound;
  return d != Direction::outbound;
}

}  // namespace

bool AsNode::responds(int router_index) const {
  if (router_index < 0 || static_cast<std::size_t>(router_index) >= router_responds.size()) {
    return true;
  }
  return router_responds[static_cast<std::size_t>(router_index)];
}

Ipv4 AsNode::router_ip(int router_index) const {
  if (router_index >= 0 && static_cast<std::size_t>(router_index) < router_ips.size()) {
    return router_ips[static_cast<std::size_t>(router_index)];
  }
  return Ipv4((10u << 24) | ((asn & 0xffffu) << 8) |
              static_cast<std::uint32_t>((router_index + 1) & 0xff));
}

bool Censor::triggers(std::string_view host, std::string_view request_line) const {
  for (const auto& d : blocked_domains) {
    if (host_matches_domain(host, d)) return true;
  }
  for (const auto& kw : blocked_keywords) {
    if (http::icontains(host, kw) || http::icontains(request_line, kw)) return true;
  }
  return false;
}

std::string Censor::blockpage_response() const {
  if (body.starts_with("HTTP/")) return body;
  return http::build_response(200, "OK", "text/html", body);
}

Topology Topology::from_json_text(std::string_view text) {
  Topology t;
  try {
    json j = json::parse(text);
    for (const auto& n : j.at("nodes")) {
      AsNode node;
      node.asn = n.at("asn").get<Asn>();
      node.role = parse_role(n.value("role", std::string("transit")));
      node.router_count = n.value("router_count", 1);
      node.router_responds = n.value("router_responds", std::vector<bool>{});
      for (const auto& ip : n.value("router_ips", std::vector<std::string>{})) {
        auto parsed = Ipv4::parse(ip);
        if (!parsed) invalid("bad router ip '" + ip + "'");
        node.router_ips.push_back(*parsed);
      }
      node.country = n.value("country", std::string());
      t.nodes.push_back(std::move(node));
    }
    for (const auto& l : j.value("links", json::array())) {
      t.links.push_back({l.at("a").get<Asn>(), l.at("b").get<Asn>(),
                         parse_relation(l.at("relation").get<std::string>())});
    }
    for (const auto& l : j.value("direct_peering", json::array())) {
      t.links.push_back({l.at("a").get<Asn>(), l.at("b").get<Asn>(), Relation::peer});
    }
    for (const auto& c : j.value("censors", json::array())) t.censors.push_back(parse_censor(c));
    for (const auto& c : j.value("caches", json::array())) {
      t.caches.push_back({c.at("asn").get<Asn>(), c.value("router_index", 0)});
    }
    t.vps = parse_hosts(j.value("vps", json::array()));
    t.servers = parse_hosts(j.value("servers", json::array()));
    t.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    invalid(std::string("topology json: ") + e.what());
  }
  t.validate();
  return t;
}

Topology Topology::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot read topology " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string Topology::to_json_text() const {
  json j;
  j["seed"] = seed;
  j["nodes"] = json::array();
  for (const auto& n : nodes) {
    json node{{"asn", n.asn}, {"role", role_name(n.role)}, {"router_count", n.router_count}};
    if (!n.router_responds.empty()) node["router_responds"] = n.router_responds;
    if (!n.router_ips.empty()) {
      std::vector<std::string> ips;
      for (auto ip : n.router_ips) ips.push_back(ip.str());
      node["router_ips"] = ips;
    }
    if (!n.country.empty()) node["country"] = n.country;
    j["nodes"].push_back(std::move(node));
  }
  j["links"] = json::array();
  for (const auto& l : links) {
    j["links"].push_back({{"a", l.a}, {"b", l.b}, {"relation", relation_name(l.relation)}});
  }
  j["censors"] = json::array();
  for (const auto& c : censors) j["censors"].push_back(censor_to_json(c));
  j["caches"] = json::array();
  for (const auto& c : caches) {
    j["caches"].push_back({{"asn", c.asn}, {"router_index", c.router_index}});
  }
  j["vps"] = json::array();
  for (const auto& h : vps) j["vps"].push_back({{"id", h.id}, {"asn", h.asn}});
  j["servers"] = json::array();
  for (const auto& h : servers) j["servers"].push_back({{"id", h.id}, {"asn", h.asn}});
  return j.dump(2);
}

const AsNode* Topology::node(Asn asn) const {
  auto it = std::find_if(nodes.begin(), nodes.end(),
                         [&](const AsNode& n) { return n.asn == asn; });
  return it == nodes.end() ? nullptr : &*it;
}

std::optional<Asn> Topology::vp_asn(const std::string& id) const {
  for (const auto& h : vps) {
    if (h.id == id) return h.asn;
  }
  return std::nullopt;
}

std::optional<Asn> Topology::server_asn(const std::string& id) const {
  for (const auto& h : servers) {
    if (h.id == id) return h.asn;
  }
  return std::nullopt;
}

std::optional<Relation> Topology::relation(Asn a, Asn b) const {
  for (const auto& l : links) {
    if (l.a == a && l.b == b) return l.relation;
    if (l.a == b && l.b == a) return inverse(l.relation);
  }
  return std::nullopt;
}

std::vector<Asn> Topology::neighbors(Asn asn, Relation as_seen_from_asn) const {
  std::vector<Asn> out;
  for (const auto& l : links) {
    if (l.a == asn && l.relation == as_seen_from_asn) out.push_back(l.b);
    if (l.b == asn && inverse(l.relation) == as_seen_from_asn) out.push_back(l.a);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string Topology::region(Asn asn) const {
  const AsNode* n = node(asn);
  if (n && !n->country.empty()) return n->country;
  return "AS" + std::to_string(asn);
}

void Topology::validate() const {
  std::set<Asn> asns;
  for (const auto& n : nodes) {
    if (n.asn == 0) invalid("node asn must be positive");
    if (!asns.insert(n.asn).second) invalid("duplicate node asn " + std::to_string(n.asn));
    if (n.router_count < 1 || n.router_count > 254) {
      invalid("AS " + std::to_string(n.asn) + " router_count must be in [1, 254]");
    }
    if (!n.router_responds.empty() &&
        n.router_responds.size() != static_cast<std::size_t>(n.router_count)) {
      invalid("AS " + std::to_string(n.asn) + " router_responds length mismatch");
    }
    if (!n.router_ips.empty() &&
        n.router_ips.size() != static_cast<std::size_t>(n.router_count)) {
      invalid("AS " + std::to_string(n.asn) + " router_ips length mismatch");
    }
  }
  std::set<std::pair<Asn, Asn>> pairs;
  for (const auto& l : links) {
    if (!asns.contains(l.a) || !asns.contains(l.b)) {
      invalid("link references unknown AS " + std::to_string(l.a) + "/" + std::to_string(l.b));
    }
    if (l.a == l.b) invalid("self link on AS " + std::to_string(l.a));
    if (!pairs.insert(std::minmax(l.a, l.b)).second) {
      invalid("more than one link between AS " + std::to_string(l.a) + " and AS " +
              std::to_string(l.b));
    }
  }
  auto check_box = [&](Asn asn, int router_index, const char* what) {
    const AsNode* n = node(asn);
    if (!n) invalid(std::string(what) + " in unknown AS " + std::to_string(asn));
    if (router_index < 0 || router_index >= n->router_count) {
      invalid(std::string(what) + " router_index out of range in AS " + std::to_string(asn));
    }
  };
  for (const auto& c : censors) {
    check_box(c.asn, c.router_index, "censor");
    if (c.blocked_domains.empty() && c.blocked_keywords.empty()) {
      invalid("censor in AS " + std::to_string(c.asn) + " has an empty blocklist");
    }
  }
  for (const auto& c : caches) check_box(c.asn, c.router_index, "cache");
  std::set<std::string> ids;
  for (const auto& h : vps) {
    if (!asns.contains(h.asn)) invalid("vp " + h.id + " hosted in unknown AS");
    if (!ids.insert("vp:" + h.id).second) invalid("duplicate vp " + h.id);
  }
  for (const auto& h : servers) {
    if (!asns.contains(h.asn)) invalid("server " + h.id + " hosted in unknown AS");
    if (!ids.insert("server:" + h.id).second) invalid("duplicate server " + h.id);
  }
  std::set<Asn> dsts;
  for (const auto& s : servers) dsts.insert(s.asn);
  for (Asn dst : dsts) {
    auto table = routes_to(*this, dst);
    for (const auto& v : vps) {
      if (!table.contains(v.asn)) {
        invalid("no valley-free path from vp " + v.id + " (AS " + std::to_string(v.asn) +
                ") to AS " + std::to_string(dst));
      }
    }
  }
}

std::map<Asn, std::vector<Asn>> routes_to(const Topology& topo, Asn dst) {
  std::map<Asn, std::vector<Asn>> best;
  if (!topo.node(dst)) return best;
  best[dst] = {dst};

  // Customer routes: breadth-first up the provider hierarchy. Within a level
  // ASes are visited in ascending order, so the lowest next hop wins ties.
  std::set<Asn> customer_routed{dst};
  std::vector<Asn> level{dst};
  while (!level.empty()) {
    std::vector<Asn> next;
    for (Asn v : level) {
      for (Asn p : topo.neighbors(v, Relation::customer_of)) {
        if (best.contains(p)) continue;
        std::vector<Asn> path{p};
        path.insert(path.end(), best[v].begin(), best[v].end());
        best[p] = std::move(path);
        customer_routed.insert(p);
        next.push_back(p);
      }
    }
    std::sort(next.begin(), next.end());
    level = std::move(next);
  }

  // Peer routes: peers only export customer routes (or their own prefix).
  std::map<Asn, std::vector<Asn>> peer_routes;
  for (const auto& n : topo.nodes) {
    if (best.contains(n.asn)) continue;
    const std::vector<Asn>* chosen = nullptr;
    Asn chosen_hop = 0;
    for (Asn q : topo.neighbors(n.asn, Relation::peer)) {
      if (!customer_routed.contains(q)) continue;
      const auto& r = best[q];
      if (!chosen || r.size() < chosen->size()) {
        chosen = &r;
        chosen_hop = q;
      }
    }
    if (chosen) {
      std::vector<Asn> path{n.asn};
      path.insert(path.end(), chosen->begin(), chosen->end());
      peer_routes[n.asn] = std::move(path);
    }
    (void)chosen_hop;
  }
  for (auto& [asn, path] : peer_routes) best[asn] = std::move(path);

  // Provider routes: providers export everything to customers. Settle the
  // shortest candidates first so every assignment is final.
  for (;;) {
    std::size_t shortest = std::numeric_limits<std::size_t>::max();
    std::map<Asn, Asn> candidate;
    for (const auto& n : topo.nodes) {
      if (best.contains(n.asn)) continue;
      std::size_t len = std::numeric_limits<std::size_t>::max();
      Asn hop = 0;
      for (Asn q : topo.neighbors(n.asn, Relation::customer_of)) {
        auto it = best.find(q);
        if (it == best.end()) continue;
        if (std::find(it->second.begin(), it->second.end(), n.asn) != it->second.end()) continue;
        if (it->second.size() < len) {
          len = it->second.size();
          hop = q;
        }
      }
      if (hop != 0) {
        candidate[n.asn] = hop;
        shortest = std::min(shortest, len);
      }
    }
    if (candidate.empty()) break;
    std::vector<std::pair<Asn, std::vector<Asn>>> settled;
    for (auto [asn, hop] : candidate) {
      if (best[hop].size() != shortest) continue;
      std::vector<Asn> path{asn};
      path.insert(path.end(), best[hop].begin(), best[hop].end());
      settled.emplace_back(asn, std::move(path));
    }
    for (auto& [asn, path] : settled) best[asn] = std::move(path);
  }
  return best;
}

std::vector<Asn> route(const Topology& topo, Asn src, Asn dst) {
  if (!topo.node(src) || !topo.node(dst)) {
    throw Error(ErrorCode::no_valley_free_path,
                "unknown AS in route query " + std::to_string(src) + "->" + std::to_string(dst));
  }
  auto table = routes_to(topo, dst);
  auto it = table.find(src);
  if (it == table.end()) {
    throw Error(ErrorCode::no_valley_free_path,
                "no valley-free path " + std::to_string(src) + "->" + std::to_string(dst));
  }
  return it->second;
}

bool is_valley_free(const Topology& topo, const std::vector<Asn>& path) {
  // 0: still climbing, 1: crossed the peak (peer link or first descent).
  int phase = 0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    auto rel = topo.relation(path[i], path[i + 1]);
    if (!rel) return false;
    switch (*rel) {
      case Relation::customer_of:
        if (phase != 0) return false;
        break;
      case Relation::peer:
        if (phase != 0) return false;
        phase = 1;
        break;
      case Relation::provider_of:
        phase = 1;
        break;
    }
  }
  return true;
}

std::vector<RouterHop> hop_chain(const Topology& topo, const std::vector<Asn>& as_path) {
  std::vector<RouterHop> chain;
  int hop = 0;
  for (Asn asn : as_path) {
    const AsNode* n = topo.node(asn);
    if (!n) continue;
    for (int i = 0; i < n->router_count; ++i) {
      chain.push_back({++hop, asn, i, n->router_ip(i), n->responds(i)});
    }
  }
  return chain;
}

DeliveryEvent deliver(const Topology& topo, const std::vector<RouterHop>& chain,
                      const Packet& packet, CacheState& caches) {
  using Kind = DeliveryEvent::Kind;
  using Cause = DeliveryEvent::DropCause;
  const std::string host = http::to_lower(http::request_host(packet.http_payload).value_or(""));
  const std::string line = http::request_line(packet.http_payload);
  const std::string src_region = topo.region(packet.src_asn);
  const std::string dst_region = topo.region(packet.dst_asn);

  std::vector<std::size_t> passed_caches;
  for (const RouterHop& hop : chain) {
    // Middleboxes tap the packet as it arrives, before TTL processing.
    for (std::size_t ci = 0; ci < topo.caches.size(); ++ci) {
      const auto& cache = topo.caches[ci];
      if (cache.asn != hop.asn || cache.router_index != hop.router_index) continue;
      auto it = caches.stored.find({ci, host});
      if (it != caches.stored.end()) {
        return {Kind::cached_response, Cause::none, hop, it->second, hop.hop};
      }
      passed_caches.push_back(ci);
    }
    for (const auto& censor : topo.censors) {
      if (censor.asn != hop.asn || censor.router_index != hop.router_index) continue;
      const std::string region = topo.region(censor.asn);
      if (!direction_applies(censor.direction, src_region == region, dst_region == region)) {
        continue;
      }
      if (!censor.triggers(host, line)) continue;
      if (censor.action == CensorAction::drop) {
        return {Kind::dropped, Cause::censor, hop, {}, hop.hop};
      }
      int injected_ttl = kDefaultPacketTtl;
      if (censor.ttl_copy) {
        injected_ttl = censor.ttl_copy_mode == TtlCopyMode::remaining
                           ? packet.ttl - hop.hop
                           : packet.ttl;
      }
      // The injected packet has to cover the hop.hop links back to the client.
      if (injected_ttl < hop.hop) {
        return {Kind::dropped, Cause::injected_expired, hop, {}, hop.hop};
      }
      if (censor.action == CensorAction::rst) {
        return {Kind::injected_rst, Cause::none, hop, {}, hop.hop};
      }
      return {Kind::injected_blockpage, Cause::none, hop, censor.blockpage_response(), hop.hop};
    }
    if (packet.ttl == hop.hop) {
      if (hop.responds) return {Kind::icmp_ttl_exceeded, Cause::none, hop, {}, hop.hop};
      return {Kind::dropped, Cause::silent_router, hop, {}, hop.hop};
    }
  }
  const int server_hop = static_cast<int>(chain.size()) + 1;
  for (std::size_t ci : passed_caches) caches.stored[{ci, host}] = packet.server_response;
  return {Kind::delivered_to_server, Cause::none, std::nullopt, packet.server_response,
          server_hop};
}

DeliveryEvent deliver(const Topology& topo, const Packet& packet, CacheState& caches) {
  return deliver(topo, hop_chain(topo, route(topo, packet.src_asn, packet.dst_asn)), packet,
                 caches);
}

SimTransport::SimTransport(std::shared_ptr<const Topology> topo,
                           std::string sentinel_description)
    : topo_(std::move(topo)),
      description_(sentinel_description.empty() ? SentinelSettings{}.description
                                                 : std::move(sentinel_description)) {}

SimTransport::Shard& SimTransport::shard(const std::string& vp_id) {
  std::lock_guard lock(mu_);
  auto& s = shards_[vp_id];
  if (!s) s = std::make_unique<Shard>();
  return *s;
}

const std::string& SimTransport::server_response(const ControlServer& server) {
  std::lock_guard lock(mu_);
  auto it = responses_.find(server.id);
  if (it == responses_.end()) {
    auto payload = sentinel::render_payload(server, description_);
    it = responses_.emplace(server.id, sentinel::response_bytes(payload)).first;
  }
  return it->second;
}

const std::vector<RouterHop>& SimTransport::chain(Asn src, Asn dst) {
  std::lock_guard lock(mu_);
  auto it = chains_.find({src, dst});
  if (it == chains_.end()) {
    it = chains_.emplace(std::make_pair(src, dst), hop_chain(*topo_, route(*topo_, src, dst)))
             .first;
  }
  return it->second;
}

ExchangeResult SimTransport::exchange(const VantagePoint& vp, const ControlServer& server,
                                      std::string_view request, Millis timeout,
                                      std::optional<int> ttl) {
  ExchangeResult res;
  auto src = topo_->vp_asn(vp.id);
  auto dst = topo_->server_asn(server.id);
  Shard& sh = shard(vp.id);
  std::lock_guard lock(sh.mu);
  if (!src || !dst) {
    res.kind = ExchangeResult::Kind::setup_failed;
    res.error = !src ? "vp " + vp.id + " not placed in topology"
                     : "server " + server.id + " not placed in topology";
    return res;
  }
  const std::string& server_bytes = server_response(server);
  Packet packet{*src, *dst, ttl.value_or(kDefaultPacketTtl), std::string(request), server_bytes};
  const DeliveryEvent ev = deliver(*topo_, chain(*src, *dst), packet, sh.caches);

  res.elapsed = Millis(2 * ev.round_trip_hops * kPerHopLatency.count());
  if (ev.at) res.responder = ev.at->ip;
  switch (ev.kind) {
    case DeliveryEvent::Kind::icmp_ttl_exceeded:
      res.kind = ExchangeResult::Kind::ttl_exceeded;
      break;
    case DeliveryEvent::Kind::injected_rst:
      res.kind = ExchangeResult::Kind::reset;
      break;
    case DeliveryEvent::Kind::injected_blockpage:
    case DeliveryEvent::Kind::cached_response:
    case DeliveryEvent::Kind::delivered_to_server:
      res.kind = ExchangeResult::Kind::response;
      res.bytes = ev.body;
      break;
    case DeliveryEvent::Kind::dropped:
      res.kind = ExchangeResult::Kind::timeout;
      res.responder.reset();
      break;
  }
  if (res.kind == ExchangeResult::Kind::timeout || res.elapsed > timeout) {
    res.kind = ExchangeResult::Kind::timeout;
    res.bytes.clear();
    res.responder.reset();
    res.elapsed = timeout;
  }
  sh.clock += res.elapsed.count();
  return res;
}

TimestampMs SimTransport::now_ms(const VantagePoint& vp) {
  Shard& sh = shard(vp.id);
  std::lock_guard lock(sh.mu);
  return sh.clock;
}

bool SimTransport::supports_ttl(const VantagePoint& vp) const { return !vp.via_socks(); }

std::vector<WhatIfEntry> whatif_min_censorship(const Topology& topo, const VantagePoint& vp,
                                               const std::vector<TestDomain>& domains,
                                               const std::vector<ControlServer>& candidates) {
  auto src = topo.vp_asn(vp.id);
  if (!src) src = vp.asn;
  std::vector<WhatIfEntry> out;
  for (const auto& server : candidates) {
    auto dst = topo.server_asn(server.id);
    if (!dst) {
      throw Error(ErrorCode::invalid_argument, "server " + server.id + " not placed in topology");
    }
    const auto chain = hop_chain(topo, route(topo, *src, *dst));
    std::size_t censored = 0;
    for (const auto& d : domains) {
      CacheState fresh;
      Packet p{*src, *dst, kDefaultPacketTtl, prober::build_request(d), {}};
      if (deliver(topo, chain, p, fresh).censored()) ++censored;
    }
    out.push_back({server.id, domains.empty() ? 0.0
                                              : static_cast<double>(censored) /
                                                    static_cast<double>(domains.size())});
  }
  std::stable_sort(out.begin(), out.end(), [](const WhatIfEntry& a, const WhatIfEntry& b) {
    if (a.censored_fraction != b.censored_fraction) return a.censored_fraction < b.censored_fraction;
    return a.server_id < b.server_id;
  });
  return out;
}

}  // namespace pathprobe::simnet
