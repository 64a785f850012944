// Acceptance checks. Prints one PASS/FAIL line per criterion; exits
// non-zero if any fail.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "pathprobe/analysis.hpp"
#include "pathprobe/digest.hpp"
#include "pathprobe/harness.hpp"
#include "pathprobe/prober.hpp"
#include "pathprobe/simnet.hpp"
#include "pathprobe/tracer.hpp"
#include "pathprobe/vetting.hpp"
#include "support/oracle.hpp"
#include "support/topogen.hpp"

using namespace pathprobe;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("pathprobe-acceptance-" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ProbeRecord make_record(const std::string& vp_id, const std::string& country, Asn asn,
                        const ControlServer& server, const std::string& domain, bool censored) {
  ProbeRecord r;
  r.campaign_id = "replay";
  r.spec.vp.id = vp_id;
  r.spec.vp.country = country;
  r.spec.vp.asn = asn;
  r.spec.server = server;
  r.spec.domain = {domain, country};
  if (censored) {
    r.final_outcome = outcome::Reset{};
    r.verdict = Verdict::censored(Mechanism::reset());
  } else {
    r.final_outcome = outcome::Sentinel{};
    r.verdict = Verdict::uncensored();
  }
  r.attempts.push_back({r.final_outcome, Millis(20)});
  return r;
}

ControlServer server(const std::string& id, const std::string& platform = "aws") {
  ControlServer s;
  s.id = id;
  s.platform = platform;
  s.region = id;
  return s;
}

// country table replay

struct CountryRow {
  std::string country;
  int total, censored, inconsistent;
  double pct_censored, pct_incons;
};

const std::vector<CountryRow> kCountryRows = {
    {"KZ", 1825, 1825, 894, 100.00, 48.99}, {"KW", 1338, 1336, 1254, 99.85, 93.86},
    {"CN", 1256, 1229, 1220, 97.85, 99.27}, {"PK", 1719, 1582, 1574, 92.03, 99.49},
    {"RU", 2003, 1721, 905, 85.92, 52.59},  {"BD", 1786, 1432, 1156, 80.18, 80.73},
    {"TH", 1925, 1182, 680, 61.40, 57.53},  {"VN", 1971, 1106, 830, 56.11, 75.05},
    {"IN", 2015, 1051, 992, 52.16, 94.39},  {"KR", 2596, 1300, 424, 50.08, 32.62},
};

Outcome criterion_country_table() {
  const auto t0 = Clock::now();
  const auto s1 = server("s1");
  const auto s2 = server("s2");
  std::vector<ProbeRecord> records;
  for (const auto& row : kCountryRows) {
    for (int i = 0; i < row.total; ++i) {
      const std::string id = row.country + "-" + std::to_string(i);
      const bool censored = i < row.censored;
      const bool inconsistent = i < row.inconsistent;
      records.push_back(make_record(id, row.country, 1, s1, "blocked.example", censored));
      records.push_back(
          make_record(id, row.country, 1, s2, "blocked.example", censored && !inconsistent));
    }
  }
  const auto cube = analysis::build_cube(Dataset::from_records(std::move(records)));
  Outcome out{true, {}};
  double worst = 0.0;
  for (const auto& row : kCountryRows) {
    const auto s = analysis::country_summary(cube, row.country);
    const double d1 = std::abs(s.censorship_pct - row.pct_censored);
    const double d2 = std::abs(s.inconsistency_pct.value_or(-1.0) - row.pct_incons);
    worst = std::max({worst, d1, d2});
    if (d1 > 0.01 || d2 > 0.01) {
      out.pass = false;
      out.detail += row.country + " " + analysis::format_pct(s.censorship_pct) + "/" +
                    analysis::format_pct(s.inconsistency_pct) + "; ";
    }
  }
  const auto order = analysis::country_summaries(cube);
  for (std::size_t i = 0; i < kCountryRows.size(); ++i) {
    if (order[i].country != kCountryRows[i].country) out.pass = false;
  }
  const double secs = seconds_since(t0);
  if (secs >= 1.0) out.pass = false;
  out.detail += "10 rows, max deviation " + fixed(worst, 4) + " pp, " + fixed(secs, 3) + " s";
  return out;
}

// AS table replay

struct AsRow {
  Asn asn;
  std::vector<double> per_server;
  double printed;
};

const std::vector<AsRow> kAsRows = {
    {137526, {39.3, 0.0, 0.0, 78.1, 39.3, 39.3}, 78.1},
    {135987, {1.2, 2.4, 76.8, 1.2, 2.4, 0.0}, 76.8},
    {1312934, {69.4, 9.4, 1.7, 71.1, 71.1, 70.6}, 69.4},
    {132298, {67.5, 67.2, 66.7, 68.2, 0.0, 65.3}, 68.2},
    {124946, {52.6, 52.8, 57.8, 64.9, 0.0, 51.9}, 64.9},
    {55492, {68.6, 15.5, 25.9, 77.3, 77.7, 77.7}, 62.1},
    {133227, {52.4, 54.4, 54.5, 61.2, 0.0, 52.7}, 61.2},
    {199634, {0.9, 59.8, 55.6, 36.8, 0.9, 0.4}, 59.4},
};

Outcome criterion_as_table() {
  const auto t0 = Clock::now();
  constexpr int kVps = 1000;
  const std::vector<std::string> locations = {"virginia", "california", "sao-paulo",
                                              "london",   "bahrain",    "cape-town"};
  std::vector<ProbeRecord> records;
  for (const auto& row : kAsRows) {
    for (int i = 0; i < kVps; ++i) {
      const std::string id = "AS" + std::to_string(row.asn) + "-" + std::to_string(i);
      for (std::size_t s = 0; s < locations.size(); ++s) {
        const int censored = static_cast<int>(std::lround(row.per_server[s] * kVps / 100.0));
        records.push_back(make_record(id, "BD", row.asn, server(locations[s]), "blocked.example",
                                      i < censored));
      }
    }
  }
  const auto cube = analysis::build_cube(Dataset::from_records(std::move(records)));
  const auto rows = analysis::as_inconsistency(cube, 80, analysis::Granularity::vp);
  Outcome out{rows.size() == kAsRows.size(), {}};
  double worst = 0.0;
  for (const auto& expect : kAsRows) {
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const analysis::AsSummary& a) { return a.asn == expect.asn; });
    if (it == rows.end()) {
      out.pass = false;
      out.detail += "AS" + std::to_string(expect.asn) + " missing; ";
      continue;
    }
    const double d = std::abs(it->inconsistency - expect.printed);
    worst = std::max(worst, d);
    if (d > 0.15) {
      out.pass = false;
      out.detail += "AS" + std::to_string(expect.asn) + " " + fixed(it->inconsistency, 1) + "; ";
    }
  }
  const double secs = seconds_since(t0);
  if (secs >= 1.0) out.pass = false;
  out.detail += "8 rows, max deviation " + fixed(worst, 3) +
                " pp (AS204457, AS57011 excluded), " + fixed(secs, 3) + " s";
  return out;
}

// platform table replay

struct PlatformRow {
  std::string country;
  double aws, gcp, azure, printed;
};

const std::vector<PlatformRow> kPlatformRows = {
    {"KR", 98.93, 32.21, 76.64, 66.72},
    {"TH", 92.14, 85.39, 44.11, 48.04},
    {"IN", 50.89, 18.57, 37.95, 32.32},
    {"RU", 88.41, 77.62, 89.01, 11.39},
};

Outcome criterion_platform_table() {
  const auto t0 = Clock::now();
  constexpr int kVps = 100;
  constexpr int kDomains = 100;  // 10,000 requests per platform
  std::vector<ProbeRecord> records;
  for (const auto& row : kPlatformRows) {
    const std::vector<std::pair<ControlServer, double>> platforms = {
        {server("aws-1", "aws"), row.aws},
        {server("gcp-1", "gcp"), row.gcp},
        {server("azure-1", "azure"), row.azure}};
    for (const auto& [srv, pct] : platforms) {
      const int censored = static_cast<int>(std::lround(pct * kVps * kDomains / 100.0));
      for (int i = 0; i < kVps; ++i) {
        for (int d = 0; d < kDomains; ++d) {
          records.push_back(make_record(row.country + "-" + std::to_string(i), row.country, 1, srv,
                                        "d" + std::to_string(d) + ".example",
                                        i * kDomains + d < censored));
        }
      }
    }
  }
  const auto cube = analysis::build_cube(Dataset::from_records(std::move(records)));
  Outcome out{true, {}};
  double worst = 0.0;
  for (const auto& row : kPlatformRows) {
    const auto s = analysis::hosting_inconsistency(cube, row.country);
    const double d = std::abs(s.inconsistency - row.printed);
    worst = std::max(worst, d);
    if (d > 0.15) {
      out.pass = false;
      out.detail += row.country + " " + fixed(s.inconsistency) + "; ";
    }
  }
  const double secs = seconds_since(t0);
  if (secs >= 1.0) out.pass = false;
  out.detail += "4 rows, max deviation " + fixed(worst, 3) + " pp, " + fixed(secs, 3) + " s";
  return out;
}

// Simulation suite (criteria 4 and 6)

struct SuiteResult {
  int topologies = 0;
  int cells = 0;
  int verdict_mismatches = 0;
  int route_mismatches = 0;
  int exclusion_checks = 0;
  int exclusion_mismatches = 0;
  int topologies_with_exclusions = 0;
  std::map<std::string, int> classes;  // oracle verdicts by description
  double seconds = 0.0;
  std::string first_problem;
};

SuiteResult run_suite(int count) {
  SuiteResult res;
  const auto t0 = Clock::now();
  const fs::path dir = scratch_dir("suite");
  for (int seed = 1; seed <= count; ++seed) {
    const auto sc = testsupport::random_scenario(static_cast<std::uint64_t>(seed));
    ++res.topologies;

    for (const auto& dst : sc.topo.nodes) {
      const auto expect = testsupport::oracle_routes(sc.topo, dst.asn);
      const auto got = simnet::routes_to(sc.topo, dst.asn);
      if (expect != got) {
        ++res.route_mismatches;
        if (res.first_problem.empty()) res.first_problem = "routes, seed " + std::to_string(seed);
      }
    }

    harness::LoadedConfig loaded{sc.config, "suite", dir};
    const std::string db_path = (dir / ("sig-" + std::to_string(seed) + ".json")).string();
    {
      Json sigs = Json::array();
      for (const auto& s : sc.signatures) {
        sigs.push_back({{"id", s.id}, {"kind", "substring"}, {"pattern", s.pattern}});
      }
      std::ofstream(db_path) << sigs.dump();
    }
    loaded.config.signature_db_path = db_path;
    simnet::SimTransport transport(std::make_shared<const simnet::Topology>(sc.topo));
    harness::RunOptions opts;
    opts.results_path = (dir / ("results-" + std::to_string(seed) + ".jsonl")).string();
    opts.transport_name = "sim";
    const auto summary = harness::run_campaign(loaded, transport, opts);

    const auto oracle = testsupport::oracle_campaign(sc.topo, sc.config);
    const auto file = harness::read_results(opts.results_path);
    std::map<testsupport::CellId, Verdict> got;
    for (const auto& l : file.lines) {
      got[{l.record.spec.vp.id, l.record.spec.server.id, l.record.spec.domain.name}] =
          l.record.verdict;
    }
    res.cells += static_cast<int>(oracle.verdicts.size());
    for (const auto& [cell, verdict] : oracle.verdicts) {
      std::string name = describe(verdict);
      if (verdict.mechanism && verdict.mechanism->kind == MechanismKind::blockpage) name = "censored(blockpage)";
      ++res.classes[name];
    }
    if (!summary.completed || got.size() != oracle.verdicts.size()) {
      ++res.verdict_mismatches;
      if (res.first_problem.empty()) res.first_problem = "cell count, seed " + std::to_string(seed);
    }
    for (const auto& [cell, verdict] : oracle.verdicts) {
      auto it = got.find(cell);
      if (it == got.end() || !(it->second == verdict)) {
        ++res.verdict_mismatches;
        if (res.first_problem.empty()) {
          res.first_problem = "seed " + std::to_string(seed) + " " + std::get<0>(cell) + "/" +
                              std::get<1>(cell) + "/" + std::get<2>(cell) + ": oracle " +
                              describe(verdict) + ", pipeline " +
                              (it == got.end() ? std::string("missing") : describe(it->second));
        }
      }
    }

    std::set<std::string> excluded;
    for (const auto& e : summary.exclusions) {
      if (e.reason == ExclusionReason::cache_online) excluded.insert(e.vp_id);
    }
    res.exclusion_checks += static_cast<int>(sc.config.vps.size());
    for (const auto& vp : sc.config.vps) {
      if (excluded.contains(vp.id) != oracle.excluded.contains(vp.id)) {
        ++res.exclusion_mismatches;
        if (res.first_problem.empty()) {
          res.first_problem = "exclusion of " + vp.id + ", seed " + std::to_string(seed);
        }
      }
    }
    if (!oracle.excluded.empty()) ++res.topologies_with_exclusions;
  }
  res.seconds = seconds_since(t0);
  return res;
}

Outcome criterion_suite(const SuiteResult& s) {
  Outcome out;
  out.pass = s.topologies >= 50 && s.verdict_mismatches == 0 && s.route_mismatches == 0 &&
             s.seconds < 30.0;
  out.detail = std::to_string(s.topologies) + " topologies, " + std::to_string(s.cells) +
               " cells, " + std::to_string(s.verdict_mismatches) + " verdict mismatches, " +
               std::to_string(s.route_mismatches) + " route mismatches, " + fixed(s.seconds, 2) +
               " s";
  std::string mix;
  for (const auto& [name, n] : s.classes) mix += (mix.empty() ? "" : ", ") + name + "=" + std::to_string(n);
  out.detail += " [" + mix + "]";
  if (!s.first_problem.empty()) out.detail += "; first: " + s.first_problem;
  return out;
}

// Retry policy (criterion 5)

simnet::Topology two_as(simnet::CensorAction action) {
  simnet::Topology t;
  t.nodes = {{1, simnet::AsRole::eyeball, 2, {}, {}, "KZ"}, {2, simnet::AsRole::cloud, 1, {}, {}, ""}};
  t.links = {{1, 2, simnet::Relation::customer_of}};
  simnet::Censor c;
  c.asn = 1;
  c.router_index = 1;
  c.blocked_domains = {"blocked.example"};
  c.action = action;
  t.censors = {c};
  t.vps = {{"vp1", 1}};
  t.servers = {{"s1", 2}};
  t.validate();
  return t;
}

Outcome criterion_retry() {
  const auto run = [](simnet::CensorAction action) {
    auto topo = std::make_shared<const simnet::Topology>(two_as(action));
    simnet::SimTransport transport(topo);
    auto c = testsupport::campaign_for(*topo, 5);
    VantagePoint vp;
    vp.id = "vp1";
    vp.country = "KZ";
    vp.asn = 1;
    ProbeSpec spec{vp, c.servers.front(), {"blocked.example", "KZ"}, Millis(5000), 5};
    const TimestampMs t0 = transport.now_ms(vp);
    auto rec = prober::probe(spec, prober::BlockpageSignatureDB{}, transport);
    return std::make_pair(rec, transport.now_ms(vp) - t0);
  };
  const auto [drop, drop_elapsed] = run(simnet::CensorAction::drop);
  const auto [rst, rst_elapsed] = run(simnet::CensorAction::rst);
  Outcome out;
  out.pass = drop.attempts.size() == 5 && drop_elapsed >= 25000 &&
             drop.verdict == Verdict::censored(Mechanism::drop()) && rst.attempts.size() == 1 &&
             rst.verdict == Verdict::censored(Mechanism::reset());
  out.detail = "drop: " + std::to_string(drop.attempts.size()) + " attempts, " +
               std::to_string(drop_elapsed) + " ms sim time, " + describe(drop.verdict) +
               "; rst: " + std::to_string(rst.attempts.size()) + " attempt, " +
               describe(rst.verdict);
  return out;
}

// Cache vetting (criterion 6)

simnet::Topology cache_topology(bool with_cache) {
  simnet::Topology t;
  t.nodes = {{10, simnet::AsRole::transit, 1, {}, {}, ""},
             {20, simnet::AsRole::eyeball, 2, {}, {}, "TH"},
             {31, simnet::AsRole::cloud, 1, {}, {}, ""},
             {32, simnet::AsRole::cloud, 1, {}, {}, ""}};
  t.links = {{20, 10, simnet::Relation::customer_of},
             {31, 10, simnet::Relation::customer_of},
             {32, 10, simnet::Relation::customer_of}};
  if (with_cache) t.caches = {{20, 1}};
  t.vps = {{"vp1", 20}};
  t.servers = {{"ref-a", 31}, {"ref-b", 32}};
  t.validate();
  return t;
}

Outcome criterion_cache(const SuiteResult& s) {
  const auto test = [](bool with_cache) {
    auto topo = std::make_shared<const simnet::Topology>(cache_topology(with_cache));
    simnet::SimTransport transport(topo);
    auto c = testsupport::campaign_for(*topo, 6);
    ReferenceServerPair pair{{"shared.example", "ZZ"}, c.servers[0], c.servers[1]};
    VantagePoint vp;
    vp.id = "vp1";
    vp.country = "TH";
    vp.asn = 20;
    return vetting::cache_test(vp, pair, transport);
  };
  const auto cached = test(true);
  const auto clean = test(false);
  Outcome out;
  out.pass = !cached.keep && clean.keep && s.exclusion_mismatches == 0 &&
             s.topologies_with_exclusions > 0;
  out.detail = std::string("with cache: ") + (cached.keep ? "kept" : "excluded") +
               ", without: " + (clean.keep ? "kept" : "excluded") + "; suite " +
               std::to_string(s.exclusion_checks - s.exclusion_mismatches) + "/" +
               std::to_string(s.exclusion_checks) + " VP decisions agree (" +
               std::to_string(s.topologies_with_exclusions) + " topologies with exclusions)";
  return out;
}

// Traceroute localisation (criterion 7)

simnet::Topology chain_topology(int censor_hop, bool ttl_copy) {
  simnet::Topology t;
  for (int i = 1; i <= 20; ++i) {
    t.nodes.push_back({static_cast<Asn>(i), simnet::AsRole::transit, 1, {}, {}, ""});
    if (i > 1) t.links.push_back({static_cast<Asn>(i - 1), static_cast<Asn>(i), simnet::Relation::customer_of});
  }
  t.nodes.push_back({21, simnet::AsRole::cloud, 1, {}, {}, ""});
  t.links.push_back({21, 20, simnet::Relation::customer_of});
  simnet::Censor c;
  c.asn = static_cast<Asn>(censor_hop);
  c.blocked_domains = {"blocked.example"};
  c.action = simnet::CensorAction::rst;
  c.ttl_copy = ttl_copy;
  c.ttl_copy_mode = simnet::TtlCopyMode::remaining;
  t.censors = {c};
  t.vps = {{"vp1", 1}};
  t.servers = {{"s1", 21}};
  t.validate();
  return t;
}

// Smallest TTL at which the injected reply makes it back to the client.
int sweep_oracle(int d, bool ttl_copy) {
  for (int ttl = 1; ttl <= tracer::kMaxTtlLimit; ++ttl) {
    if (ttl < d) continue;
    const int injected = ttl_copy ? ttl - d : simnet::kDefaultPacketTtl;
    if (injected >= d) return ttl;
  }
  return -1;
}

Outcome criterion_trace() {
  const auto t0 = Clock::now();
  Outcome out{true, {}};
  int checks = 0;
  for (int d = 1; d <= 15; ++d) {
    for (bool copy : {false, true}) {
      auto topo = std::make_shared<const simnet::Topology>(chain_topology(d, copy));
      simnet::SimTransport transport(topo);
      auto c = testsupport::campaign_for(*topo, 7);
      VantagePoint vp;
      vp.id = "vp1";
      vp.country = "KZ";
      vp.asn = 1;
      ProbeSpec spec{vp, c.servers.front(), {"blocked.example", "KZ"}, Millis(5000), 5};
      const auto r = tracer::app_traceroute(spec, 40, transport, prober::BlockpageSignatureDB{});
      const int expect = copy ? 2 * d : d;
      ++checks;
      if (!r.censor_hop || *r.censor_hop != expect || sweep_oracle(d, copy) != expect) {
        out.pass = false;
        out.detail += "d=" + std::to_string(d) + (copy ? " copy" : " normal") + " got " +
                      (r.censor_hop ? std::to_string(*r.censor_hop) : std::string("none")) + "; ";
      }
    }
  }
  const double secs = seconds_since(t0);
  if (secs >= 5.0) out.pass = false;
  out.detail += std::to_string(checks) + " traces (d=1..15, normal -> d, ttl-copy -> 2d), " +
                fixed(secs, 3) + " s";
  return out;
}

// Inbound verification (criterion 8)

simnet::Topology inbound_topology(bool censored) {
  simnet::Topology t;
  t.nodes = {{10, simnet::AsRole::transit, 1, {}, {}, ""},
             {20, simnet::AsRole::eyeball, 1, {}, {}, "US"},
             {21, simnet::AsRole::eyeball, 1, {}, {}, "DE"},
             {31, simnet::AsRole::cloud, 1, {}, {}, "SG"},
             {32, simnet::AsRole::cloud, 2, {}, {}, "IN"},
             {33, simnet::AsRole::cloud, 1, {}, {}, "BR"}};
  t.links = {{20, 10, simnet::Relation::customer_of},
             {21, 10, simnet::Relation::customer_of},
             {31, 10, simnet::Relation::customer_of},
             {32, 10, simnet::Relation::customer_of},
             {33, 10, simnet::Relation::customer_of}};
  if (censored) {
    simnet::Censor c;
    c.asn = 32;
    c.router_index = 0;
    c.direction = simnet::Direction::inbound;
    c.blocked_domains = {"news.example", "video.example"};
    c.action = simnet::CensorAction::rst;
    t.censors = {c};
  }
  t.vps = {{"clean-us", 20}, {"clean-de", 21}};
  t.servers = {{"s1", 31}, {"s2", 32}, {"s3", 33}};
  t.validate();
  return t;
}

Outcome criterion_inbound() {
  const auto check = [](bool censored) {
    auto topo = std::make_shared<const simnet::Topology>(inbound_topology(censored));
    simnet::SimTransport transport(topo);
    auto c = testsupport::campaign_for(*topo, 8);
    std::vector<VantagePoint> clean;
    for (const auto& [id, asn, country] : {std::tuple<std::string, Asn, std::string>{"clean-us", 20, "US"},
                                           {"clean-de", 21, "DE"}}) {
      VantagePoint vp;
      vp.id = id;
      vp.asn = asn;
      vp.country = country;
      clean.push_back(vp);
    }
    const std::vector<TestDomain> domains = {{"news.example", "IN"}, {"video.example", "CN"}};
    vetting::InboundOptions opts;
    opts.min_clean_vps = 2;
    return vetting::verify_inbound_clean(clean, c.servers, vetting::uncensored_for_country(domains),
                                         transport, prober::BlockpageSignatureDB{}, opts);
  };
  const auto bad = check(true);
  const auto good = check(false);
  const auto failing = bad.failing_servers();
  Outcome out;
  out.pass = failing == std::vector<std::string>{"s2"} && good.all_pass() && good.servers.size() == 3;
  std::string names;
  for (const auto& f : failing) names += (names.empty() ? "" : ",") + f;
  out.detail = "censored topology fails [" + names + "], clean topology " +
               (good.all_pass() ? "passes all " : "fails some of ") +
               std::to_string(good.servers.size()) + " servers";
  return out;
}

// Determinism (criterion 9)

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PATHPROBE_BIN) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string file_hash(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

Outcome criterion_determinism() {
  const fs::path dir = scratch_dir("determinism");
  const fs::path data = PATHPROBE_DATA_DIR;
  Outcome out{true, {}};
  std::vector<std::string> hashes;
  for (const std::string run : {"a", "b"}) {
    const auto results = dir / ("results-" + run + ".jsonl");
    const int rc = run_cli("sim --topology " + (data / "topology.json").string() + " --campaign " +
                           (data / "campaign.json").string() + " --seed 42 --deterministic --out " +
                           results.string());
    if (rc != 0 || !fs::exists(results)) {
      out.pass = false;
      out.detail += "run " + run + " exited " + std::to_string(rc) + "; ";
      continue;
    }
    hashes.push_back(file_hash(results));
  }
  // A generated scenario with caches and censors, at two parallelism levels.
  const auto sc = testsupport::random_scenario(9001, {8, 3, 6, 4, 2, 1.0, true});
  sc.write_files(dir / "gen");
  std::vector<std::string> gen_hashes;
  for (const std::string par : {"1", "4"}) {
    const auto results = dir / ("gen-" + par + ".jsonl");
    const int rc = run_cli("sim --topology " + (dir / "gen" / "topology.json").string() +
                           " --campaign " + (dir / "gen" / "campaign.json").string() +
                           " --seed 42 --parallel " + par + " --out " + results.string());
    if (rc != 0) {
      out.pass = false;
      out.detail += "generated run exited " + std::to_string(rc) + "; ";
      continue;
    }
    gen_hashes.push_back(file_hash(results));
  }
  out.pass = out.pass && hashes.size() == 2 && hashes[0] == hashes[1] && gen_hashes.size() == 2 &&
             gen_hashes[0] == gen_hashes[1];
  if (hashes.size() == 2) out.detail += "example sha256 " + hashes[0].substr(0, 16) + (hashes[0] == hashes[1] ? " == " : " != ") + hashes[1].substr(0, 16);
  if (gen_hashes.size() == 2) out.detail += std::string("; generated campaign ") + (gen_hashes[0] == gen_hashes[1] ? "identical" : "differs") + " across --parallel 1/4";
  return out;
}

// CDF (criterion 10)

Outcome criterion_cdf() {
  std::vector<double> values;
  for (int i = 0; i < 59; ++i) values.push_back(i * 75.0 / 58.0);
  for (int i = 0; i < 61; ++i) values.push_back(75.5 + i * 24.5 / 60.0);
  const auto series = analysis::cdf_series(values);
  const double at75 = analysis::cdf_at(series, 75.0);
  Outcome out;
  out.pass = values.size() == 120 && at75 < 0.5;
  out.detail = "120 values, 61 above 75: CDF(75) = " + fixed(at75, 4);
  return out;
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::off);
  struct Row {
    int id;
    std::string name;
    std::function<Outcome()> run;
  };
  SuiteResult suite;
  bool suite_ran = false;
  auto get_suite = [&]() -> const SuiteResult& {
    if (!suite_ran) {
      suite = run_suite(60);
      suite_ran = true;
    }
    return suite;
  };
  const std::vector<Row> rows = {
      {1, "country table replay", criterion_country_table},
      {2, "AS table replay", criterion_as_table},
      {3, "platform table replay", criterion_platform_table},
      {4, "simulation ground truth", [&] { return criterion_suite(get_suite()); }},
      {5, "retry policy", criterion_retry},
      {6, "cache vetting", [&] { return criterion_cache(get_suite()); }},
      {7, "traceroute localisation", criterion_trace},
      {8, "inbound verification", criterion_inbound},
      {9, "determinism", criterion_determinism},
      {10, "CDF sanity", criterion_cdf},
  };
  int failed = 0;
  for (const auto& row : rows) {
    Outcome o;
    try {
      o = row.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << row.id << ": " << row.name
              << " - " << o.detail << std::endl;
  }
  std::error_code ec;
  fs::remove_all(fs::temp_directory_path() / ("pathprobe-acceptance-" + std::to_string(::getpid())), ec);
  std::cout << (rows.size() - static_cast<std::size_t>(failed)) << "/" << rows.size()
            << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
