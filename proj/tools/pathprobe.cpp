// pathprobe command line: sentinel servers, campaigns over the real network
// or a simulated topology, vetting, traceroute and reports.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "pathprobe/analysis.hpp"
#include "pathprobe/codec.hpp"
#include "pathprobe/harness.hpp"
#include "pathprobe/net.hpp"
#include "pathprobe/prober.hpp"
#include "pathprobe/sentinel.hpp"
#include "pathprobe/simnet.hpp"
#include "pathprobe/tracer.hpp"
#include "pathprobe/vetting.hpp"

using namespace pathprobe;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
};

void add_common(CLI::App* cmd, Common& c, bool config_required = true) {
  auto* opt = cmd->add_option("--config", c.config, "campaign config JSON");
  if (config_required) opt->required();
  cmd->add_option("--seed", c.seed, "seed; overrides the config");
  cmd->add_flag("--deterministic", c.deterministic, "refuse to run without a seed");
}

harness::LoadedConfig load(const Common& c) {
  return harness::load_config(c.config, {c.seed, c.deterministic});
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("pathprobe");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("PATHPROBE_LOG")) {
    spdlog::set_level(spdlog::level::from_str(env));
  }
}

const ControlServer& find_server(const CampaignConfig& c, const std::string& id) {
  for (const auto& s : c.servers) {
    if (s.id == id) return s;
  }
  if (c.reference_pair) {
    if (c.reference_pair->server_a.id == id) return c.reference_pair->server_a;
    if (c.reference_pair->server_b.id == id) return c.reference_pair->server_b;
  }
  throw Error(ErrorCode::config_invalid, "no server with id " + id);
}

const VantagePoint& find_vp(const CampaignConfig& c, const std::string& id) {
  for (const auto& v : c.vps) {
    if (v.id == id) return v;
  }
  for (const auto& v : c.vetting.clean_vps) {
    if (v.id == id) return v;
  }
  throw Error(ErrorCode::config_invalid, "no vantage point with id " + id);
}

prober::BlockpageSignatureDB signature_db(const CampaignConfig& c) {
  return c.signature_db_path.empty() ? prober::BlockpageSignatureDB{}
                                     : prober::BlockpageSignatureDB::load(c.signature_db_path);
}

std::unique_ptr<Transport> make_transport(const std::string& topology, const CampaignConfig& c) {
  if (topology.empty()) return std::make_unique<net::NetTransport>();
  auto topo = std::make_shared<const simnet::Topology>(simnet::Topology::load(topology));
  return std::make_unique<simnet::SimTransport>(topo, c.sentinel.description);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::io_error, "write failed for " + path);
}

int finish_run(const harness::RunSummary& s) {
  std::cout << "records: " << s.records << "\n"
            << "scheduled vps: " << s.scheduled_vps << " (discarded " << s.discarded_vps << ")\n"
            << "excluded vps: " << s.exclusions.size() << "\n"
            << "results: " << s.results_path << "\n"
            << "manifest: " << s.manifest_path << "\n";
  return s.completed ? harness::kExitOk : harness::kExitPartial;
}

// serve-sentinel

struct ServeArgs {
  Common common;
  std::string server_id;
  std::optional<std::uint16_t> port;
  std::optional<int> run_for_ms;
};

int cmd_serve(const ServeArgs& a) {
  const auto loaded = load(a.common);
  const auto& c = loaded.config;
  const ControlServer& server = find_server(c, a.server_id);
  auto payload = sentinel::render_payload(server, c.sentinel.description);

  fs::create_directories(c.sentinel.log_dir);
  const auto log_path = (fs::path(c.sentinel.log_dir) / (server.id + ".requests.jsonl")).string();
  sentinel::JsonlLogSink sink(log_path);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  const std::uint16_t port = a.port.value_or(c.sentinel.port.value_or(server.port));
  auto responder = sentinel::serve(c.sentinel.bind, port, std::move(payload), sink);
  std::cout << "serving " << server.id << " on " << c.sentinel.bind << ":" << responder->port()
            << ", log " << log_path << std::endl;

  if (a.run_for_ms) {
    timespec ts{*a.run_for_ms / 1000, (*a.run_for_ms % 1000) * 1000000L};
    sigtimedwait(&signals, nullptr, &ts);
  } else {
    int sig = 0;
    sigwait(&signals, &sig);
  }
  responder->shutdown();
  return harness::kExitOk;
}

// probe

struct ProbeArgs {
  Common common;
  std::string out;
  int epoch = 0;
  std::optional<int> parallel;
};

int cmd_probe(const ProbeArgs& a) {
  const auto loaded = load(a.common);
  net::NetTransport transport;
  harness::RunOptions opts;
  opts.results_path = a.out;
  opts.epoch = a.epoch;
  opts.parallel = a.parallel;
  opts.transport_name = "net";
  return finish_run(harness::run_campaign(loaded, transport, opts));
}

// sim

struct SimArgs {
  Common common;
  std::string topology;
  std::string out;
  int epoch = 0;
  std::optional<int> parallel;
  std::string whatif_vp;
};

int cmd_sim(const SimArgs& a) {
  auto topo = std::make_shared<const simnet::Topology>(simnet::Topology::load(a.topology));
  auto loaded = load(a.common);
  if (!loaded.config.seed) {
    // Token derivation follows the topology seed so reruns stay identical.
    loaded = harness::load_config(a.common.config, {topo->seed, a.common.deterministic});
  }
  const auto& c = loaded.config;

  if (!a.whatif_vp.empty()) {
    const auto& vp = find_vp(c, a.whatif_vp);
    std::cout << "server,censored_fraction\n";
    for (const auto& e : simnet::whatif_min_censorship(*topo, vp, prober::domains_for(vp, c.domains),
                                                       c.servers)) {
      std::cout << e.server_id << "," << analysis::format_pct(e.censored_fraction * 100.0) << "%\n";
    }
    return harness::kExitOk;
  }

  simnet::SimTransport transport(topo, c.sentinel.description);
  harness::RunOptions opts;
  opts.results_path = a.out;
  opts.epoch = a.epoch;
  opts.parallel = a.parallel;
  opts.transport_name = "sim";
  return finish_run(harness::run_campaign(loaded, transport, opts));
}

// vet

struct VetArgs {
  Common common;
  std::string mode;
  std::string topology;
  std::string in;
  std::string out;
};

int cmd_vet(const VetArgs& a) {
  const auto loaded = load(a.common);
  const auto& c = loaded.config;

  if (a.mode == "offline") {
    if (a.in.empty()) throw Error(ErrorCode::config_invalid, "--mode offline needs --in results.jsonl");
    if (c.legit_titles_path.empty()) {
      throw Error(ErrorCode::config_invalid, "--mode offline needs legit_titles in the config");
    }
    const auto excluded = vetting::offline_cache_check(harness::load_dataset(a.in),
                                                       vetting::LegitTitleTable::load(c.legit_titles_path));
    Json out = Json::array();
    for (const auto& id : excluded) {
      std::cout << id << "\texcluded: landing-page title replayed\n";
      out.push_back({{"vp_id", id}, {"keep", false}});
    }
    std::cout << excluded.size() << " vantage point(s) excluded\n";
    if (!a.out.empty()) write_text(a.out, out.dump(2) + "\n");
    return harness::kExitOk;
  }

  auto transport = make_transport(a.topology, c);
  if (a.mode == "online") {
    if (!c.reference_pair) throw Error(ErrorCode::config_invalid, "--mode online needs reference_pair");
    vetting::CacheTestOptions opts{c.probe.timeout, c.probe.max_attempts, c.probe.user_agent};
    const auto results = vetting::cache_test_all(c.vps, *c.reference_pair, *transport, opts,
                                                 c.probe.parallel);
    Json out = Json::array();
    int excluded = 0;
    for (const auto& r : results) {
      std::cout << r.vp_id << "\t" << (r.keep ? "keep" : "excluded: " + r.reason) << "\n";
      out.push_back({{"vp_id", r.vp_id}, {"keep", r.keep}, {"reason", r.reason}});
      if (!r.keep) ++excluded;
    }
    std::cout << excluded << " of " << results.size() << " vantage point(s) excluded\n";
    if (!a.out.empty()) write_text(a.out, out.dump(2) + "\n");
    return harness::kExitOk;
  }

  const auto& clean = c.vetting.clean_vps.empty() ? c.vps : c.vetting.clean_vps;
  vetting::InboundOptions opts;
  opts.min_clean_vps = c.vetting.min_clean_vps;
  opts.policy.parallel = c.probe.parallel;
  opts.policy.timeout = c.probe.timeout;
  opts.policy.max_attempts = c.probe.max_attempts;
  opts.policy.probe.user_agent = c.probe.user_agent;
  opts.policy.probe.campaign_id = c.campaign_id;
  const auto report = vetting::verify_inbound_clean(
      clean, c.servers, vetting::uncensored_for_country(c.domains), *transport, signature_db(c), opts);
  Json out = Json::array();
  for (const auto& s : report.servers) {
    std::cout << s.server_id << "\t" << (s.pass ? "pass" : "FAIL") << "\t" << s.probes << " probes\n";
    out.push_back({{"server_id", s.server_id}, {"pass", s.pass}, {"probes", s.probes}});
  }
  for (const auto& f : report.failures) {
    spdlog::warn("{} -> {} ({}): {}", f.vp_id, f.server_id, f.domain, describe(f.outcome));
  }
  if (!a.out.empty()) write_text(a.out, out.dump(2) + "\n");
  return report.all_pass() ? harness::kExitOk : harness::kExitPartial;
}

// trace

struct TraceArgs {
  Common common;
  std::string topology;
  std::string vp;
  std::string domain;
  std::string server;
  std::string ip_asn;
  std::string out;
  std::optional<int> max_ttl;
};

tracer::IpAsnTable table_from_topology(const simnet::Topology& topo) {
  tracer::IpAsnTable table;
  for (const auto& n : topo.nodes) {
    for (int i = 0; i < n.router_count; ++i) {
      table.add(n.router_ip(i), 32, {n.asn, n.country});
    }
  }
  return table;
}

int cmd_trace(const TraceArgs& a) {
  const auto loaded = load(a.common);
  const auto& c = loaded.config;
  const VantagePoint& vp = find_vp(c, a.vp);
  auto transport = make_transport(a.topology, c);

  TestDomain domain{a.domain, vp.country};
  for (const auto& d : c.domains) {
    if (d.name == a.domain) domain = d;
  }
  std::vector<ControlServer> servers;
  if (a.server.empty()) {
    servers = c.servers;
  } else {
    servers.push_back(find_server(c, a.server));
  }

  std::optional<tracer::IpAsnTable> table;
  if (!a.ip_asn.empty()) {
    table = tracer::IpAsnTable::load(a.ip_asn);
  } else if (!a.topology.empty()) {
    table = table_from_topology(static_cast<simnet::SimTransport&>(*transport).topology());
  }

  const auto db = signature_db(c);
  tracer::TraceOptions opts;
  opts.per_hop_timeout = c.traceroute.per_hop_timeout;
  opts.user_agent = c.probe.user_agent;
  std::vector<TraceResult> traces;
  for (const auto& server : servers) {
    ProbeSpec spec{vp, server, domain, c.probe.timeout, c.probe.max_attempts};
    auto r = tracer::app_traceroute(spec, a.max_ttl.value_or(c.traceroute.max_ttl), *transport, db, opts);
    traces.push_back(table ? tracer::annotate_asn(std::move(r), *table) : std::move(r));
  }
  std::cout << tracer::render_trace_table(traces, tracer::TableFormat::text);
  write_text(a.out, tracer::render_trace_table(traces, tracer::TableFormat::csv));
  return harness::kExitOk;
}

// analyze / report

struct AnalyzeArgs {
  std::string in;
  std::string out_dir;
  int min_as_vps = 80;
  int min_country_vps = 0;
  std::string granularity = "vp";
  bool latest_wins = false;
};

analysis::ReportOptions report_options(const AnalyzeArgs& a) {
  analysis::ReportOptions o;
  o.min_as_vps = a.min_as_vps;
  o.min_country_vps = a.min_country_vps;
  o.granularity = a.granularity == "request" ? analysis::Granularity::request
                                             : analysis::Granularity::vp;
  o.mode = a.latest_wins ? analysis::CubeMode::latest_wins : analysis::CubeMode::per_epoch;
  return o;
}

int cmd_analyze(const AnalyzeArgs& a) {
  const Dataset ds = harness::load_dataset(a.in);
  if (ds.records.empty()) throw Error(ErrorCode::no_records, "no records in " + a.in);
  for (const auto& path : analysis::write_reports(ds, a.out_dir, report_options(a))) {
    std::cout << path << "\n";
  }
  return harness::kExitOk;
}

int cmd_report(const AnalyzeArgs& a) {
  std::cout << harness::report(a.in, a.out_dir, report_options(a));
  return harness::kExitOk;
}

void add_analysis_options(CLI::App* cmd, AnalyzeArgs& a) {
  cmd->add_option("--in", a.in, "results JSONL")->required();
  cmd->add_option("--out-dir", a.out_dir, "report directory")->required();
  cmd->add_option("--min-as-vps", a.min_as_vps, "minimum VPs for an AS row")->capture_default_str();
  cmd->add_option("--min-country-vps", a.min_country_vps, "minimum VPs for the top-10 table")
      ->capture_default_str();
  cmd->add_option("--granularity", a.granularity, "vp or request")
      ->check(CLI::IsMember({"vp", "request"}))
      ->capture_default_str();
  cmd->add_flag("--latest-wins", a.latest_wins, "collapse epochs, keeping the newest verdict");
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"pathprobe: censorship path-diversity measurement"};
  app.require_subcommand(1);

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve-sentinel", "run one control server's sentinel responder");
  add_common(serve_cmd, serve.common);
  serve_cmd->add_option("--server-id", serve.server_id, "server id from the config")->required();
  serve_cmd->add_option("--port", serve.port, "listen port override");
  serve_cmd->add_option("--run-for-ms", serve.run_for_ms, "stop after this long");

  ProbeArgs probe;
  auto* probe_cmd = app.add_subcommand("probe", "run a campaign over the real network");
  add_common(probe_cmd, probe.common);
  probe_cmd->add_option("--out", probe.out, "results JSONL")->required();
  probe_cmd->add_option("--epoch", probe.epoch, "epoch number")->capture_default_str();
  probe_cmd->add_option("--parallel", probe.parallel, "concurrent vantage points");

  VetArgs vet;
  auto* vet_cmd = app.add_subcommand("vet", "vantage-point and control-server vetting");
  add_common(vet_cmd, vet.common);
  vet_cmd->add_option("--mode", vet.mode, "online, offline or inbound")
      ->required()
      ->check(CLI::IsMember({"online", "offline", "inbound"}));
  vet_cmd->add_option("--topology", vet.topology, "simulate over this topology");
  vet_cmd->add_option("--in", vet.in, "results JSONL (offline mode)");
  vet_cmd->add_option("--out", vet.out, "write the verdicts as JSON");

  TraceArgs trace;
  auto* trace_cmd = app.add_subcommand("trace", "application-layer traceroute");
  add_common(trace_cmd, trace.common);
  trace_cmd->add_option("--vp", trace.vp, "vantage point id")->required();
  trace_cmd->add_option("--domain", trace.domain, "domain to request")->required();
  trace_cmd->add_option("--server", trace.server, "server id (default: all)");
  trace_cmd->add_option("--out", trace.out, "CSV output")->required();
  trace_cmd->add_option("--topology", trace.topology, "simulate over this topology");
  trace_cmd->add_option("--ip-asn", trace.ip_asn, "IP to ASN table");
  trace_cmd->add_option("--max-ttl", trace.max_ttl, "override traceroute.max_ttl");

  SimArgs sim;
  auto* sim_cmd = app.add_subcommand("sim", "run a campaign over a simulated topology");
  sim_cmd->add_option("--campaign,--config", sim.common.config, "campaign config JSON")->required();
  sim_cmd->add_option("--seed", sim.common.seed, "seed; overrides the config");
  sim_cmd->add_flag("--deterministic", sim.common.deterministic, "refuse to run without a seed");
  sim_cmd->add_option("--topology", sim.topology, "topology JSON")->required();
  sim_cmd->add_option("--out", sim.out, "results JSONL");
  sim_cmd->add_option("--epoch", sim.epoch, "epoch number")->capture_default_str();
  sim_cmd->add_option("--parallel", sim.parallel, "concurrent vantage points");
  sim_cmd->add_option("--whatif-vp", sim.whatif_vp,
                      "rank servers by censored fraction for this VP instead of running");

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "write metric CSVs");
  add_analysis_options(analyze_cmd, analyze);

  AnalyzeArgs rep;
  auto* report_cmd = app.add_subcommand("report", "write metric CSVs and print the top countries");
  add_analysis_options(report_cmd, rep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? harness::kExitOk : harness::kExitConfigInvalid;
  }

  try {
    if (*serve_cmd) return cmd_serve(serve);
    if (*probe_cmd) return cmd_probe(probe);
    if (*vet_cmd) return cmd_vet(vet);
    if (*trace_cmd) return cmd_trace(trace);
    if (*sim_cmd) {
      if (sim.out.empty() && sim.whatif_vp.empty()) {
        spdlog::error("sim needs --out or --whatif-vp");
        return harness::kExitConfigInvalid;
      }
      return cmd_sim(sim);
    }
    if (*analyze_cmd) return cmd_analyze(analyze);
    if (*report_cmd) return cmd_report(rep);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return harness::exit_code_for(e);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return harness::kExitIoError;
  }
  return harness::kExitOk;
}
