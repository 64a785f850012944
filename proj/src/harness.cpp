#include "pathprobe/harness.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "pathprobe/digest.hpp"
#include "pathprobe/prober.hpp"
#include "pathprobe/vetting.hpp"

namespace pathprobe::harness {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomically(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + tmp.string());
    out << bytes;
    out.flush();
    if (!out) throw Error(ErrorCode::io_error, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::io_error, "cannot rename onto " + path.string());
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::vector<TestDomain> parse_domains(const Json& j) {
  std::vector<TestDomain> out;
  if (j.is_array()) return j.get<std::vector<TestDomain>>();
  for (const auto& [country, names] : j.items()) {
    for (const auto& name : names) out.push_back({name.get<std::string>(), country});
  }
  return out;
}

VantagePoint parse_socks_endpoint(const Json& e) {
  const std::string endpoint = e.at("endpoint").get<std::string>();
  Socks5Access access;
  const auto colon = endpoint.rfind(':');
  access.host = endpoint.substr(0, colon);
  if (colon != std::string::npos) {
    access.port = static_cast<std::uint16_t>(std::stoul(endpoint.substr(colon + 1)));
  }
  if (e.contains("username")) {
    access.credentials =
        Socks5Credentials{e.at("username").get<std::string>(), e.value("password", std::string())};
  }
  VantagePoint vp;
  vp.id = e.value("id", "socks:" + endpoint);
  vp.address = e.contains("ip") ? e.at("ip").get<Ipv4>() : Ipv4{};
  vp.country = e.value("country", std::string());
  vp.asn = e.value("asn", Asn{0});
  vp.access = std::move(access);
  return vp;
}

std::vector<VantagePoint> parse_vps(const Json& j, const fs::path& base) {
  if (j.is_array()) return j.get<std::vector<VantagePoint>>();
  if (j.is_string()) {
    const auto text = read_file(resolve(base, j.get<std::string>()));
    return parse_vps(Json::parse(text), base);
  }
  if (j.is_object() && j.contains("socks_endpoints")) {
    std::vector<VantagePoint> out;
    for (const auto& e : j.at("socks_endpoints")) out.push_back(parse_socks_endpoint(e));
    return out;
  }
  throw Error(ErrorCode::config_invalid,
              "vps must be a list, a file path or {\"socks_endpoints\": [...]}");
}

std::string random_token() {
  std::random_device rd;
  std::uniform_int_distribution<int> nibble(0, 15);
  std::string out;
  for (int i = 0; i < 32; ++i) out += "0123456789abcdef"[nibble(rd)];
  return out;
}

Json manifest_json(const LoadedConfig& loaded, const RunOptions& options,
                   const RunSummary& s, const std::string& error) {
  Json exclusions = Json::array();
  int excluded_online = 0;
  for (const auto& e : s.exclusions) {
    exclusions.push_back({{"vp_id", e.vp_id}, {"reason", to_string(e.reason)}, {"detail", e.detail}});
    if (e.reason == ExclusionReason::cache_online) ++excluded_online;
  }
  Json m{{"schema_version", kSchemaVersion},
         {"campaign_id", loaded.config.campaign_id},
         {"config_hash", loaded.config_hash},
         {"epoch", options.epoch},
         {"transport", options.transport_name},
         {"results_file", fs::path(s.results_path).filename().string()},
         {"completed", s.completed},
         {"counts",
          {{"records", s.records},
           {"excluded", static_cast<int>(s.exclusions.size())},
           {"excluded_online", excluded_online},
           {"excluded_offline", static_cast<int>(s.exclusions.size()) - excluded_online},
           {"scheduled_vps", s.scheduled_vps},
           {"discarded_vps", s.discarded_vps}}},
         {"exclusions", std::move(exclusions)}};
  m["seed"] = loaded.config.seed ? Json(*loaded.config.seed) : Json(nullptr);
  if (!error.empty()) m["error"] = error;
  return m;
}

}  // namespace

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::io_error:
    case ErrorCode::bind_failure:
    case ErrorCode::schema_mismatch:
    case ErrorCode::no_records:
      return kExitIoError;
    default:
      return kExitConfigInvalid;
  }
}

std::string derive_token(std::uint64_t seed, const std::string& server_id) {
  return sha256_hex("pathprobe-token:" + std::to_string(seed) + ":" + server_id).substr(0, 32);
}

LoadedConfig load_config(const std::string& path, const LoadOptions& options) {
  const std::string text = read_file(path);
  fs::path base = fs::path(path).parent_path();
  if (base.empty()) base = ".";
  return parse_config(text, base, options);
}

LoadedConfig parse_config(std::string_view text, const fs::path& base_dir,
                          const LoadOptions& options) {
  LoadedConfig loaded;
  loaded.config_hash = sha256_hex(text);
  loaded.base_dir = base_dir;
  CampaignConfig& c = loaded.config;
  try {
    const Json j = Json::parse(text);
    c.campaign_id = j.value("campaign_id", std::string());
    if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
    if (options.seed_override) c.seed = options.seed_override;
    c.servers = j.value("servers", std::vector<ControlServer>{});
    if (j.contains("vps")) c.vps = parse_vps(j.at("vps"), base_dir);
    if (j.contains("domains")) c.domains = parse_domains(j.at("domains"));
    if (j.contains("reference_pair") && !j.at("reference_pair").is_null()) {
      const Json& rp = j.at("reference_pair");
      ReferenceServerPair pair;
      const Json& d = rp.at("shared_domain");
      pair.shared_domain = d.is_string() ? TestDomain{d.get<std::string>(), "ZZ"}
                                         : d.get<TestDomain>();
      pair.server_a = rp.at("server_a").get<ControlServer>();
      pair.server_b = rp.at("server_b").get<ControlServer>();
      c.reference_pair = std::move(pair);
    }
    c.legit_titles_path = resolve(base_dir, j.value("legit_titles", std::string())).string();
    c.signature_db_path = resolve(base_dir, j.value("signature_db", std::string())).string();
    if (j.contains("caps")) {
      c.caps.per_country_per_epoch =
          j.at("caps").value("per_country_per_epoch", c.caps.per_country_per_epoch);
    }
    if (j.contains("probe")) {
      const Json& p = j.at("probe");
      c.probe.timeout = Millis(p.value("timeout_ms", c.probe.timeout.count()));
      c.probe.max_attempts = p.value("max_attempts", c.probe.max_attempts);
      c.probe.parallel = p.value("parallel", c.probe.parallel);
      c.probe.user_agent = p.value("user_agent", c.probe.user_agent);
    }
    if (j.contains("traceroute")) {
      const Json& t = j.at("traceroute");
      c.traceroute.max_ttl = t.value("max_ttl", c.traceroute.max_ttl);
      c.traceroute.per_hop_timeout =
          Millis(t.value("per_hop_timeout_ms", c.traceroute.per_hop_timeout.count()));
    }
    if (j.contains("sentinel")) {
      const Json& s = j.at("sentinel");
      c.sentinel.description = s.value("description", c.sentinel.description);
      c.sentinel.bind = s.value("bind", c.sentinel.bind);
      if (s.contains("port")) c.sentinel.port = s.at("port").get<std::uint16_t>();
      c.sentinel.log_dir = resolve(base_dir, s.value("log_dir", std::string("."))).string();
    }
    if (j.contains("vetting")) {
      const Json& v = j.at("vetting");
      c.vetting.min_clean_vps = v.value("min_clean_vps", c.vetting.min_clean_vps);
      if (v.contains("clean_vps")) c.vetting.clean_vps = parse_vps(v.at("clean_vps"), base_dir);
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::config_invalid, std::string("config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::io_error) throw;
    throw Error(ErrorCode::config_invalid, std::string("config: ") + e.what());
  }

  if (options.deterministic && !c.seed) {
    throw Error(ErrorCode::config_invalid, "--deterministic needs a seed (config or --seed)");
  }
  auto fill_token = [&](ControlServer& s) {
    if (!s.sentinel_token.empty()) return;
    s.sentinel_token = c.seed ? derive_token(*c.seed, s.id) : random_token();
  };
  for (auto& s : c.servers) fill_token(s);
  if (c.reference_pair) {
    fill_token(c.reference_pair->server_a);
    fill_token(c.reference_pair->server_b);
  }

  std::vector<std::string> problems = validate_campaign(c);
  for (const auto& p : {c.legit_titles_path, c.signature_db_path}) {
    if (!p.empty() && !fs::exists(p)) problems.push_back("referenced file does not exist: " + p);
  }
  if (!problems.empty()) {
    std::string msg = "invalid campaign config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw Error(ErrorCode::config_invalid, msg);
  }
  return loaded;
}

std::string encode_line(const ResultLine& line) {
  Json j = line.extra.is_object() ? line.extra : Json::object();
  const Json known = line.record;
  for (const auto& [k, v] : known.items()) j[k] = v;
  return j.dump(-1, ' ', false, Json::error_handler_t::replace);
}

ResultLine decode_line(std::string_view text) {
  Json j = Json::parse(text);
  if (!j.is_object()) throw Error(ErrorCode::schema_mismatch, "result line is not an object");
  const int version = j.value("schema_version", -1);
  if (version != kSchemaVersion) {
    throw Error(ErrorCode::schema_mismatch,
                "results schema_version " + std::to_string(version) +
                    " is not supported; this build reads schema_version " +
                    std::to_string(kSchemaVersion));
  }
  ResultLine line;
  line.record = j.get<ProbeRecord>();
  const Json known = line.record;
  for (const auto& field : known.items()) j.erase(field.key());
  line.extra = std::move(j);
  return line;
}

ResultsFile read_results(const std::string& path) {
  const std::string text = read_file(path);
  ResultsFile out;
  std::size_t pos = 0;
  int lineno = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    const bool last_unterminated = eol == std::string::npos;
    std::string_view line(text.data() + pos, (last_unterminated ? text.size() : eol) - pos);
    pos = last_unterminated ? text.size() : eol + 1;
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.lines.push_back(decode_line(line));
    } catch (const Json::exception& e) {
      if (last_unterminated) {
        spdlog::warn("{}: skipping truncated final line {}", path, lineno);
        ++out.skipped_truncated;
        continue;
      }
      throw Error(ErrorCode::schema_mismatch,
                  path + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_results(const std::string& path, const std::vector<ResultLine>& lines) {
  std::string bytes;
  for (const auto& l : lines) bytes += encode_line(l) + "\n";
  write_file_atomically(path, bytes);
}

Dataset load_dataset(const std::string& path) {
  auto file = read_results(path);
  std::vector<ProbeRecord> records;
  records.reserve(file.lines.size());
  for (auto& l : file.lines) records.push_back(std::move(l.record));
  return Dataset::from_records(std::move(records));
}

void save_dataset(const std::string& path, const Dataset& dataset) {
  std::vector<ResultLine> lines;
  for (const auto& r : dataset.records) {
    ResultLine l{r, Json::object()};
    auto it = dataset.excluded_vps.find(r.spec.vp.id);
    if (it != dataset.excluded_vps.end()) {
      const std::string f(it->second == ExclusionReason::cache_online ? flag::kExcludedCacheOnline
                                                                      : flag::kExcludedCacheOffline);
      if (!l.record.has_flag(f)) l.record.flags.push_back(f);
    }
    lines.push_back(std::move(l));
  }
  write_results(path, lines);
}

RunSummary run_campaign(const LoadedConfig& loaded, Transport& transport,
                        const RunOptions& options) {
  const CampaignConfig& c = loaded.config;
  RunSummary summary;
  summary.results_path = options.results_path;
  summary.manifest_path =
      options.manifest_path.empty() ? options.results_path + ".manifest.json" : options.manifest_path;
  const std::string partial_path = options.results_path + ".partial";

  const auto db = c.signature_db_path.empty() ? prober::BlockpageSignatureDB{}
                                              : prober::BlockpageSignatureDB::load(c.signature_db_path);
  const auto titles = c.legit_titles_path.empty() ? vetting::LegitTitleTable{}
                                                  : vetting::LegitTitleTable::load(c.legit_titles_path);
  const int parallel = options.parallel.value_or(c.probe.parallel);

  auto schedule = prober::schedule_vps(c.vps, c.caps.per_country_per_epoch);
  summary.scheduled_vps = static_cast<int>(schedule.scheduled.size());
  summary.discarded_vps = static_cast<int>(schedule.discarded.size());

  std::map<std::string, ExclusionNote> excluded;
  if (c.reference_pair) {
    vetting::CacheTestOptions vopts{c.probe.timeout, c.probe.max_attempts, c.probe.user_agent};
    for (const auto& r :
         vetting::cache_test_all(schedule.scheduled, *c.reference_pair, transport, vopts, parallel)) {
      if (!r.keep) excluded[r.vp_id] = {r.vp_id, ExclusionReason::cache_online, r.reason};
    }
  }

  prober::MatrixPolicy policy;
  policy.per_country_cap = c.caps.per_country_per_epoch;
  policy.parallel = parallel;
  policy.timeout = c.probe.timeout;
  policy.max_attempts = c.probe.max_attempts;
  policy.probe = {c.probe.user_agent, options.epoch, c.campaign_id};

  std::vector<ProbeRecord> records;
  std::string failure;
  try {
    std::ofstream partial(partial_path, std::ios::binary | std::ios::trunc);
    if (!partial) throw Error(ErrorCode::io_error, "cannot write " + partial_path);
    prober::run_matrix(schedule.scheduled, c.servers, c.domains, policy, db, transport,
                       [&](ProbeRecord rec) {
                         if (excluded.contains(rec.spec.vp.id)) {
                           rec.flags.emplace_back(flag::kExcludedCacheOnline);
                         }
                         partial << encode_line({rec, Json::object()}) << '\n';
                         partial.flush();
                         if (!partial) throw Error(ErrorCode::io_error, "write failed: " + partial_path);
                         records.push_back(std::move(rec));
                       });
  } catch (const std::exception& e) {
    failure = e.what();
  }

  if (failure.empty()) {
    Dataset kept;
    for (const auto& r : records) {
      if (!excluded.contains(r.spec.vp.id)) kept.records.push_back(r);
    }
    for (const auto& id : vetting::offline_cache_check(kept, titles)) {
      excluded[id] = {id, ExclusionReason::cache_offline, "landing-page title replayed"};
    }
    std::vector<ResultLine> lines;
    for (auto& r : records) {
      auto it = excluded.find(r.spec.vp.id);
      if (it != excluded.end() && it->second.reason == ExclusionReason::cache_offline) {
        r.flags.emplace_back(flag::kExcludedCacheOffline);
      }
      lines.push_back({r, Json::object()});
    }
    try {
      write_results(options.results_path, lines);
      std::error_code ec;
      fs::remove(partial_path, ec);
      summary.completed = true;
    } catch (const Error& e) {
      failure = e.what();
    }
  }
  summary.records = static_cast<int>(records.size());
  for (auto& [id, note] : excluded) summary.exclusions.push_back(note);
  if (!summary.completed) {
    spdlog::error("campaign incomplete: {}", failure);
    summary.results_path = partial_path;
  }
  write_file_atomically(summary.manifest_path,
                        manifest_json(loaded, options, summary, failure).dump(2) + "\n");
  return summary;
}

std::string report(const std::string& results_path, const std::string& out_dir,
                   const analysis::ReportOptions& options) {
  Dataset ds = load_dataset(results_path);
  if (ds.records.empty()) throw Error(ErrorCode::no_records, "no records in " + results_path);
  analysis::write_reports(ds, out_dir, options);
  const auto summaries = analysis::country_summaries(ds, options.mode);
  return analysis::render_top_countries(summaries, options.min_country_vps);
}

}  // namespace pathprobe::harness
