#include "pathprobe/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "pathprobe/error.hpp"

namespace pathprobe::analysis {

namespace {

double pct_of(int part, int whole) {
  return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

std::vector<const VpRow*> rows_in(const VpVerdictCube& cube, const std::string& country) {
  std::vector<const VpRow*> out;
  for (const auto& r : cube.rows) {
    if (r.country == country) out.push_back(&r);
  }
  if (out.empty()) throw Error(ErrorCode::unknown_country, "no vantage points in " + country);
  return out;
}

/// Per-server columns over `rows`, skipping servers none of them reached.
std::vector<ColumnPct> server_columns(const VpVerdictCube& cube,
                                      const std::vector<const VpRow*>& rows,
                                      Granularity granularity) {
  std::vector<ColumnPct> cols;
  for (const auto& server : cube.servers) {
    ColumnPct col{server.id, 0, 0, 0.0};
    for (const VpRow* row : rows) {
      bool seen = false;
      bool censored = false;
      for (const auto& [key, verdict] : row->cells) {
        if (key.server_id != server.id) continue;
        seen = true;
        censored = censored || verdict.is_censored();
        if (granularity == Granularity::request) {
          ++col.total;
          if (verdict.is_censored()) ++col.censored;
        }
      }
      if (granularity == Granularity::vp && seen) {
        ++col.total;
        if (censored) ++col.censored;
      }
    }
    if (col.total == 0) continue;
    col.pct = pct_of(col.censored, col.total);
    cols.push_back(col);
  }
  return cols;
}

double spread_of(const std::vector<ColumnPct>& cols) {
  std::vector<double> pcts;
  for (const auto& c : cols) pcts.push_back(c.pct);
  return spread(pcts);
}

std::string with_thousands(int n) {
  std::string digits = std::to_string(n);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
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

std::optional<double> censorship_or_none(const CountrySummary& s) {
  if (s.total_vps == 0) return std::nullopt;
  return s.censorship_pct;
}

std::string granularity_name(Granularity g) { return g == Granularity::vp ? "vp" : "request"; }

class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path, const std::string& header)
      : path_(path.string()), out_(path) {
    if (!out_) throw Error(ErrorCode::io_error, "cannot write " + path_);
    out_ << header << '\n';
  }
  template <typename... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ",") << csv_field(fields), first = false), ...);
    out_ << '\n';
  }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

}  // namespace

bool VpRow::censored() const {
  return std::any_of(cells.begin(), cells.end(),
                     [](const auto& kv) { return kv.second.is_censored(); });
}

bool VpRow::inconsistent() const {
  std::map<std::pair<std::string, int>, std::pair<bool, bool>> seen;
  for (const auto& [key, verdict] : cells) {
    auto& [censored, clean] = seen[{key.domain, key.epoch}];
    if (verdict.is_censored()) censored = true;
    if (verdict.kind == Verdict::Kind::uncensored) clean = true;
    if (censored && clean) return true;
  }
  return false;
}

bool VpRow::mechanism_diverse() const {
  std::map<std::pair<std::string, int>, std::set<std::string>> mechanisms;
  for (const auto& [key, verdict] : cells) {
    if (!verdict.is_censored() || !verdict.mechanism) continue;
    auto& set = mechanisms[{key.domain, key.epoch}];
    set.insert(describe(*verdict.mechanism));
    if (set.size() > 1) return true;
  }
  return false;
}

bool VpVerdictCube::has_country(const std::string& country) const {
  return std::any_of(rows.begin(), rows.end(),
                     [&](const VpRow& r) { return r.country == country; });
}

std::vector<std::string> VpVerdictCube::countries() const {
  std::set<std::string> out;
  for (const auto& r : rows) out.insert(r.country);
  return {out.begin(), out.end()};
}

VpVerdictCube build_cube(const Dataset& dataset, CubeMode mode) {
  std::map<std::string, VpRow> rows;
  std::map<std::pair<std::string, CellKey>, int> latest_epoch;
  for (const auto& r : dataset.records) {
    const auto& vp = r.spec.vp;
    if (dataset.excluded(vp.id) || r.has_flag(flag::kExcludedCacheOnline) ||
        r.has_flag(flag::kExcludedCacheOffline) || r.inconclusive()) {
      continue;
    }
    VpRow& row = rows[vp.id];
    row.vp_id = vp.id;
    row.country = vp.country;
    row.asn = vp.asn;
    CellKey key{r.spec.server.id, r.spec.domain.name,
                mode == CubeMode::per_epoch ? r.epoch : 0};
    if (mode == CubeMode::latest_wins) {
      auto [it, fresh] = latest_epoch.try_emplace({vp.id, key}, r.epoch);
      if (!fresh && r.epoch < it->second) continue;
      it->second = r.epoch;
    }
    row.cells.insert_or_assign(key, r.verdict);
  }
  VpVerdictCube cube;
  for (auto& [id, row] : rows) cube.rows.push_back(std::move(row));

  std::set<std::string> seen;
  for (const auto& s : dataset.servers) {
    if (seen.insert(s.id).second) cube.servers.push_back(s);
  }
  for (const auto& r : dataset.records) {
    if (seen.insert(r.spec.server.id).second) cube.servers.push_back(r.spec.server);
  }
  return cube;
}

CountrySummary country_summary(const VpVerdictCube& cube, const std::string& country) {
  CountrySummary s;
  s.country = country;
  for (const VpRow* row : rows_in(cube, country)) {
    ++s.total_vps;
    if (!row->censored()) continue;
    ++s.censored_vps;
    if (row->inconsistent()) ++s.inconsistent_vps;
    if (row->mechanism_diverse()) ++s.mechanism_diverse_vps;
  }
  s.censorship_pct = pct_of(s.censored_vps, s.total_vps);
  if (s.censored_vps > 0) s.inconsistency_pct = pct_of(s.inconsistent_vps, s.censored_vps);
  return s;
}

double censorship_pct(const VpVerdictCube& cube, const std::string& country) {
  return country_summary(cube, country).censorship_pct;
}

std::optional<double> inconsistency_pct(const VpVerdictCube& cube, const std::string& country) {
  return country_summary(cube, country).inconsistency_pct;
}

std::vector<CountrySummary> country_summaries(const VpVerdictCube& cube) {
  std::vector<CountrySummary> out;
  for (const auto& c : cube.countries()) out.push_back(country_summary(cube, c));
  std::stable_sort(out.begin(), out.end(), [](const CountrySummary& a, const CountrySummary& b) {
    if (a.censorship_pct != b.censorship_pct) return a.censorship_pct > b.censorship_pct;
    return a.country < b.country;
  });
  return out;
}

std::vector<CountrySummary> country_summaries(const Dataset& dataset, CubeMode mode) {
  auto out = country_summaries(build_cube(dataset, mode));
  std::set<std::string> present;
  for (const auto& s : out) present.insert(s.country);
  std::set<std::string> missing;
  for (const auto& v : dataset.vps) {
    if (!present.contains(v.country)) missing.insert(v.country);
  }
  for (const auto& r : dataset.records) {
    if (!present.contains(r.spec.vp.country)) missing.insert(r.spec.vp.country);
  }
  for (const auto& c : missing) out.push_back({c, 0, 0, 0, 0, 0.0, std::nullopt});
  return out;
}

DomainSummary domain_censorship(const Dataset& dataset, const std::string& country,
                                const std::string& domain) {
  DomainSummary s{country, domain, 0, 0, std::nullopt};
  for (const auto& r : dataset.records) {
    if (r.spec.vp.country != country || r.spec.domain.name != domain) continue;
    if (dataset.excluded(r.spec.vp.id) || r.has_flag(flag::kExcludedCacheOnline) ||
        r.has_flag(flag::kExcludedCacheOffline) || r.inconclusive()) {
      continue;
    }
    ++s.requests;
    if (r.verdict.is_censored()) ++s.censored_requests;
  }
  if (s.requests > 0) s.censorship_pct = pct_of(s.censored_requests, s.requests);
  return s;
}

double spread(const std::vector<double>& pcts) {
  if (pcts.size() < 2) return 0.0;
  auto [lo, hi] = std::minmax_element(pcts.begin(), pcts.end());
  return *hi - *lo;
}

PathSummary destination_inconsistency(const VpVerdictCube& cube, const std::string& country,
                                      Granularity granularity) {
  PathSummary s;
  s.country = country;
  s.granularity = granularity;
  s.per_server = server_columns(cube, rows_in(cube, country), granularity);
  if (s.per_server.size() < 2) {
    throw Error(ErrorCode::too_few_columns,
                country + " has data for " + std::to_string(s.per_server.size()) +
                    " server(s); need at least 2");
  }
  s.inconsistency = spread_of(s.per_server);
  return s;
}

std::vector<AsSummary> as_inconsistency(const VpVerdictCube& cube, int min_vps,
                                        Granularity granularity) {
  std::map<Asn, std::vector<const VpRow*>> by_as;
  for (const auto& r : cube.rows) by_as[r.asn].push_back(&r);
  std::vector<AsSummary> out;
  for (const auto& [asn, rows] : by_as) {
    if (static_cast<int>(rows.size()) < min_vps) continue;
    AsSummary s;
    s.asn = asn;
    s.vp_count = static_cast<int>(rows.size());
    s.per_server = server_columns(cube, rows, granularity);
    s.inconsistency = spread_of(s.per_server);
    out.push_back(std::move(s));
  }
  std::stable_sort(out.begin(), out.end(), [](const AsSummary& a, const AsSummary& b) {
    if (a.inconsistency != b.inconsistency) return a.inconsistency > b.inconsistency;
    return a.asn < b.asn;
  });
  return out;
}

PlatformSummary hosting_inconsistency(const VpVerdictCube& cube, const std::string& country) {
  std::map<std::string, std::string> platform_of;
  std::vector<std::string> platforms;
  for (const auto& s : cube.servers) {
    platform_of[s.id] = s.platform;
    if (std::find(platforms.begin(), platforms.end(), s.platform) == platforms.end()) {
      platforms.push_back(s.platform);
    }
  }
  std::map<std::string, ColumnPct> cols;
  for (const VpRow* row : rows_in(cube, country)) {
    for (const auto& [key, verdict] : row->cells) {
      auto& col = cols[platform_of[key.server_id]];
      ++col.total;
      if (verdict.is_censored()) ++col.censored;
    }
  }
  PlatformSummary s;
  s.country = country;
  for (const auto& p : platforms) {
    auto it = cols.find(p);
    if (it == cols.end() || it->second.total == 0) continue;
    ColumnPct col = it->second;
    col.key = p;
    col.pct = pct_of(col.censored, col.total);
    s.per_platform.push_back(col);
  }
  if (s.per_platform.size() < 2) {
    throw Error(ErrorCode::too_few_columns,
                country + " has data for " + std::to_string(s.per_platform.size()) +
                    " platform(s); need at least 2");
  }
  s.inconsistency = spread_of(s.per_platform);
  return s;
}

std::vector<CdfPoint> cdf_series(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::empty_input, "cdf of no values");
  std::sort(values.begin(), values.end());
  std::vector<CdfPoint> out;
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    out.push_back({values[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

double cdf_at(const std::vector<CdfPoint>& series, double x) {
  double f = 0.0;
  for (const auto& p : series) {
    if (p.x > x) break;
    f = p.fraction;
  }
  return f;
}

std::string format_pct(std::optional<double> pct) {
  if (!pct) return "n/a";
  // The epsilon keeps values such as 48.985 from falling to 48.98.
  const double rounded = std::floor(*pct * 100.0 + 0.5 + 1e-7) / 100.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", rounded);
  return buf;
}

std::vector<std::string> write_reports(const Dataset& dataset, const std::string& out_dir,
                                       const ReportOptions& options) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::io_error, "cannot create " + out_dir + ": " + ec.message());
  const fs::path dir(out_dir);
  const VpVerdictCube cube = build_cube(dataset, options.mode);
  std::vector<std::string> written;
  std::map<std::string, const ControlServer*> server_by_id;
  for (const auto& s : cube.servers) server_by_id[s.id] = &s;

  const auto summaries = country_summaries(dataset, options.mode);
  {
    CsvFile f(dir / "country_summary.csv",
              "country,total_vps,censored_vps,inconsistent_vps,censorship_pct,"
              "inconsistency_pct,mechanism_diverse_vps");
    for (const auto& s : summaries) {
      f.row(s.country, std::to_string(s.total_vps), std::to_string(s.censored_vps),
            std::to_string(s.inconsistent_vps), format_pct(censorship_or_none(s)),
            format_pct(s.inconsistency_pct), std::to_string(s.mechanism_diverse_vps));
    }
    written.push_back(f.path());
  }

  std::vector<double> destination_spreads;
  {
    CsvFile f(dir / "destination_summary.csv",
              "country,granularity,server_id,platform,region,total,censored,censorship_pct,"
              "inconsistency");
    for (const auto& country : cube.countries()) {
      PathSummary ps;
      try {
        ps = destination_inconsistency(cube, country, options.granularity);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::too_few_columns) throw;
        continue;
      }
      destination_spreads.push_back(ps.inconsistency);
      for (const auto& col : ps.per_server) {
        const ControlServer* srv = server_by_id[col.key];
        f.row(country, granularity_name(ps.granularity), col.key, srv ? srv->platform : "",
              srv ? srv->region : "", std::to_string(col.total), std::to_string(col.censored),
              format_pct(col.pct), format_pct(ps.inconsistency));
      }
    }
    written.push_back(f.path());
  }

  const auto ases = as_inconsistency(cube, options.min_as_vps, options.granularity);
  {
    CsvFile f(dir / "as_summary.csv",
              "asn,vp_count,granularity,server_id,platform,region,censorship_pct,inconsistency");
    for (const auto& a : ases) {
      for (const auto& col : a.per_server) {
        const ControlServer* srv = server_by_id[col.key];
        f.row(std::to_string(a.asn), std::to_string(a.vp_count),
              granularity_name(options.granularity), col.key, srv ? srv->platform : "",
              srv ? srv->region : "", format_pct(col.pct), format_pct(a.inconsistency));
      }
    }
    written.push_back(f.path());
  }

  {
    CsvFile f(dir / "platform_summary.csv",
              "country,platform,requests,censored_requests,censorship_pct,inconsistency");
    for (const auto& country : cube.countries()) {
      PlatformSummary ps;
      try {
        ps = hosting_inconsistency(cube, country);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::too_few_columns) throw;
        continue;
      }
      for (const auto& col : ps.per_platform) {
        f.row(country, col.key, std::to_string(col.total), std::to_string(col.censored),
              format_pct(col.pct), format_pct(ps.inconsistency));
      }
    }
    written.push_back(f.path());
  }

  {
    CsvFile f(dir / "domain_summary.csv",
              "country,domain,requests,censored_requests,censorship_pct");
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& r : dataset.records) pairs.emplace(r.spec.vp.country, r.spec.domain.name);
    for (const auto& [country, domain] : pairs) {
      const auto s = domain_censorship(dataset, country, domain);
      if (s.requests == 0) continue;
      f.row(country, domain, std::to_string(s.requests), std::to_string(s.censored_requests),
            format_pct(s.censorship_pct));
    }
    written.push_back(f.path());
  }

  auto write_cdf = [&](const std::string& name, const std::vector<double>& values) {
    if (values.empty()) return;
    CsvFile f(dir / name, "x,cumulative_fraction");
    for (const auto& p : cdf_series(values)) {
      char x[32], y[32];
      std::snprintf(x, sizeof x, "%.6f", p.x);
      std::snprintf(y, sizeof y, "%.6f", p.fraction);
      f.row(std::string(x), std::string(y));
    }
    written.push_back(f.path());
  };
  write_cdf("cdf_destination_inconsistency.csv", destination_spreads);
  std::vector<double> censorship, inconsistency, as_spreads;
  for (const auto& s : summaries) {
    if (s.total_vps > 0) censorship.push_back(s.censorship_pct);
    if (s.inconsistency_pct) inconsistency.push_back(*s.inconsistency_pct);
  }
  for (const auto& a : ases) as_spreads.push_back(a.inconsistency);
  write_cdf("cdf_country_censorship.csv", censorship);
  write_cdf("cdf_country_inconsistency.csv", inconsistency);
  write_cdf("cdf_as_inconsistency.csv", as_spreads);
  return written;
}

std::string render_top_countries(const std::vector<CountrySummary>& summaries, int min_vps,
                                 std::size_t limit) {
  std::vector<const CountrySummary*> rows;
  for (const auto& s : summaries) {
    if (s.total_vps >= min_vps) rows.push_back(&s);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto* a, const auto* b) {
    if (a->censorship_pct != b->censorship_pct) return a->censorship_pct > b->censorship_pct;
    return a->country < b->country;
  });
  if (rows.size() > limit) rows.resize(limit);

  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %9s %9s %9s %11s %10s\n", "Country", "Total",
                "Censored", "Incons.", "% Censored", "% Incons.");
  out << line;
  for (const auto* s : rows) {
    auto pct = [](std::optional<double> v) {
      auto text = format_pct(v);
      return text == "n/a" ? text : text + "%";
    };
    std::snprintf(line, sizeof line, "%-8s %9s %9s %9s %11s %10s\n", s->country.c_str(),
                  with_thousands(s->total_vps).c_str(), with_thousands(s->censored_vps).c_str(),
                  with_thousands(s->inconsistent_vps).c_str(), pct(censorship_or_none(*s)).c_str(),
                  pct(s->inconsistency_pct).c_str());
    out << line;
  }
  return out.str();
}

}  // namespace pathprobe::analysis
