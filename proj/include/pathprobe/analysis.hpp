#pragma once

// Metrics over a Dataset. Percentages are carried at full precision and
// only rounded when rendered.

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "pathprobe/model.hpp"

namespace pathprobe::analysis {

enum class Granularity { vp, request };
enum class CubeMode { per_epoch, latest_wins };

struct CellKey {
  std::string server_id;
  std::string domain;
  int epoch = 0;  // always 0 under latest_wins
  friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

struct VpRow {
  std::string vp_id;
  std::string country;
  Asn asn = 0;
  std::map<CellKey, Verdict> cells;

  bool censored() const;
  /// Some domain is Censored on one server and Uncensored on another in the
  /// same epoch.
  bool inconsistent() const;
  /// Some domain is censored by more than one mechanism.
  bool mechanism_diverse() const;
};

struct VpVerdictCube {
  std::vector<VpRow> rows;  // sorted by vp id
  std::vector<ControlServer> servers;

  bool has_country(const std::string& country) const;
  std::vector<std::string> countries() const;
};

/// Rows for every non-excluded VP, cells from its non-inconclusive records.
VpVerdictCube build_cube(const Dataset& dataset, CubeMode mode = CubeMode::per_epoch);

struct CountrySummary {
  std::string country;
  int total_vps = 0;
  int censored_vps = 0;
  int inconsistent_vps = 0;
  int mechanism_diverse_vps = 0;
  double censorship_pct = 0.0;
  std::optional<double> inconsistency_pct;  // none when nothing is censored
};

/// Throws Error(unknown_country).
CountrySummary country_summary(const VpVerdictCube& cube, const std::string& country);
double censorship_pct(const VpVerdictCube& cube, const std::string& country);
std::optional<double> inconsistency_pct(const VpVerdictCube& cube, const std::string& country);

/// Every country, by censorship_pct descending then country code.
std::vector<CountrySummary> country_summaries(const VpVerdictCube& cube);
/// As above, plus zero rows for dataset countries whose VPs were all
/// excluded or inconclusive.
std::vector<CountrySummary> country_summaries(const Dataset& dataset,
                                              CubeMode mode = CubeMode::per_epoch);

struct DomainSummary {
  std::string country;
  std::string domain;
  int requests = 0;
  int censored_requests = 0;
  std::optional<double> censorship_pct;  // none: no requests
};

/// Request-level share of censored requests for the domain from VPs in
/// `country`; excluded VPs and inconclusive records are left out.
DomainSummary domain_censorship(const Dataset& dataset, const std::string& country,
                                const std::string& domain);

/// max - min; 0 for fewer than two values.
double spread(const std::vector<double>& pcts);

struct ColumnPct {
  std::string key;  // server id or platform
  int total = 0;    // VPs or requests, by granularity
  int censored = 0;
  double pct = 0.0;
};

struct PathSummary {
  std::string country;
  Granularity granularity = Granularity::vp;
  std::vector<ColumnPct> per_server;
  double inconsistency = 0.0;
};

/// Per-server censorship within a country. Throws Error(too_few_columns)
/// when fewer than two servers have data, Error(unknown_country).
PathSummary destination_inconsistency(const VpVerdictCube& cube, const std::string& country,
                                      Granularity granularity = Granularity::vp);

struct AsSummary {
  Asn asn = 0;
  int vp_count = 0;
  std::vector<ColumnPct> per_server;
  double inconsistency = 0.0;
};

/// ASes with at least `min_vps` VPs, by inconsistency descending then ASN.
std::vector<AsSummary> as_inconsistency(const VpVerdictCube& cube, int min_vps = 80,
                                        Granularity granularity = Granularity::vp);

struct PlatformSummary {
  std::string country;
  std::vector<ColumnPct> per_platform;
  double inconsistency = 0.0;
};

/// Request-level censorship per hosting platform. Throws
/// Error(too_few_columns) below two platforms, Error(unknown_country).
PlatformSummary hosting_inconsistency(const VpVerdictCube& cube, const std::string& country);

struct CdfPoint {
  double x = 0.0;
  double fraction = 0.0;
  friend bool operator==(const CdfPoint&, const CdfPoint&) = default;
};

/// Empirical CDF steps, one per distinct value. Throws Error(empty_input).
std::vector<CdfPoint> cdf_series(std::vector<double> values);
/// Fraction of values <= x.
double cdf_at(const std::vector<CdfPoint>& series, double x);

/// Two decimals, half-up; "n/a" for none.
std::string format_pct(std::optional<double> pct);

struct ReportOptions {
  int min_as_vps = 80;
  int min_country_vps = 0;  // for the printed top-10 table
  Granularity granularity = Granularity::vp;
  CubeMode mode = CubeMode::per_epoch;
};

/// Writes country_summary.csv, as_summary.csv, platform_summary.csv,
/// destination_summary.csv, domain_summary.csv and the cdf_*.csv series.
/// Returns the paths written.
std::vector<std::string> write_reports(const Dataset& dataset, const std::string& out_dir,
                                       const ReportOptions& options = {});

/// Table-1 shaped text: top 10 countries by censorship percentage.
std::string render_top_countries(const std::vector<CountrySummary>& summaries,
                                 int min_vps = 0, std::size_t limit = 10);

}  // namespace pathprobe::analysis
