#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "helpers.hpp"
#include "pathprobe/analysis.hpp"
#include "pathprobe/error.hpp"

using namespace pathprobe;
using namespace pathprobe::analysis;
using testing::make_server;
using testing::make_vp;

namespace {

const Verdict kCensored = Verdict::censored(Mechanism::reset());
const Verdict kClean = Verdict::uncensored();

ProbeRecord rec(const std::string& vp, const std::string& country, Asn asn,
                const std::string& server, const std::string& domain, Verdict v, int epoch = 0,
                const std::string& platform = "aws") {
  ProbeRecord r;
  r.spec.vp = make_vp(vp, country, asn);
  r.spec.server = make_server(server, 1, platform);
  r.spec.domain = {domain, country};
  r.epoch = epoch;
  r.verdict = v;
  return r;
}

VpRow row(const std::string& id, const std::string& country, Asn asn = 1) {
  VpRow r;
  r.vp_id = id;
  r.country = country;
  r.asn = asn;
  return r;
}

std::string pad(int i) {
  std::string s = std::to_string(i);
  return std::string(6 - s.size(), '0') + s;
}

// `n` VPs in one country/AS; VP i is censored on server k iff i < counts[k].
VpVerdictCube per_server_cube(const std::vector<int>& counts, int n, Asn asn = 1) {
  VpVerdictCube cube;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    cube.servers.push_back(make_server("s" + std::to_string(k)));
  }
  for (int i = 0; i < n; ++i) {
    auto r = row("vp" + pad(i), "KZ", asn);
    for (std::size_t k = 0; k < counts.size(); ++k) {
      r.cells[{"s" + std::to_string(k), "d.example", 0}] = i < counts[k] ? kCensored : kClean;
    }
    cube.rows.push_back(r);
  }
  return cube;
}

}  // namespace

TEST_CASE("build_cube from records") {
  const auto ds = Dataset::from_records({
      rec("a", "KZ", 1, "s1", "d", kClean), rec("a", "KZ", 1, "s2", "d", kClean),
      rec("b", "KZ", 1, "s1", "d", kClean), rec("b", "KZ", 1, "s2", "d", kClean)});
  const auto cube = build_cube(ds);
  REQUIRE(cube.rows.size() == 2);
  CHECK(cube.rows[0].cells.size() == 2);
  CHECK(cube.rows[1].cells.size() == 2);
  CHECK(censorship_pct(cube, "KZ") == 0.0);
  CHECK_FALSE(inconsistency_pct(cube, "KZ"));
}

TEST_CASE("excluded VPs and inconclusive records leave the cube") {
  auto excluded = rec("x", "KZ", 1, "s1", "d", kCensored);
  excluded.flags = {std::string(flag::kExcludedCacheOnline)};
  auto flaky = rec("y", "KZ", 1, "s1", "d", Verdict::censored(Mechanism::drop()));
  flaky.flags = {std::string(flag::kInconclusive)};
  const auto ds = Dataset::from_records({excluded, flaky, rec("z", "KZ", 1, "s1", "d", kClean)});
  const auto cube = build_cube(ds);
  REQUIRE(cube.rows.size() == 1);
  CHECK(cube.rows[0].vp_id == "z");
  CHECK(censorship_pct(cube, "KZ") == 0.0);
}

TEST_CASE("anomalous cells are kept but never censored") {
  const auto ds = Dataset::from_records({rec("a", "KZ", 1, "s1", "d", Verdict::anomalous())});
  const auto cube = build_cube(ds);
  REQUIRE(cube.rows.size() == 1);
  CHECK(cube.rows[0].cells.begin()->second == Verdict::anomalous());
  CHECK_FALSE(cube.rows[0].censored());
}

TEST_CASE("inconsistency needs both verdicts within one epoch") {
  const auto ds = Dataset::from_records({rec("a", "KZ", 1, "s1", "d", kCensored, 0),
                                         rec("a", "KZ", 1, "s2", "d", kClean, 1)});
  CHECK_FALSE(build_cube(ds).rows[0].inconsistent());
  CHECK(build_cube(ds, CubeMode::latest_wins).rows[0].inconsistent());
}

TEST_CASE("latest epoch wins when asked") {
  const auto ds = Dataset::from_records({rec("a", "KZ", 1, "s1", "d", kCensored, 0),
                                         rec("a", "KZ", 1, "s1", "d", kClean, 2)});
  const auto cube = build_cube(ds, CubeMode::latest_wins);
  REQUIRE(cube.rows[0].cells.size() == 1);
  CHECK(cube.rows[0].cells.begin()->second == kClean);
  CHECK(build_cube(ds).rows[0].cells.size() == 2);
}

TEST_CASE("country percentages") {
  VpVerdictCube cn;
  cn.servers = {make_server("s1"), make_server("s2")};
  for (int i = 0; i < 1256; ++i) {
    auto r = row("cn" + pad(i), "CN");
    r.cells[{"s1", "d", 0}] = i < 1229 ? kCensored : kClean;
    r.cells[{"s2", "d", 0}] = i < 1220 ? kClean : r.cells[{"s1", "d", 0}];
    cn.rows.push_back(r);
  }
  CHECK(format_pct(censorship_pct(cn, "CN")) == "97.85");
  CHECK(format_pct(inconsistency_pct(cn, "CN")) == "99.27");
  const auto s = country_summary(cn, "CN");
  CHECK(s.total_vps == 1256);
  CHECK(s.censored_vps == 1229);
  CHECK(s.inconsistent_vps == 1220);

  VpVerdictCube kz;
  kz.servers = cn.servers;
  for (int i = 0; i < 1825; ++i) {
    auto r = row("kz" + pad(i), "KZ");
    r.cells[{"s1", "d", 0}] = kCensored;
    r.cells[{"s2", "d", 0}] = i < 894 ? kClean : kCensored;
    kz.rows.push_back(r);
  }
  CHECK(format_pct(censorship_pct(kz, "KZ")) == "100.00");
  CHECK(format_pct(inconsistency_pct(kz, "KZ")) == "48.99");

  try {
    censorship_pct(kz, "CN");
    FAIL("expected unknown_country");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::unknown_country);
  }
}

TEST_CASE("identical censorship on every server is consistent") {
  const auto cube = per_server_cube({5, 5, 5}, 10);
  CHECK(censorship_pct(cube, "KZ") == 50.0);
  CHECK(inconsistency_pct(cube, "KZ") == 0.0);
}

TEST_CASE("domain censorship is request-level") {
  std::vector<ProbeRecord> records;
  for (int i = 0; i < 100; ++i) {
    records.push_back(rec("v" + std::to_string(i % 10), "RU", 1, "s" + std::to_string(i / 10),
                          "www.bongacams.com", i < 96 ? kCensored : kClean));
    records.push_back(rec("v" + std::to_string(i % 10), "RU", 1, "s" + std::to_string(i / 10),
                          "rare.example", i < 1 ? kCensored : kClean));
  }
  const auto ds = Dataset::from_records(records);
  const auto bonga = domain_censorship(ds, "RU", "www.bongacams.com");
  CHECK(bonga.requests == 100);
  CHECK(bonga.censorship_pct == doctest::Approx(96.0));
  CHECK(domain_censorship(ds, "RU", "rare.example").censorship_pct == doctest::Approx(1.0));
  CHECK_FALSE(domain_censorship(ds, "RU", "absent.example").censorship_pct);
}

TEST_CASE("spread") {
  CHECK(spread({1.2, 2.4, 76.8, 1.2, 2.4, 0.0}) == doctest::Approx(76.8));
  CHECK(spread({69.4, 9.4, 1.7, 71.1, 71.1, 70.6}) == doctest::Approx(69.4));
  CHECK(spread({98.93, 32.21, 76.64}) == doctest::Approx(66.72));
  CHECK(spread({50.89, 18.57, 37.95}) == doctest::Approx(32.32));
  CHECK(spread({88.41, 77.62, 89.01}) == doctest::Approx(11.39));
  CHECK(spread({3.0, 3.0}) == 0.0);
  CHECK(spread({7.0}) == 0.0);
}

TEST_CASE("destination inconsistency per server") {
  const auto cube = per_server_cube({6, 12, 384, 6, 12, 0}, 500);
  const auto p = destination_inconsistency(cube, "KZ");
  REQUIRE(p.per_server.size() == 6);
  CHECK(p.per_server[2].pct == doctest::Approx(76.8));
  CHECK(p.inconsistency == doctest::Approx(76.8));
  CHECK(destination_inconsistency(per_server_cube({3, 3}, 10), "KZ").inconsistency == 0.0);
  try {
    destination_inconsistency(per_server_cube({3}, 10), "KZ");
    FAIL("expected too_few_columns");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::too_few_columns);
  }
}

TEST_CASE("AS inconsistency applies the VP threshold") {
  auto cube = per_server_cube({393, 0, 0, 781, 393, 393}, 1000, 137526);
  const auto small = per_server_cube({79, 0, 0, 0, 0, 0}, 79, 64512);
  for (auto r : small.rows) {
    r.vp_id = "small-" + r.vp_id;
    cube.rows.push_back(r);
  }
  const auto out = as_inconsistency(cube);
  REQUIRE(out.size() == 1);
  CHECK(out[0].asn == 137526);
  CHECK(out[0].vp_count == 1000);
  CHECK(out[0].inconsistency == doctest::Approx(78.1));
  CHECK(as_inconsistency(cube, 79).size() == 2);
  CHECK(as_inconsistency(per_server_cube({0, 0}, 90)).at(0).inconsistency == 0.0);
}

TEST_CASE("hosting inconsistency is request-level per platform") {
  VpVerdictCube cube;
  cube.servers = {make_server("a", 1, "aws"), make_server("g", 2, "gcp"),
                  make_server("z", 3, "azure")};
  auto r = row("vp", "KR");
  const std::vector<std::pair<std::string, int>> cols = {{"a", 9893}, {"g", 3221}, {"z", 7664}};
  for (const auto& [server, censored] : cols) {
    for (int d = 0; d < 10000; ++d) {
      r.cells[{server, "d" + pad(d), 0}] = d < censored ? kCensored : kClean;
    }
  }
  cube.rows.push_back(r);
  const auto h = hosting_inconsistency(cube, "KR");
  REQUIRE(h.per_platform.size() == 3);
  CHECK(h.inconsistency == doctest::Approx(66.72));
  for (const auto& c : h.per_platform) CHECK(c.total == 10000);

  VpVerdictCube one = cube;
  for (auto& s : one.servers) s.platform = "aws";
  CHECK_THROWS_AS(hosting_inconsistency(one, "KR"), Error);
}

TEST_CASE("cdf steps") {
  const auto s = cdf_series({40, 20, 10, 20});
  REQUIRE(s.size() == 3);
  CHECK(s[0] == CdfPoint{10, 0.25});
  CHECK(s[1] == CdfPoint{20, 0.75});
  CHECK(s[2] == CdfPoint{40, 1.0});
  CHECK(cdf_at(s, 5) == 0.0);
  CHECK(cdf_at(s, 20) == 0.75);
  CHECK(cdf_at(s, 99) == 1.0);
  CHECK(cdf_series({7.5}) == std::vector<CdfPoint>{{7.5, 1.0}});
  CHECK_THROWS_AS(cdf_series({}), Error);
}

TEST_CASE("format_pct") {
  CHECK(format_pct(std::nullopt) == "n/a");
  CHECK(format_pct(0.0) == "0.00");
  CHECK(format_pct(100.0) == "100.00");
  CHECK(format_pct(100.0 * 1220 / 1229) == "99.27");
}

TEST_CASE("zero-VP countries render as n/a") {
  auto r = rec("x", "TH", 1, "s1", "d", kClean);
  r.flags = {std::string(flag::kExcludedCacheOffline)};
  const auto summaries = country_summaries(Dataset::from_records({r}));
  REQUIRE(summaries.size() == 1);
  CHECK(summaries[0].total_vps == 0);
  const auto table = render_top_countries(summaries);
  CHECK(table.find("TH") != std::string::npos);
  CHECK(table.find("n/a") != std::string::npos);
}

TEST_CASE("metrics match a brute-force recomputation on small datasets") {
  std::mt19937_64 rng(20240611);
  const std::vector<Verdict> choices = {kClean, kCensored, Verdict::anomalous(),
                                        Verdict::censored(Mechanism::drop())};
  for (int round = 0; round < 200; ++round) {
    const int vps = 1 + static_cast<int>(rng() % 5);
    const int servers = 1 + static_cast<int>(rng() % 3);
    const int domains = 1 + static_cast<int>(rng() % 3);
    std::vector<ProbeRecord> records;
    for (int v = 0; v < vps; ++v) {
      for (int s = 0; s < servers; ++s) {
        for (int d = 0; d < domains; ++d) {
          records.push_back(rec("v" + std::to_string(v), "KZ", 1, "s" + std::to_string(s),
                                "d" + std::to_string(d), choices[rng() % choices.size()]));
        }
      }
    }
    int censored = 0;
    int inconsistent = 0;
    for (int v = 0; v < vps; ++v) {
      bool any = false;
      bool mixed = false;
      for (int d = 0; d < domains; ++d) {
        bool c = false;
        bool u = false;
        for (const auto& r : records) {
          if (r.spec.vp.id != "v" + std::to_string(v) || r.spec.domain.name != "d" + std::to_string(d)) continue;
          c = c || r.verdict.kind == Verdict::Kind::censored;
          u = u || r.verdict.kind == Verdict::Kind::uncensored;
        }
        any = any || c;
        mixed = mixed || (c && u);
      }
      censored += any;
      inconsistent += mixed;
    }
    const auto cube = build_cube(Dataset::from_records(records));
    CHECK(censorship_pct(cube, "KZ") == doctest::Approx(100.0 * censored / vps));
    const auto inc = inconsistency_pct(cube, "KZ");
    if (censored == 0) {
      CHECK_FALSE(inc);
    } else {
      CHECK(*inc == doctest::Approx(100.0 * inconsistent / censored));
    }
    CHECK(std::lround(censorship_pct(cube, "KZ") * vps / 100.0) == censored);

    auto more = cube;
    auto extra = row("zz-clean", "KZ");
    extra.cells[{"s0", "d0", 0}] = kClean;
    more.rows.push_back(extra);
    CHECK(censorship_pct(more, "KZ") <= censorship_pct(cube, "KZ"));
  }
}
