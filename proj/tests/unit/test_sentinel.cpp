#include <doctest.h>

#include "helpers.hpp"
#include "pathprobe/error.hpp"
#include "pathprobe/http.hpp"
#include "pathprobe/net.hpp"
#include "pathprobe/prober.hpp"
#include "pathprobe/sentinel.hpp"

using namespace pathprobe;
using testing::make_server;
using testing::make_vp;

namespace {

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

ControlServer loopback(const std::string& id, std::uint16_t port) {
  auto s = make_server(id);
  s.address = *Ipv4::parse("127.0.0.1");
  s.port = port;
  return s;
}

ExchangeResult send_raw(std::uint16_t port, const std::string& bytes) {
  net::NetTransport t;
  return t.exchange(make_vp("local"), loopback("x", port), bytes, Millis(3000), std::nullopt);
}

}  // namespace

TEST_CASE("payload carries the token exactly once and is deterministic") {
  const auto s = make_server("aws-us-east-1");
  const auto a = sentinel::render_payload(s, "Research server; contact ops@example.org.");
  const auto b = sentinel::render_payload(s, "Research server; contact ops@example.org.");
  CHECK(a.body == b.body);
  CHECK(count(a.body, s.sentinel_token) == 1);
  CHECK(a.token == s.sentinel_token);
  CHECK(http::extract_title(a.body) == "Network measurement server");
  CHECK(sentinel::response_bytes(a) == sentinel::response_bytes(b));
}

TEST_CASE("payload limits") {
  const auto s = make_server("s1");
  try {
    sentinel::render_payload(s, std::string(9 * 1024, 'x'));
    FAIL("expected body_too_large");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::body_too_large);
  }
  CHECK_THROWS_AS(sentinel::render_payload(s, ""), Error);
  CHECK_THROWS_AS(sentinel::render_payload(s, "<script>"), Error);
  CHECK_THROWS_AS(sentinel::render_payload(s, "token " + s.sentinel_token), Error);
}

TEST_CASE("log entries round-trip through JSONL") {
  sentinel::ServerLogEntry e{1700000000123, "203.0.113.9", "facebook.com", "GET / HTTP/1.1", 77};
  const auto line = sentinel::to_jsonl(e);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(sentinel::from_jsonl(line) == e);
}

TEST_CASE("loopback responder serves every request and logs it") {
  const auto s = make_server("s1");
  sentinel::MemoryLogSink sink;
  auto responder = sentinel::serve("127.0.0.1", 0,
                                   sentinel::render_payload(s, "Measurement server."), sink);
  REQUIRE(responder->port() != 0);

  auto get = send_raw(responder->port(),
                      "GET / HTTP/1.1\r\nHost: facebook.com\r\nConnection: close\r\n\r\n");
  REQUIRE(get.kind == ExchangeResult::Kind::response);
  auto parsed = http::parse_response(get.bytes);
  REQUIRE(parsed);
  CHECK(parsed->status == 200);
  CHECK(parsed->header("cache-control") == "no-store");
  CHECK(count(parsed->body, s.sentinel_token) == 1);

  auto post = send_raw(responder->port(),
                       "POST /x HTTP/1.1\r\nHost: a.example\r\nContent-Length: 5\r\n\r\nhello");
  REQUIRE(post.kind == ExchangeResult::Kind::response);
  CHECK(http::parse_response(post.bytes)->status == 200);

  auto junk = send_raw(responder->port(), std::string(1000, 'Z') + "\r\n\r\n");
  REQUIRE(junk.kind == ExchangeResult::Kind::response);
  auto bad = http::parse_response(junk.bytes);
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(bad->body == parsed->body);

  responder->shutdown();
  const auto entries = sink.entries();
  REQUIRE(entries.size() == 3);
  CHECK(entries[0].host_header == "facebook.com");
  CHECK(entries[0].client_ip == "127.0.0.1");
  CHECK(entries[0].request_line == "GET / HTTP/1.1");
  CHECK(entries[1].bytes_in == std::string("POST /x HTTP/1.1\r\nHost: a.example\r\nContent-Length: 5\r\n\r\nhello").size());
  CHECK(entries[2].request_line.size() == sentinel::kMaxLoggedRequestLine);
}

TEST_CASE("a probe over real sockets sees its own sentinel") {
  auto s = make_server("s1");
  sentinel::MemoryLogSink sink;
  auto responder = sentinel::serve("127.0.0.1", 0, sentinel::render_payload(s, "Hello."), sink);
  s = loopback("s1", responder->port());
  net::NetTransport t;
  ProbeSpec spec{make_vp("vp1"), s, {"Blocked.Example", "KZ"}, Millis(3000), 5};
  const auto rec = prober::probe(spec, prober::BlockpageSignatureDB{}, t);
  CHECK(rec.verdict == Verdict::uncensored());
  CHECK(rec.attempts.size() == 1);
  responder->shutdown();
  REQUIRE(sink.entries().size() == 1);
  CHECK(sink.entries()[0].host_header == "blocked.example");
}

TEST_CASE("binding a port in use fails with bind_failure") {
  sentinel::MemoryLogSink sink;
  const auto payload = sentinel::render_payload(make_server("s1"), "Hello.");
  auto first = sentinel::serve("127.0.0.1", 0, payload, sink);
  try {
    sentinel::serve("127.0.0.1", first->port(), payload, sink);
    FAIL("expected bind_failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::bind_failure);
  }
}

TEST_CASE("refused connections are setup failures") {
  std::uint16_t port = 0;
  {
    sentinel::MemoryLogSink sink;
    auto r = sentinel::serve("127.0.0.1", 0, sentinel::render_payload(make_server("s"), "x"), sink);
    port = r->port();
  }
  const auto res = send_raw(port, "GET / HTTP/1.1\r\nHost: a\r\n\r\n");
  CHECK(res.kind == ExchangeResult::Kind::setup_failed);
  CHECK_FALSE(res.error.empty());
}
