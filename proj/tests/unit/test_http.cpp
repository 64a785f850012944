#include <doctest.h>

#include "pathprobe/digest.hpp"
#include "pathprobe/http.hpp"

using namespace pathprobe;

TEST_CASE("parse_response splits status, headers and body") {
  const std::string raw =
      "HTTP/1.1 302 Found\r\nLocation: http://warning.or.kr/i1.html\r\n"
      "content-length: 0\r\n\r\n";
  auto r = http::parse_response(raw);
  REQUIRE(r);
  CHECK(r->status == 302);
  CHECK(r->reason == "Found");
  CHECK(r->header("location") == "http://warning.or.kr/i1.html");
  CHECK(r->header("Content-Length") == "0");
  CHECK_FALSE(r->header("Server"));
  CHECK(r->body.empty());
  CHECK_FALSE(http::parse_response("<html>not http</html>"));
}

TEST_CASE("body_of falls back to the raw bytes") {
  CHECK(http::body_of("HTTP/1.0 200 OK\r\n\r\nhello") == "hello");
  CHECK(http::body_of("plain") == "plain");
}

TEST_CASE("extract_title is case-insensitive and trims") {
  CHECK(http::extract_title("<html><TITLE>  Example Domain \n</Title></html>") == "Example Domain");
  CHECK(http::extract_title("<title lang=\"en\">x</title>") == "x");
  CHECK_FALSE(http::extract_title("<titles>no</titles>"));
  CHECK_FALSE(http::extract_title("<p>none</p>"));
}

TEST_CASE("request_host and request_line") {
  const std::string req = "GET / HTTP/1.1\r\nhOsT:  Facebook.com \r\nAccept: */*\r\n\r\n";
  CHECK(http::request_host(req) == "Facebook.com");
  CHECK(http::request_line(req) == "GET / HTTP/1.1");
  CHECK_FALSE(http::request_host("GET / HTTP/1.1\r\n\r\n"));
}

TEST_CASE("build_response sets length and closes") {
  const auto raw = http::build_response(200, "OK", "text/html", "abc", {{"Cache-Control", "no-store"}});
  auto r = http::parse_response(raw);
  REQUIRE(r);
  CHECK(r->header("content-length") == "3");
  CHECK(r->header("cache-control") == "no-store");
  CHECK(r->header("connection") == "close");
  CHECK(r->body == "abc");
}

TEST_CASE("string helpers") {
  CHECK(http::to_lower("MiXeD") == "mixed");
  CHECK(http::trim("  a b \t") == "a b");
  CHECK(http::iequals("Host", "hOST"));
  CHECK_FALSE(http::iequals("Host", "Hosts"));
  CHECK(http::icontains("www.BongaCams.com", "bongacams"));
  CHECK(http::istarts_with("HTTP/1.1", "http/"));
}

TEST_CASE("sha256_hex") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
