#include "pathprobe/sentinel.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <json.hpp>

#include "pathprobe/error.hpp"
#include "pathprobe/http.hpp"

namespace pathprobe::sentinel {

namespace {

constexpr std::size_t kMaxRequestBytes = 64 * 1024;
constexpr int kReadIdleMs = 5000;

TimestampMs wall_now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos;
       pos = hay.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

bool is_tchar(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
         std::strchr("!#$%&'*+-.^_`|~", c) != nullptr;
}

bool well_formed_request_line(std::string_view line) {
  auto sp1 = line.find(' ');
  if (sp1 == std::string_view::npos || sp1 == 0) return false;
  for (char c : line.substr(0, sp1)) {
    if (!is_tchar(c)) return false;
  }
  auto rest = line.substr(sp1 + 1);
  auto sp2 = rest.find(' ');
  if (sp2 == std::string_view::npos || sp2 == 0) return false;
  auto version = rest.substr(sp2 + 1);
  return version == "HTTP/1.1" || version == "HTTP/1.0";
}

}  // namespace

SentinelPayload render_payload(const ControlServer& server,
                               const std::string& description_text) {
  if (description_text.empty()) {
    throw Error(ErrorCode::invalid_argument, "description_text must be non-empty");
  }
  if (description_text.find_first_of("<>") != std::string::npos) {
    throw Error(ErrorCode::invalid_argument, "description_text must be plain text");
  }
  if (!server.sentinel_token.empty() &&
      description_text.find(server.sentinel_token) != std::string::npos) {
    throw Error(ErrorCode::invalid_argument, "description_text contains the token");
  }
  std::string body;
  body += "<!DOCTYPE html>\n<html>\n<head><meta charset=\"utf-8\">";
  body += "<title>Network measurement server</title></head>\n<body>\n";
  body += "<h1>Network measurement server</h1>\n<p>";
  body += description_text;
  body += "</p>\n<p id=\"sentinel\">";
  body += server.sentinel_token;
  body += "</p>\n</body>\n</html>\n";
  if (body.size() >= kMaxBodyBytes) {
    throw Error(ErrorCode::body_too_large,
                "sentinel body would be " + std::to_string(body.size()) + " bytes");
  }
  if (count_occurrences(body, server.sentinel_token) != 1) {
    throw Error(ErrorCode::invalid_argument, "token must appear exactly once");
  }
  return {server.sentinel_token, description_text, std::move(body)};
}

std::string response_bytes(const SentinelPayload& payload, bool malformed) {
  return http::build_response(malformed ? 400 : 200, malformed ? "Bad Request" : "OK",
                              "text/html; charset=utf-8", payload.body,
                              {{"Cache-Control", "no-store"}});
}

std::string to_jsonl(const ServerLogEntry& e) {
  nlohmann::json j{{"timestamp", e.timestamp},
                   {"client_ip", e.client_ip},
                   {"host_header", e.host_header},
                   {"request_line", e.request_line},
                   {"bytes_in", e.bytes_in}};
  // Request bytes are attacker-controlled; never fail on invalid UTF-8.
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

ServerLogEntry from_jsonl(const std::string& line) {
  auto j = nlohmann::json::parse(line);
  return {j.at("timestamp").get<TimestampMs>(), j.at("client_ip").get<std::string>(),
          j.at("host_header").get<std::string>(), j.at("request_line").get<std::string>(),
          j.at("bytes_in").get<std::uint64_t>()};
}

JsonlLogSink::JsonlLogSink(const std::string& path) : out_(path, std::ios::app) {
  if (!out_) throw Error(ErrorCode::io_error, "cannot open log " + path);
}

void JsonlLogSink::append(const ServerLogEntry& entry) {
  std::lock_guard lock(mu_);
  out_ << to_jsonl(entry) << '\n';
  out_.flush();
}

void MemoryLogSink::append(const ServerLogEntry& entry) {
  std::lock_guard lock(mu_);
  entries_.push_back(entry);
}

std::vector<ServerLogEntry> MemoryLogSink::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::unique_ptr<Responder> serve(const std::string& bind_address, std::uint16_t port,
                                 SentinelPayload payload, LogSink& sink) {
  int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw Error(ErrorCode::bind_failure, std::strerror(errno));
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (inet_pton(AF_INET, bind_address.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw Error(ErrorCode::bind_failure, "bad bind address " + bind_address);
  }
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(fd, 128) != 0) {
    std::string why = std::strerror(errno);
    ::close(fd);
    throw Error(ErrorCode::bind_failure,
                "bind " + bind_address + ":" + std::to_string(port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  return std::unique_ptr<Responder>(
      new Responder(fd, ntohs(addr.sin_port), std::move(payload), sink));
}

Responder::Responder(int listen_fd, std::uint16_t port, SentinelPayload payload,
                     LogSink& sink)
    : listen_fd_(listen_fd),
      port_(port),
      payload_(std::move(payload)),
      ok_response_(response_bytes(payload_, false)),
      bad_response_(response_bytes(payload_, true)),
      sink_(sink) {
  acceptor_ = std::thread([this] { accept_loop(); });
}

Responder::~Responder() { shutdown(); }

void Responder::shutdown() {
  if (stopping_.exchange(true)) return;
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(workers_mu_);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
}

void Responder::accept_loop() {
  while (!stopping_.load()) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 50) <= 0) continue;
    sockaddr_in peer{};
    socklen_t len = sizeof peer;
    int fd = ::accept4(listen_fd_, reinterpret_cast<sockaddr*>(&peer), &len, SOCK_CLOEXEC);
    if (fd < 0) continue;
    char ip[INET_ADDRSTRLEN] = {};
    inet_ntop(AF_INET, &peer.sin_addr, ip, sizeof ip);
    std::lock_guard lock(workers_mu_);
    workers_.emplace_back([this, fd, client = std::string(ip)] { handle(fd, client); });
  }
}

void Responder::handle(int fd, std::string client_ip) {
  std::string buf;
  char chunk[4096];
  std::size_t head_end = std::string::npos;
  while (buf.size() < kMaxRequestBytes) {
    pollfd p{fd, POLLIN, 0};
    if (::poll(&p, 1, kReadIdleMs) <= 0) break;
    ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) break;
    buf.append(chunk, static_cast<std::size_t>(n));
    head_end = buf.find("\r\n\r\n");
    if (head_end != std::string::npos) break;
  }

  std::string line = http::request_line(buf);
  const bool malformed = head_end == std::string::npos || !well_formed_request_line(line);

  if (!malformed) {
    // Drain a declared body so bytes_in reflects the whole request.
    std::string head = buf.substr(0, head_end);
    std::size_t want = 0;
    std::size_t pos = 0;
    while ((pos = head.find("\r\n", pos)) != std::string::npos) {
      pos += 2;
      auto eol = head.find("\r\n", pos);
      auto h = std::string_view(head).substr(pos, eol - pos);
      if (http::istarts_with(h, "content-length:")) {
        want = std::strtoull(std::string(h.substr(15)).c_str(), nullptr, 10);
      }
    }
    want = std::min(want, kMaxRequestBytes);
    while (buf.size() - (head_end + 4) < want) {
      pollfd p{fd, POLLIN, 0};
      if (::poll(&p, 1, kReadIdleMs) <= 0) break;
      ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
      if (n <= 0) break;
      buf.append(chunk, static_cast<std::size_t>(n));
    }
  }

  ServerLogEntry entry;
  entry.timestamp = wall_now_ms();
  entry.client_ip = std::move(client_ip);
  entry.host_header = http::request_host(buf).value_or("");
  entry.request_line = line.substr(0, kMaxLoggedRequestLine);
  entry.bytes_in = buf.size();
  sink_.append(entry);

  const std::string& response = malformed ? bad_response_ : ok_response_;
  std::size_t sent = 0;
  while (sent < response.size()) {
    ssize_t n = ::send(fd, response.data() + sent, response.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) break;
    sent += static_cast<std::size_t>(n);
  }
  ::shutdown(fd, SHUT_WR);
  ::close(fd);
}

}  // namespace pathprobe::sentinel
