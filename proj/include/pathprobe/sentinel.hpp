#pragma once

// The control server side: a fixed HTML page carrying the server's sentinel
// token, and a tiny HTTP/1.1 responder that returns it for every request.

#include <atomic>
#include <cstdint>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "pathprobe/model.hpp"

namespace pathprobe::sentinel {

inline constexpr std::size_t kMaxBodyBytes = 8 * 1024;
inline constexpr std::size_t kMaxLoggedRequestLine = 512;

struct SentinelPayload {
  std::string token;
  std::string description_text;
  std::string body;
};

/// Renders the static page for `server`. Throws Error(body_too_large) when
/// the page would reach 8 KiB and Error(invalid_argument) on empty text.
SentinelPayload render_payload(const ControlServer& server,
                               const std::string& description_text);

/// Full HTTP response bytes for the payload (status 200, or 400 for
/// malformed requests; the body is identical either way).
std::string response_bytes(const SentinelPayload& payload, bool malformed = false);

struct ServerLogEntry {
  TimestampMs timestamp = 0;
  std::string client_ip;
  std::string host_header;
  std::string request_line;
  std::uint64_t bytes_in = 0;

  friend bool operator==(const ServerLogEntry&, const ServerLogEntry&) = default;
};

std::string to_jsonl(const ServerLogEntry& e);
ServerLogEntry from_jsonl(const std::string& line);

class LogSink {
 public:
  virtual ~LogSink() = default;
  virtual void append(const ServerLogEntry& entry) = 0;
};

/// Append-only JSONL file, flushed after every entry.
class JsonlLogSink : public LogSink {
 public:
  explicit JsonlLogSink(const std::string& path);
  void append(const ServerLogEntry& entry) override;

 private:
  std::mutex mu_;
  std::ofstream out_;
};

class MemoryLogSink : public LogSink {
 public:
  void append(const ServerLogEntry& entry) override;
  std::vector<ServerLogEntry> entries() const;

 private:
  mutable std::mutex mu_;
  std::vector<ServerLogEntry> entries_;
};

/// Running responder. Destruction or shutdown() stops accepting and waits
/// for in-flight connections to finish.
class Responder {
 public:
  Responder(const Responder&) = delete;
  Responder& operator=(const Responder&) = delete;
  ~Responder();

  std::uint16_t port() const noexcept { return port_; }
  void shutdown();

 private:
  friend std::unique_ptr<Responder> serve(const std::string&, std::uint16_t,
                                          SentinelPayload, LogSink&);
  Responder(int listen_fd, std::uint16_t port, SentinelPayload payload,
            LogSink& sink);

  void accept_loop();
  void handle(int fd, std::string client_ip);

  int listen_fd_;
  std::uint16_t port_;
  SentinelPayload payload_;
  std::string ok_response_;
  std::string bad_response_;
  LogSink& sink_;
  std::atomic<bool> stopping_{false};
  std::mutex workers_mu_;
  std::vector<std::thread> workers_;
  std::thread acceptor_;
};

/// Binds `bind_address:port` (port 0 picks a free one) and starts serving.
/// Throws Error(bind_failure).
std::unique_ptr<Responder> serve(const std::string& bind_address, std::uint16_t port,
                                 SentinelPayload payload, LogSink& sink);

}  // namespace pathprobe::sentinel
