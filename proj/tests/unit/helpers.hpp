#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <string>

#include "pathprobe/harness.hpp"
#include "pathprobe/model.hpp"
#include "pathprobe/transport.hpp"

namespace testing {

using namespace pathprobe;

inline ControlServer make_server(const std::string& id, std::uint32_t last_octet = 1,
                                 const std::string& platform = "aws") {
  ControlServer s;
  s.id = id;
  s.address = Ipv4((198u << 24) | (51u << 16) | (100u << 8) | last_octet);
  s.platform = platform;
  s.region = "region-" + id;
  s.sentinel_token = harness::derive_token(1, id);
  return s;
}

inline VantagePoint make_vp(const std::string& id, const std::string& country = "KZ",
                            Asn asn = 64500) {
  VantagePoint vp;
  vp.id = id;
  vp.address = Ipv4((100u << 24) | (64u << 16) | static_cast<std::uint32_t>(std::hash<std::string>{}(id) & 0xffff));
  vp.country = country;
  vp.asn = asn;
  return vp;
}

/// Transport answering from a callback; keeps one clock per VP.
class ScriptedTransport : public Transport {
 public:
  using Handler = std::function<ExchangeResult(const VantagePoint&, const ControlServer&,
                                               std::string_view, std::optional<int>)>;
  explicit ScriptedTransport(Handler h) : handler_(std::move(h)) {}

  ExchangeResult exchange(const VantagePoint& vp, const ControlServer& server,
                          std::string_view request, Millis timeout,
                          std::optional<int> ttl) override {
    ExchangeResult r = handler_(vp, server, request, ttl);
    if (r.kind == ExchangeResult::Kind::timeout) r.elapsed = timeout;
    std::lock_guard lock(mu_);
    clocks_[vp.id] += r.elapsed.count();
    ++calls_;
    return r;
  }
  TimestampMs now_ms(const VantagePoint& vp) override {
    std::lock_guard lock(mu_);
    return clocks_[vp.id];
  }
  bool supports_ttl(const VantagePoint& vp) const override { return !vp.via_socks(); }
  int calls() const { return calls_; }

 private:
  Handler handler_;
  std::mutex mu_;
  std::map<std::string, TimestampMs> clocks_;
  std::atomic<int> calls_{0};
};

inline ExchangeResult response(std::string bytes, Millis elapsed = Millis(40)) {
  ExchangeResult r;
  r.kind = ExchangeResult::Kind::response;
  r.bytes = std::move(bytes);
  r.elapsed = elapsed;
  return r;
}

inline ExchangeResult of_kind(ExchangeResult::Kind k) {
  ExchangeResult r;
  r.kind = k;
  r.elapsed = Millis(30);
  return r;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("pathprobe-unit-" + std::to_string(::getpid()) + "-" + tag + "-" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

}  // namespace testing
