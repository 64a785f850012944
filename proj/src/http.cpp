#include "pathprobe/http.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace pathprobe::http {

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
           return std::tolower(x) == std::tolower(y);
         });
}

bool istarts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && iequals(s.substr(0, prefix.size()), prefix);
}

bool icontains(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return true;
  auto it = std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end(),
                        [](unsigned char x, unsigned char y) {
                          return std::tolower(x) == std::tolower(y);
                        });
  return it != haystack.end();
}

std::optional<std::string> Response::header(std::string_view name) const {
  for (const auto& [k, v] : headers) {
    if (iequals(k, name)) return v;
  }
  return std::nullopt;
}

std::optional<Response> parse_response(std::string_view raw) {
  if (!raw.starts_with("HTTP/")) return std::nullopt;
  Response r;
  auto head_end = raw.find("\r\n\r\n");
  std::string_view head = raw;
  if (head_end != std::string_view::npos) {
    head = raw.substr(0, head_end);
    r.body = std::string(raw.substr(head_end + 4));
  }
  auto line_end = head.find("\r\n");
  std::string_view status_line = head.substr(0, line_end);
  auto sp1 = status_line.find(' ');
  if (sp1 != std::string_view::npos) {
    auto rest = status_line.substr(sp1 + 1);
    auto sp2 = rest.find(' ');
    auto code = rest.substr(0, sp2);
    std::from_chars(code.data(), code.data() + code.size(), r.status);
    if (sp2 != std::string_view::npos) r.reason = std::string(rest.substr(sp2 + 1));
  }
  std::string_view headers =
      line_end == std::string_view::npos ? std::string_view{} : head.substr(line_end + 2);
  while (!headers.empty()) {
    auto eol = headers.find("\r\n");
    auto line = headers.substr(0, eol);
    auto colon = std::find(line.begin(), line.end(), ':');
    if (colon != line.end()) {
      auto at = static_cast<std::size_t>(colon - line.begin());
      r.headers.emplace_back(trim(line.substr(0, at)), trim(line.substr(at + 1)));
    }
    if (eol == std::string_view::npos) break;
    headers.remove_prefix(eol + 2);
  }
  return r;
}

std::string body_of(std::string_view raw) {
  if (auto r = parse_response(raw)) return std::move(r->body);
  return std::string(raw);
}

std::optional<std::string> extract_title(std::string_view html) {
  std::string lower = to_lower(html);
  std::size_t pos = 0;
  while ((pos = lower.find("<title", pos)) != std::string::npos) {
    const char next = pos + 6 < lower.size() ? lower[pos + 6] : '\0';
    if (next == '>' || std::isspace(static_cast<unsigned char>(next))) break;
    pos += 6;
  }
  if (pos == std::string::npos) return std::nullopt;
  auto open_end = lower.find('>', pos);
  if (open_end == std::string::npos) return std::nullopt;
  auto close = lower.find("</title", open_end + 1);
  if (close == std::string::npos) return std::nullopt;
  return trim(html.substr(open_end + 1, close - open_end - 1));
}

std::optional<std::string> request_host(std::string_view raw) {
  auto head_end = raw.find("\r\n\r\n");
  if (head_end != std::string_view::npos) raw = raw.substr(0, head_end);
  auto eol = raw.find("\r\n");
  if (eol == std::string_view::npos) return std::nullopt;
  raw.remove_prefix(eol + 2);
  while (!raw.empty()) {
    eol = raw.find("\r\n");
    auto line = raw.substr(0, eol);
    auto colon = line.find(':');
    if (colon != std::string_view::npos && iequals(trim(line.substr(0, colon)), "host")) {
      return trim(line.substr(colon + 1));
    }
    if (eol == std::string_view::npos) break;
    raw.remove_prefix(eol + 2);
  }
  return std::nullopt;
}

std::string request_line(std::string_view raw) {
  auto eol = raw.find("\r\n");
  if (eol == std::string_view::npos) eol = raw.find('\n');
  return std::string(raw.substr(0, eol));
}

std::string build_response(
    int status, std::string_view reason, std::string_view content_type,
    std::string_view body,
    const std::vector<std::pair<std::string, std::string>>& extra_headers) {
  std::string out = "HTTP/1.1 " + std::to_string(status) + " " + std::string(reason) + "\r\n";
  out += "Content-Type: ";
  out += content_type;
  out += "\r\nContent-Length: " + std::to_string(body.size()) + "\r\n";
  for (const auto& [k, v] : extra_headers) out += k + ": " + v + "\r\n";
  out += "Connection: close\r\n\r\n";
  out += body;
  return out;
}

}  // namespace pathprobe::http
