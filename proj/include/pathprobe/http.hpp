#pragma once

// Minimal HTTP/1.1 message handling: just enough to build probe requests,
// render server responses and pick apart whatever comes back on the wire.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pathprobe::http {

struct Response {
  int status = 0;
  std::string reason;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;

  /// Case-insensitive header lookup; first occurrence wins.
  std::optional<std::string> header(std::string_view name) const;
};

/// Splits raw bytes into status line, headers and body. Returns nullopt when
/// the bytes do not start with an HTTP status line. A missing header
/// terminator is tolerated: everything after the status line is headers.
std::optional<Response> parse_response(std::string_view raw);

/// Body of a raw message, or the whole buffer when it is not HTTP.
std::string body_of(std::string_view raw);

/// Text content of the first <title> element, trimmed; nullopt if absent.
std::optional<std::string> extract_title(std::string_view html);

/// Value of the Host header in a raw request, verbatim; nullopt if absent.
std::optional<std::string> request_host(std::string_view raw_request);

/// First line of a raw request (without CRLF).
std::string request_line(std::string_view raw_request);

std::string build_response(int status, std::string_view reason,
                           std::string_view content_type, std::string_view body,
                           const std::vector<std::pair<std::string, std::string>>&
                               extra_headers = {});

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool icontains(std::string_view haystack, std::string_view needle);
bool istarts_with(std::string_view s, std::string_view prefix);

}  // namespace pathprobe::http
