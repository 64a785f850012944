#pragma once

#include <stdexcept>
#include <string>

namespace pathprobe {

enum class ErrorCode {
  invalid_argument,
  body_too_large,
  bind_failure,
  config_invalid,
  io_error,
  unsupported_transport,
  insufficient_evidence,
  unknown_country,
  no_valley_free_path,
  too_few_columns,
  empty_input,
  schema_mismatch,
  no_records,
  topology_invalid,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pathprobe
