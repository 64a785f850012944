#pragma once

// Campaign orchestration and persistence: config loading, the results JSONL
// format, run manifests, and the report pipeline behind the CLI.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pathprobe/analysis.hpp"
#include "pathprobe/codec.hpp"
#include "pathprobe/error.hpp"
#include "pathprobe/model.hpp"
#include "pathprobe/transport.hpp"

namespace pathprobe::harness {

enum ExitCode : int { kExitOk = 0, kExitConfigInvalid = 2, kExitPartial = 3, kExitIoError = 4 };

/// Maps an error to the CLI exit code.
int exit_code_for(const Error& e);

struct LoadedConfig {
  CampaignConfig config;
  std::string config_hash;  // sha-256 of the config file bytes
  std::filesystem::path base_dir;
};

struct LoadOptions {
  std::optional<std::uint64_t> seed_override;
  bool deterministic = false;  // requires a seed
};

/// Parses and validates a campaign config. Relative paths are resolved
/// against the config file's directory. Throws Error(config_invalid) with
/// every violation listed, Error(io_error) when the file cannot be read.
LoadedConfig load_config(const std::string& path, const LoadOptions& options = {});
LoadedConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                          const LoadOptions& options = {});

/// 32 lowercase hex chars derived from the seed and the server id.
std::string derive_token(std::uint64_t seed, const std::string& server_id);

/// One results line: a record plus any fields this build does not know.
struct ResultLine {
  ProbeRecord record;
  Json extra = Json::object();
};

std::string encode_line(const ResultLine& line);
ResultLine decode_line(std::string_view text);

struct ResultsFile {
  std::vector<ResultLine> lines;
  int skipped_truncated = 0;
};

/// Reads a results file. A malformed final line without a trailing newline
/// is skipped with a warning. Throws Error(schema_mismatch) naming both
/// versions, Error(io_error).
ResultsFile read_results(const std::string& path);
void write_results(const std::string& path, const std::vector<ResultLine>& lines);

Dataset load_dataset(const std::string& path);
void save_dataset(const std::string& path, const Dataset& dataset);

struct RunOptions {
  std::string results_path;
  std::string manifest_path;  // default: results_path + ".manifest.json"
  int epoch = 0;
  std::optional<int> parallel;
  std::string transport_name = "net";
};

struct ExclusionNote {
  std::string vp_id;
  ExclusionReason reason = ExclusionReason::cache_online;
  std::string detail;
};

struct RunSummary {
  int records = 0;
  int scheduled_vps = 0;
  int discarded_vps = 0;
  std::vector<ExclusionNote> exclusions;
  bool completed = false;
  std::string results_path;
  std::string manifest_path;
};

/// Online vetting, probe matrix, offline vetting annotation, then the
/// results file and manifest. Records stream to `<results>.partial` while
/// probing; on failure the partial file stays and the manifest says so.
RunSummary run_campaign(const LoadedConfig& loaded, Transport& transport,
                        const RunOptions& options);

/// Writes every analysis CSV into out_dir and returns the Table-1 shaped
/// top-countries text. Throws Error(no_records) on an empty results file.
std::string report(const std::string& results_path, const std::string& out_dir,
                   const analysis::ReportOptions& options = {});

}  // namespace pathprobe::harness
