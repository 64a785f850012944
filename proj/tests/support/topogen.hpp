#pragma once

// Random valley-free scenarios: a topology plus a matching campaign.

#include <cstdint>
#include <filesystem>
#include <string>

#include "pathprobe/model.hpp"
#include "pathprobe/prober.hpp"
#include "pathprobe/simnet.hpp"

namespace pathprobe::testsupport {

struct GenLimits {
  int max_ases = 8;
  int max_servers = 3;
  int max_vps = 6;
  int max_domains = 4;
  int max_censors = 2;
  double cache_probability = 0.35;
  bool reference_pair = true;
};

struct Scenario {
  simnet::Topology topo;
  CampaignConfig config;
  std::vector<prober::Signature> signatures;

  prober::BlockpageSignatureDB db() const { return prober::BlockpageSignatureDB(signatures); }

  /// Writes topology.json, signatures.json and campaign.json into dir.
  void write_files(const std::filesystem::path& dir) const;
};

Scenario random_scenario(std::uint64_t seed, const GenLimits& limits = {});

/// Blank campaign with one control server per `server` placement already
/// present in `topo`; ids, tokens, platforms and regions are filled in.
CampaignConfig campaign_for(const simnet::Topology& topo, std::uint64_t seed);

/// JSON form of a campaign, as the CLI reads it.
std::string campaign_json(const CampaignConfig& c, const std::string& signature_db_path);

}  // namespace pathprobe::testsupport
