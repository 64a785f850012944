#pragma once

// JSON encodings of the model types. Every type here parses back to a value
// equal to the one that was written.

#include <json.hpp>

#include "pathprobe/model.hpp"

namespace pathprobe {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

void to_json(Json& j, const Ipv4& v);
void from_json(const Json& j, Ipv4& v);

void to_json(Json& j, const TestDomain& v);
void from_json(const Json& j, TestDomain& v);

void to_json(Json& j, const VantagePoint& v);
void from_json(const Json& j, VantagePoint& v);

void to_json(Json& j, const ControlServer& v);
void from_json(const Json& j, ControlServer& v);

void to_json(Json& j, const ProbeSpec& v);
void from_json(const Json& j, ProbeSpec& v);

namespace outcome {
// Found by ADL through the variant's alternatives.
void to_json(Json& j, const ProbeOutcome& v);
void from_json(const Json& j, ProbeOutcome& v);
}  // namespace outcome

void to_json(Json& j, const Mechanism& v);
void from_json(const Json& j, Mechanism& v);

void to_json(Json& j, const Verdict& v);
void from_json(const Json& j, Verdict& v);

void to_json(Json& j, const Attempt& v);
void from_json(const Json& j, Attempt& v);

/// Flat result-line form: vp/server objects, domain name, timings in ms.
void to_json(Json& j, const ProbeRecord& v);
void from_json(const Json& j, ProbeRecord& v);

void to_json(Json& j, const Responder& v);
void from_json(const Json& j, Responder& v);

void to_json(Json& j, const TraceHop& v);
void from_json(const Json& j, TraceHop& v);

void to_json(Json& j, const TraceResult& v);
void from_json(const Json& j, TraceResult& v);

void to_json(Json& j, const Dataset& v);
void from_json(const Json& j, Dataset& v);

ExclusionReason exclusion_reason_from_string(std::string_view s);
std::string_view to_string(HopSignal s);
std::string_view to_string(MechanismKind k);

}  // namespace pathprobe
