#ifndef PTDOA_IO_HPP
#define PTDOA_IO_HPP

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "ptdoa/protocol.hpp"

namespace ptdoa {

using Json = nlohmann::json;

/// Shortest decimal text that parses back to the same double.
[[nodiscard]] std::string format_double(double value);
[[nodiscard]] double parse_double(const std::string& text);

[[nodiscard]] Json to_json(const ScenarioConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
ScenarioConfig scenario_config_from_json(const Json& json);
/// Applies the keys present in `overrides` on top of `base`.
void apply_overrides(ScenarioConfig& base, const Json& overrides);

[[nodiscard]] Json to_json(const Scenario& scenario);
Scenario scenario_from_json(const Json& json);

[[nodiscard]] const char* motion_name(MotionKind kind);
MotionKind parse_motion_kind(const std::string& name);

/// Line-oriented campaign log: a `# scenario: {...}` header, a column header, then one
/// row per reception in frame-major order. Numbers round-trip bit-exactly.
void write_campaign_csv(std::ostream& out, const CampaignLog& log);
CampaignLog read_campaign_csv(std::istream& in);

}  // namespace ptdoa

#endif  // PTDOA_IO_HPP
