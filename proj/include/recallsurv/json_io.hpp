#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"
#include "recallsurv/diagnostics.hpp"
#include "recallsurv/mc.hpp"
#include "recallsurv/nonparametric.hpp"
#include "recallsurv/parametric.hpp"
#include "recallsurv/simulate.hpp"

namespace recallsurv {

using Json = nlohmann::json;

// Event models: {"type": "weibull"|"truncated_weibull"|"mixture", ...}.
void to_json(Json& j, const EventTimeModel& m);
void from_json(const Json& j, EventTimeModel& m);

// Recall models: {"type": "logistic"|"binary"|"piecewise", ...}; piecewise b
// is stored row by row (exact, month, year, none).
void to_json(Json& j, const RecallModel& m);
void from_json(const Json& j, RecallModel& m);

// A scenario object may name a "preset" and override any of its fields.
void to_json(Json& j, const Scenario& sc);
void from_json(const Json& j, Scenario& sc);

void to_json(Json& j, const ParametricFit& fit);
void from_json(const Json& j, ParametricFit& fit);

void to_json(Json& j, const NpFit& fit);

void to_json(Json& j, const GofResult& res);

// "scenario" is a preset name or a scenario object; a top-level "n"
// overrides its sample size. "age_grid" is a list or {"from","to","step"}.
void to_json(Json& j, const McConfig& cfg);
void from_json(const Json& j, McConfig& cfg);

// Preset name, or path to a scenario JSON file.
Scenario load_scenario(const std::string& preset_or_path);

Json read_json_file(const std::string& path);
// Two-space indent and a trailing newline.
void write_json_file(const std::string& path, const Json& j);
std::string dump_json(const Json& j);

// 64-bit FNV-1a, as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);
std::string file_digest(const std::string& path);

}  // namespace recallsurv
