#pragma once

#include <string>

#include "quadfusion/harness.hpp"

namespace quadfusion::config {

// Parses a scenario JSON document on top of the demo defaults: every field is
// optional, unknown keys are rejected. Covariance entries accept a scalar
// (c * identity), a flat array (diagonal), or nested arrays (full matrix).
// Malformed input throws std::invalid_argument.
harness::Scenario scenario_from_json(const std::string& text);

// Reads and parses a scenario file; unreadable files throw harness::IoError.
harness::Scenario load_scenario(const std::string& path);

std::string scenario_to_json(const harness::Scenario& sc);

}  // namespace quadfusion::config
