#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "mmexit/model.hpp"
#include "mmexit/risk_dividend.hpp"

namespace mmexit {

/// Contents of a model file. Risk files also fill `risk`; `model` is then its base model.
struct Scenario {
    ModelSpec model;
    std::optional<RiskModelSpec> risk;
};

/// Parses the JSON model format described in the README.
///
/// Malformed documents and schema violations raise ValidationError. Plain models are not
/// checked against the model invariants (see validate()); risk files are, because their
/// base model is derived from them.
Scenario parse_scenario(const std::string& text);

/// Reads and parses a file; an unreadable path raises ArgumentError.
Scenario load_scenario(const std::filesystem::path& path);

std::string to_json_text(const ModelSpec& spec);
std::string to_json_text(const RiskModelSpec& rs);

} // namespace mmexit
