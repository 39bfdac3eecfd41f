#pragma once

// JSON network files and the built-in three-inverter case-study fixture.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "dampplan/network.hpp"

namespace dampplan {

/// Parse a network document. Relative table paths resolve against base_dir.
/// Throws Error(Parse) with line/column, Error(Validation) with every diagnostic.
NetworkGraph parse_network(const std::string& text, const std::filesystem::path& base_dir = {});
NetworkGraph load_network(const std::filesystem::path& path);

nlohmann::ordered_json network_to_json(const NetworkGraph& g);
void save_network(const NetworkGraph& g, const std::filesystem::path& path);

nlohmann::ordered_json inverter_params_to_json(const InverterParams& p);
nlohmann::ordered_json ad_params_to_json(const ADParams& p);
ADParams ad_params_from_json(const nlohmann::json& j, const ADParams& defaults = {});

/// Four nodes: grid (via cable and transformer) at node 1, inverters at 2-4.
NetworkGraph case_study_network();
void emit_fixture(const std::filesystem::path& path);

}  // namespace dampplan
