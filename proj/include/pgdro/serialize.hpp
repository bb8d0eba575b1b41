#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "pgdro/network.hpp"
#include "pgdro/pipeline.hpp"
#include "pgdro/training.hpp"

namespace pgdro {

// Text model format:
//   pgdro-network v1
//   layers d,h1,...,K
//   W0            followed by one comma-separated line per weight row
//   b0            followed by one comma-separated line
//   ...
// Values use shortest round-trip decimals, so load(save(net)) == net.
inline constexpr std::string_view kNetworkMagic = "pgdro-network v1";

std::string format_network(const Network& net);
Network parse_network(std::string_view text, std::string_view source = "<memory>");
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

nlohmann::json to_json(const MetricsReport& report, const GroupSpace& space);
nlohmann::json to_json(const TrainHistory& history, const GroupSpace& space);
nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const PipelineReport& report, const GroupSpace& space);

// Aligned-column summary of a metrics report for terminals.
std::string format_metrics_table(const MetricsReport& report, const GroupSpace& space);

// Per-group CSV: group,label,env,count,accuracy.
std::string format_metrics_csv(const MetricsReport& report, const GroupSpace& space);

}  // namespace pgdro
