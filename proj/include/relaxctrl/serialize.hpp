#ifndef RELAXCTRL_SERIALIZE_HPP
#define RELAXCTRL_SERIALIZE_HPP

#include <json.hpp>
#include <string>

#include "relaxctrl/measures.hpp"
#include "relaxctrl/optimizer.hpp"
#include "relaxctrl/pde.hpp"

namespace relaxctrl {

using json = nlohmann::json;

json grid_to_json(const Grid& grid);
Grid grid_from_json(const json& j);

json control_set_to_json(const ControlSet& B);
ControlSet control_set_from_json(const json& j);

/// Weight arrays round-trip bit-exactly (shortest-representation doubles).
json relaxed_control_to_json(const RelaxedControl& mu);
RelaxedControl relaxed_control_from_json(const json& j);

json young_measure_to_json(const SpaceTimeYoungMeasure& nu);
SpaceTimeYoungMeasure young_measure_from_json(const json& j);

json report_to_json(const SolveReport& report);

json trajectory_to_json(const Trajectory& y);

/// One row per time step, nodal values flattened x-fastest with the
/// component innermost; grid metadata in '#' header lines.
void trajectory_to_csv(const Trajectory& y, const std::string& path);

void write_profile_csv(const std::string& path, const std::string& column,
                       const std::vector<double>& values, double dt);

void write_text_file(const std::string& path, const std::string& contents);

}  // namespace relaxctrl

#endif
