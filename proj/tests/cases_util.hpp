#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "gridmargin/netmodel.hpp"

namespace testutil {

inline std::string case_path(const std::string& name) {
    return std::string(GRIDMARGIN_CASES_DIR) + "/" + name;
}

inline std::string read_case_text(const std::string& name) {
    std::ifstream in(case_path(name), std::ios::binary);
    if (!in) throw std::runtime_error("cannot open case file: " + case_path(name));
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline gridmargin::Network load_case(const std::string& name) {
    return gridmargin::parse_case(read_case_text(name));
}

// A minimal two-bus lossless link: infinite bus feeding one plant over a
// single series reactance. Used wherever a closed-form answer exists.
inline gridmargin::Network two_bus(double x_pu, double p_set = 1.0, double p_nom = 1.0) {
    gridmargin::Network net;
    net.buses = {{1, "grid"}, {2, "plant"}};
    net.branches = {{1, 2, 0.0, x_pu, gridmargin::BranchKind::Line}};
    gridmargin::Plant grid;
    grid.bus = 1;
    grid.control_type = gridmargin::ControlType::InfiniteBus;
    grid.v_setpoint_pu = 1.0;
    gridmargin::Plant plant;
    plant.bus = 2;
    plant.control_type = gridmargin::ControlType::GridSupporting;
    plant.p_nominal_pu = p_nom;
    plant.p_setpoint_pu = p_set;
    plant.v_setpoint_pu = 1.0;
    net.plants = {grid, plant};
    return net;
}

}  // namespace testutil
