#pragma once

#include <string>
#include <vector>

#include "gridmargin/netmodel.hpp"

namespace gridmargin {

struct TheveninEquivalent {
    int bus = 0;              // the study bus the request named
    int measured_at_bus = 0;  // equals `bus` unless the study transformer was excluded
    double v_source_pu = 0.0; // the slack setpoint
    double z_th_pu = 0.0;     // magnitude of the driving-point impedance
    std::vector<std::string> excluded_elements;
};

struct ScrResult {
    int bus = 0;
    double z_th_pu = 0.0;
    double scc_pu = 0.0;  // v_source^2 / z_th
    double p_nom_pu = 0.0;
    double scr = 0.0;     // scc / p_nom
    std::vector<std::string> excluded_elements;
};

// Driving-point impedance at a bus with every inverter plant open-circuited
// and the slack modeled as a zero-internal-impedance source (its node is
// grounded before the reduction). The reduction factors the passive
// admittance matrix and solves one column; it never forms a full inverse.
//
// When exclude_study_transformer is true and the study bus is served by
// exactly one transformer branch, that branch is removed and the impedance is
// measured at its network-side endpoint (the common convention of rating
// strength at the point of interconnection). With no transformer at the bus
// the flag is a no-op; with several the request is ambiguous and rejected.
TheveninEquivalent thevenin_reactance(const Network& net, int bus,
                                      bool exclude_study_transformer = true);

// Short-circuit capacity and ratio: scc = |V_s|^2 / |Z_th|, scr = scc / p_nom.
ScrResult scr(const Network& net, int bus, double p_nom_pu,
              bool exclude_study_transformer = true);

}  // namespace gridmargin
