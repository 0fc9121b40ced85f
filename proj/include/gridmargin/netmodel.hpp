#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "gridmargin/errors.hpp"

namespace gridmargin {

enum class BranchKind { Line, Transformer };

// How a plant behaves at its terminal bus:
//   GflPq          - grid-following inverter tracking the grid; holds (P, Q)
//   GridSupporting - grid-following inverter with direct AC voltage control; holds (P, |V|)
//   Gfm            - grid-forming inverter; imposes |V| and (once solved) a stiff angle
//   InfiniteBus    - the angle-reference voltage source absorbing the imbalance
enum class ControlType { GflPq, GridSupporting, Gfm, InfiniteBus };

// Solver role of a bus. Slack and Vtheta are handled identically by the
// solver (both fully fixed); Slack is additionally the angle reference.
enum class BusRole { Slack, Vtheta, Pv, Pq };

struct Bus {
    int id = 0;
    std::string name;
};

struct Branch {
    int from_bus = 0;
    int to_bus = 0;
    double resistance_pu = 0.0;
    double reactance_pu = 0.0;
    BranchKind kind = BranchKind::Line;
};

struct Plant {
    int bus = 0;
    ControlType control_type = ControlType::GflPq;
    double p_nominal_pu = 0.0;
    double p_setpoint_pu = 0.0;
    double q_setpoint_pu = 0.0;
    double v_setpoint_pu = 1.0;
};

struct Load {
    int bus = 0;
    double p_demand_pu = 0.0;
    double q_demand_pu = 0.0;
};

// The single source of truth for topology. All quantities are per-unit on a
// common system base; angles never appear here (they are solved).
struct Network {
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Plant> plants;
    std::vector<Load> loads;

    // Position of a bus id within `buses`; throws CaseError if unknown.
    int index_of(int bus_id) const;
    bool has_bus(int bus_id) const;
    const Plant* plant_at(int bus_id) const;  // nullptr when the bus has no plant
    const Load* load_at(int bus_id) const;    // nullptr when the bus has no load
    int slack_bus_id() const;                 // bus of the unique InfiniteBus plant
};

// Structural validation shared by the parser and by programmatic callers.
// Throws CaseError with a distinct message per violation.
void validate(const Network& net);

// Real and imaginary parts of the nodal admittance matrix, dense, indexed by
// bus position. No shunt elements are modeled, so every diagonal entry equals
// the negated sum of its row's off-diagonals.
struct AdmittanceMatrix {
    Eigen::MatrixXd g;
    Eigen::MatrixXd b;
};

// A Network with every bus assigned a solver role plus the setpoints the
// solver consumes. Vectors are indexed by bus position. Entries are only
// meaningful for the roles noted.
struct TypedNetwork {
    Network network;
    AdmittanceMatrix y;
    std::vector<BusRole> role;
    Eigen::VectorXd fixed_angle;    // rad; Slack, Vtheta
    Eigen::VectorXd fixed_voltage;  // p.u.; Slack, Vtheta, Pv
    Eigen::VectorXd scheduled_p;    // net injection; Pv, Pq
    Eigen::VectorXd scheduled_q;    // net injection; Pq
    std::vector<int> pv_index;      // bus positions, ascending bus id
    std::vector<int> pq_index;      // bus positions, ascending bus id

    int n_buses() const { return static_cast<int>(role.size()); }
    int n_free() const { return static_cast<int>(pv_index.size() + 2 * pq_index.size()); }

    // Column of this bus's angle in the free-variable vector
    // x = [theta_pv; theta_pq; v_pq] (each group ascending bus id); -1 if fixed.
    int theta_position(int bus_pos) const;
    // Column of this bus's voltage magnitude in x; -1 unless the bus is Pq.
    int v_position(int bus_pos) const;
    // Row of this bus's active-power mismatch in the residual ordering
    // [f_p over Pv; f_p over Pq; f_q over Pq]; -1 for Slack/Vtheta buses.
    int p_row(int bus_pos) const;

    // Recompute pv_index/pq_index after editing `role`.
    void rebuild_indices();
};

// Parse the JSON case format (see README for the schema). Errors are
// reported distinctly: syntax errors carry line/position; structural errors
// name the violation (duplicate bus id, dangling endpoint, missing slack,
// multiple slack buses, zero-impedance branch, ...).
Network parse_case(const std::string& text);

// Emit the case format such that parse_case(serialize(net)) reproduces the
// network exactly, including every floating-point field.
std::string serialize(const Network& net);

// Field-exact equality (used to assert the round-trip property).
bool identical(const Network& a, const Network& b);

AdmittanceMatrix build_admittance(const Network& net);

// Typing used for the base operating-point power flow: grid-forming plants
// regulate voltage like any PV source (their stiff angle is an outcome of the
// base case, not an input to it).
TypedNetwork assign_base_types(const Network& net);

// Full control-type mapping:
//   GflPq -> Pq, GridSupporting -> Pv, InfiniteBus -> Slack,
//   Gfm -> Vtheta with the angle taken from `base_angle_rad` (indexed by bus
//   position, normally the solved base-case angles) and |V| from its setpoint,
//   plant-less buses -> Pq with negated load demand.
// Throws CaseError when a Gfm plant is present but no base angles are given.
TypedNetwork assign_node_types(const Network& net,
                               const std::optional<Eigen::VectorXd>& base_angle_rad);

const char* to_string(BusRole role);
const char* to_string(ControlType type);
const char* to_string(BranchKind kind);

}  // namespace gridmargin
