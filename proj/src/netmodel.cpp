#include "gridmargin/netmodel.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>
#include <sstream>

namespace gridmargin {

using ordered_json = nlohmann::ordered_json;

int Network::index_of(int bus_id) const {
    for (size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].id == bus_id) return static_cast<int>(i);
    }
    throw CaseError("unknown bus id " + std::to_string(bus_id));
}

bool Network::has_bus(int bus_id) const {
    for (const auto& b : buses) {
        if (b.id == bus_id) return true;
    }
    return false;
}

const Plant* Network::plant_at(int bus_id) const {
    for (const auto& p : plants) {
        if (p.bus == bus_id) return &p;
    }
    return nullptr;
}

const Load* Network::load_at(int bus_id) const {
    for (const auto& l : loads) {
        if (l.bus == bus_id) return &l;
    }
    return nullptr;
}

int Network::slack_bus_id() const {
    for (const auto& p : plants) {
        if (p.control_type == ControlType::InfiniteBus) return p.bus;
    }
    throw CaseError("missing slack plant");
}

void validate(const Network& net) {
    if (net.buses.empty()) throw CaseError("network has no buses");

    std::set<int> ids;
    for (const auto& b : net.buses) {
        if (!ids.insert(b.id).second) {
            throw CaseError("duplicate bus id " + std::to_string(b.id));
        }
    }

    for (size_t i = 0; i < net.branches.size(); ++i) {
        const Branch& br = net.branches[i];
        for (int end : {br.from_bus, br.to_bus}) {
            if (!ids.count(end)) {
                throw CaseError("dangling endpoint: branch " + std::to_string(i + 1) +
                                " (" + std::to_string(br.from_bus) + "-" +
                                std::to_string(br.to_bus) + ") references unknown bus " +
                                std::to_string(end));
            }
        }
        if (br.from_bus == br.to_bus) {
            throw CaseError("branch " + std::to_string(i + 1) + " endpoints must differ");
        }
        if (br.resistance_pu < 0.0) {
            throw CaseError("branch " + std::to_string(i + 1) + " has negative resistance");
        }
        if (br.resistance_pu * br.resistance_pu + br.reactance_pu * br.reactance_pu == 0.0) {
            throw CaseError("zero-impedance branch " + std::to_string(i + 1) + " (" +
                            std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus) + ")");
        }
    }

    int slack_count = 0;
    std::set<int> plant_buses;
    for (const auto& p : net.plants) {
        if (!ids.count(p.bus)) {
            throw CaseError("dangling endpoint: plant references unknown bus " +
                            std::to_string(p.bus));
        }
        if (!plant_buses.insert(p.bus).second) {
            throw CaseError("multiple plants at bus " + std::to_string(p.bus));
        }
        if (p.control_type == ControlType::InfiniteBus) ++slack_count;
        if (p.p_nominal_pu < 0.0) {
            throw CaseError("plant at bus " + std::to_string(p.bus) +
                            " has negative nominal power");
        }
        if (p.v_setpoint_pu <= 0.0 && p.control_type != ControlType::GflPq) {
            throw CaseError("plant at bus " + std::to_string(p.bus) +
                            " needs a positive voltage setpoint");
        }
    }
    if (slack_count == 0) throw CaseError("missing slack plant");
    if (slack_count > 1) throw CaseError("multiple slack buses");

    for (const auto& l : net.loads) {
        if (!ids.count(l.bus)) {
            throw CaseError("dangling endpoint: load references unknown bus " +
                            std::to_string(l.bus));
        }
    }
}

namespace {

double require_number(const ordered_json& j, const char* field, const std::string& context) {
    if (!j.contains(field) || !j[field].is_number()) {
        throw CaseError(context + ": missing numeric field '" + field + "'");
    }
    return j[field].get<double>();
}

int require_int(const ordered_json& j, const char* field, const std::string& context) {
    if (!j.contains(field) || !j[field].is_number_integer()) {
        throw CaseError(context + ": missing integer field '" + field + "'");
    }
    return j[field].get<int>();
}

double optional_number(const ordered_json& j, const char* field, double fallback) {
    if (!j.contains(field)) return fallback;
    if (!j[field].is_number()) throw CaseError(std::string("field '") + field + "' must be a number");
    return j[field].get<double>();
}

ControlType parse_control_type(const std::string& s, const std::string& context) {
    if (s == "gfl_pq") return ControlType::GflPq;
    if (s == "grid_supporting") return ControlType::GridSupporting;
    if (s == "gfm") return ControlType::Gfm;
    if (s == "infinite_bus") return ControlType::InfiniteBus;
    throw CaseError(context + ": unknown control_type '" + s + "'");
}

BranchKind parse_kind(const std::string& s, const std::string& context) {
    if (s == "line") return BranchKind::Line;
    if (s == "transformer") return BranchKind::Transformer;
    throw CaseError(context + ": unknown branch kind '" + s + "'");
}

}  // namespace

Network parse_case(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw CaseError(std::string("syntax error: ") + e.what());
    }
    if (!j.is_object()) throw CaseError("syntax error: case document must be an object");

    Network net;
    for (const auto& jb : j.value("buses", ordered_json::array())) {
        Bus b;
        b.id = require_int(jb, "id", "bus");
        b.name = jb.value("name", std::string{});
        net.buses.push_back(b);
    }
    int branch_no = 0;
    for (const auto& jb : j.value("branches", ordered_json::array())) {
        ++branch_no;
        const std::string ctx = "branch " + std::to_string(branch_no);
        Branch br;
        br.from_bus = require_int(jb, "from", ctx);
        br.to_bus = require_int(jb, "to", ctx);
        br.resistance_pu = require_number(jb, "r_pu", ctx);
        br.reactance_pu = require_number(jb, "x_pu", ctx);
        if (!jb.contains("kind") || !jb["kind"].is_string()) {
            throw CaseError(ctx + ": missing string field 'kind'");
        }
        br.kind = parse_kind(jb["kind"].get<std::string>(), ctx);
        net.branches.push_back(br);
    }
    for (const auto& jp : j.value("plants", ordered_json::array())) {
        Plant p;
        p.bus = require_int(jp, "bus", "plant");
        const std::string ctx = "plant at bus " + std::to_string(p.bus);
        if (!jp.contains("control_type") || !jp["control_type"].is_string()) {
            throw CaseError(ctx + ": missing string field 'control_type'");
        }
        p.control_type = parse_control_type(jp["control_type"].get<std::string>(), ctx);
        p.p_nominal_pu = optional_number(jp, "p_nom_pu", 0.0);
        p.p_setpoint_pu = optional_number(jp, "p_set_pu", 0.0);
        p.q_setpoint_pu = optional_number(jp, "q_set_pu", 0.0);
        p.v_setpoint_pu = optional_number(jp, "v_set_pu", 1.0);
        net.plants.push_back(p);
    }
    for (const auto& jl : j.value("loads", ordered_json::array())) {
        Load l;
        l.bus = require_int(jl, "bus", "load");
        l.p_demand_pu = require_number(jl, "p_pu", "load at bus " + std::to_string(l.bus));
        l.q_demand_pu = optional_number(jl, "q_pu", 0.0);
        net.loads.push_back(l);
    }

    validate(net);
    return net;
}

std::string serialize(const Network& net) {
    ordered_json j;
    j["buses"] = ordered_json::array();
    for (const auto& b : net.buses) {
        j["buses"].push_back({{"id", b.id}, {"name", b.name}});
    }
    j["branches"] = ordered_json::array();
    for (const auto& br : net.branches) {
        j["branches"].push_back({{"from", br.from_bus},
                                 {"to", br.to_bus},
                                 {"r_pu", br.resistance_pu},
                                 {"x_pu", br.reactance_pu},
                                 {"kind", to_string(br.kind)}});
    }
    j["plants"] = ordered_json::array();
    for (const auto& p : net.plants) {
        j["plants"].push_back({{"bus", p.bus},
                               {"control_type", to_string(p.control_type)},
                               {"p_nom_pu", p.p_nominal_pu},
                               {"p_set_pu", p.p_setpoint_pu},
                               {"q_set_pu", p.q_setpoint_pu},
                               {"v_set_pu", p.v_setpoint_pu}});
    }
    j["loads"] = ordered_json::array();
    for (const auto& l : net.loads) {
        j["loads"].push_back({{"bus", l.bus}, {"p_pu", l.p_demand_pu}, {"q_pu", l.q_demand_pu}});
    }
    return j.dump(2) + "\n";
}

bool identical(const Network& a, const Network& b) {
    if (a.buses.size() != b.buses.size() || a.branches.size() != b.branches.size() ||
        a.plants.size() != b.plants.size() || a.loads.size() != b.loads.size()) {
        return false;
    }
    for (size_t i = 0; i < a.buses.size(); ++i) {
        if (a.buses[i].id != b.buses[i].id || a.buses[i].name != b.buses[i].name) return false;
    }
    for (size_t i = 0; i < a.branches.size(); ++i) {
        const Branch &x = a.branches[i], &y = b.branches[i];
        if (x.from_bus != y.from_bus || x.to_bus != y.to_bus ||
            x.resistance_pu != y.resistance_pu || x.reactance_pu != y.reactance_pu ||
            x.kind != y.kind) {
            return false;
        }
    }
    for (size_t i = 0; i < a.plants.size(); ++i) {
        const Plant &x = a.plants[i], &y = b.plants[i];
        if (x.bus != y.bus || x.control_type != y.control_type ||
            x.p_nominal_pu != y.p_nominal_pu || x.p_setpoint_pu != y.p_setpoint_pu ||
            x.q_setpoint_pu != y.q_setpoint_pu || x.v_setpoint_pu != y.v_setpoint_pu) {
            return false;
        }
    }
    for (size_t i = 0; i < a.loads.size(); ++i) {
        const Load &x = a.loads[i], &y = b.loads[i];
        if (x.bus != y.bus || x.p_demand_pu != y.p_demand_pu || x.q_demand_pu != y.q_demand_pu) {
            return false;
        }
    }
    return true;
}

AdmittanceMatrix build_admittance(const Network& net) {
    validate(net);
    const int n = static_cast<int>(net.buses.size());
    AdmittanceMatrix y;
    y.g = Eigen::MatrixXd::Zero(n, n);
    y.b = Eigen::MatrixXd::Zero(n, n);
    for (const auto& br : net.branches) {
        const int i = net.index_of(br.from_bus);
        const int j = net.index_of(br.to_bus);
        const double r = br.resistance_pu;
        const double x = br.reactance_pu;
        const double d = r * r + x * x;
        const double g = r / d;
        const double b = -x / d;
        y.g(i, i) += g;
        y.g(j, j) += g;
        y.g(i, j) -= g;
        y.g(j, i) -= g;
        y.b(i, i) += b;
        y.b(j, j) += b;
        y.b(i, j) -= b;
        y.b(j, i) -= b;
    }
    return y;
}

int TypedNetwork::theta_position(int bus_pos) const {
    for (size_t k = 0; k < pv_index.size(); ++k) {
        if (pv_index[k] == bus_pos) return static_cast<int>(k);
    }
    for (size_t k = 0; k < pq_index.size(); ++k) {
        if (pq_index[k] == bus_pos) return static_cast<int>(pv_index.size() + k);
    }
    return -1;
}

int TypedNetwork::v_position(int bus_pos) const {
    for (size_t k = 0; k < pq_index.size(); ++k) {
        if (pq_index[k] == bus_pos) {
            return static_cast<int>(pv_index.size() + pq_index.size() + k);
        }
    }
    return -1;
}

int TypedNetwork::p_row(int bus_pos) const {
    // Active-mismatch rows share the ordering of the angle columns.
    return theta_position(bus_pos);
}

void TypedNetwork::rebuild_indices() {
    pv_index.clear();
    pq_index.clear();
    // Group membership is ordered by ascending bus id for determinism.
    std::vector<int> order(role.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return network.buses[a].id < network.buses[b].id;
    });
    for (int pos : order) {
        if (role[pos] == BusRole::Pv) pv_index.push_back(pos);
        if (role[pos] == BusRole::Pq) pq_index.push_back(pos);
    }
}

namespace {

TypedNetwork assign_types_impl(const Network& net,
                               const std::optional<Eigen::VectorXd>& base_angle_rad,
                               bool gfm_as_pv) {
    validate(net);
    const int n = static_cast<int>(net.buses.size());
    TypedNetwork tn;
    tn.network = net;
    tn.y = build_admittance(net);
    tn.role.assign(n, BusRole::Pq);
    tn.fixed_angle = Eigen::VectorXd::Zero(n);
    tn.fixed_voltage = Eigen::VectorXd::Ones(n);
    tn.scheduled_p = Eigen::VectorXd::Zero(n);
    tn.scheduled_q = Eigen::VectorXd::Zero(n);

    for (int pos = 0; pos < n; ++pos) {
        const int id = net.buses[pos].id;
        const Plant* plant = net.plant_at(id);
        const Load* load = net.load_at(id);
        const double p_load = load ? load->p_demand_pu : 0.0;
        const double q_load = load ? load->q_demand_pu : 0.0;

        if (!plant) {
            tn.role[pos] = BusRole::Pq;
            tn.scheduled_p(pos) = -p_load;
            tn.scheduled_q(pos) = -q_load;
            continue;
        }
        switch (plant->control_type) {
            case ControlType::InfiniteBus:
                tn.role[pos] = BusRole::Slack;
                tn.fixed_angle(pos) = 0.0;
                tn.fixed_voltage(pos) = plant->v_setpoint_pu;
                break;
            case ControlType::GridSupporting:
                tn.role[pos] = BusRole::Pv;
                tn.fixed_voltage(pos) = plant->v_setpoint_pu;
                tn.scheduled_p(pos) = plant->p_setpoint_pu - p_load;
                break;
            case ControlType::GflPq:
                tn.role[pos] = BusRole::Pq;
                tn.scheduled_p(pos) = plant->p_setpoint_pu - p_load;
                tn.scheduled_q(pos) = plant->q_setpoint_pu - q_load;
                break;
            case ControlType::Gfm:
                if (gfm_as_pv) {
                    tn.role[pos] = BusRole::Pv;
                    tn.fixed_voltage(pos) = plant->v_setpoint_pu;
                    tn.scheduled_p(pos) = plant->p_setpoint_pu - p_load;
                } else {
                    if (!base_angle_rad) {
                        throw CaseError(
                            "grid-forming plant at bus " + std::to_string(id) +
                            " requires base-case angles to fix its stiff angle");
                    }
                    if (base_angle_rad->size() != n) {
                        throw CaseError("base-case angle vector has wrong dimension");
                    }
                    tn.role[pos] = BusRole::Vtheta;
                    tn.fixed_angle(pos) = (*base_angle_rad)(pos);
                    tn.fixed_voltage(pos) = plant->v_setpoint_pu;
                }
                break;
        }
    }
    tn.rebuild_indices();
    return tn;
}

}  // namespace

TypedNetwork assign_base_types(const Network& net) {
    return assign_types_impl(net, std::nullopt, /*gfm_as_pv=*/true);
}

TypedNetwork assign_node_types(const Network& net,
                               const std::optional<Eigen::VectorXd>& base_angle_rad) {
    return assign_types_impl(net, base_angle_rad, /*gfm_as_pv=*/false);
}

const char* to_string(BusRole role) {
    switch (role) {
        case BusRole::Slack: return "slack";
        case BusRole::Vtheta: return "vtheta";
        case BusRole::Pv: return "pv";
        case BusRole::Pq: return "pq";
    }
    return "?";
}

const char* to_string(ControlType type) {
    switch (type) {
        case ControlType::GflPq: return "gfl_pq";
        case ControlType::GridSupporting: return "grid_supporting";
        case ControlType::Gfm: return "gfm";
        case ControlType::InfiniteBus: return "infinite_bus";
    }
    return "?";
}

const char* to_string(BranchKind kind) {
    switch (kind) {
        case BranchKind::Line: return "line";
        case BranchKind::Transformer: return "transformer";
    }
    return "?";
}

}  // namespace gridmargin
