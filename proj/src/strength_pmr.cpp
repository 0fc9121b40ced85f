#include "gridmargin/strength_pmr.hpp"

#include <algorithm>
#include <limits>

namespace gridmargin {

namespace {

// The rating a maximum power is divided by. Empty when the bus carries no
// plant (a bare search can still run; the ratio is then left unset).
std::optional<double> derive_denominator(const Network& net, int bus, DenominatorMode mode) {
    const Plant* plant = net.plant_at(bus);
    if (!plant) return std::nullopt;
    if (mode == DenominatorMode::Nominal) return plant->p_nominal_pu;
    const Load* load = net.load_at(bus);
    const double p_load = load ? load->p_demand_pu : 0.0;
    return std::abs(plant->p_setpoint_pu - std::abs(p_load));
}

}  // namespace

PmrResult pmax_search(const TypedNetwork& tn, int bus, const PmrOptions& options,
                      const std::optional<State>& base_init) {
    const int pos = tn.network.index_of(bus);
    if (tn.role[pos] != BusRole::Pv && tn.role[pos] != BusRole::Pq) {
        throw CaseError("bus " + std::to_string(bus) +
                        " has no rampable injection (it is fully fixed)");
    }
    if (!(options.coarse_step_pu > 0.0) || !(options.bisection_tol_pu > 0.0)) {
        throw CaseError("search steps must be positive");
    }

    const Plant* plant = tn.network.plant_at(bus);
    const Load* load = tn.network.load_at(bus);
    const double p_load = load ? load->p_demand_pu : 0.0;
    const double q_load = load ? load->q_demand_pu : 0.0;

    // Reported power = net solver-level injection + offset. Netting the local
    // load reports the net delivery; keeping it as fixed demand reports the
    // plant-side output, load included.
    const double offset = options.nets_local_load() ? 0.0 : p_load;

    double tan_phi = 0.0;
    if (options.q_mode == QMode::ConstantPowerFactor && tn.role[pos] == BusRole::Pq) {
        if (!plant || plant->p_setpoint_pu == 0.0) {
            throw CaseError("the constant-power-factor policy needs a plant with a nonzero "
                            "active setpoint at bus " + std::to_string(bus));
        }
        tan_phi = plant->q_setpoint_pu / plant->p_setpoint_pu;
    }

    // Cap on the reported power.
    double cap = std::numeric_limits<double>::infinity();
    if (options.cap_pu) {
        cap = *options.cap_pu;
    } else if (plant && plant->p_nominal_pu > 0.0) {
        cap = options.cap_multiple * plant->p_nominal_pu;
    }
    const double cap_net = cap - offset;

    PmrResult result;
    result.bus = bus;
    result.denominator_mode = options.denominator_mode;
    result.study_role = tn.role[pos];
    result.report_offset_pu = offset;

    TypedNetwork work = tn;
    const double p_base = tn.scheduled_p(pos);

    auto probe = [&](double p_net, const std::optional<State>& warm) {
        work.scheduled_p(pos) = p_net;
        if (tn.role[pos] == BusRole::Pq && options.q_mode == QMode::ConstantPowerFactor) {
            work.scheduled_q(pos) = (p_net + p_load) * tan_phi - q_load;
        }
        PowerFlowSolution sol = solve(work, warm, options.solve);
        result.search_trace.push_back({p_net + offset, sol.converged, sol.iterations});
        result.iterations_total += sol.iterations;
        return sol;
    };

    PowerFlowSolution sol_ok = probe(p_base, base_init);
    if (!sol_ok.converged) {
        throw StudyError("base power flow did not converge (mismatch " +
                         std::to_string(sol_ok.final_mismatch) + " after " +
                         std::to_string(sol_ok.iterations) + " iterations)");
    }
    double p_ok = p_base;

    if (cap_net <= p_base) {
        result.saturated = true;
    } else {
        // Coarse ramp, each probe warm-started from the last accepted state
        // (a cold start near fixed-angle buses can fall onto a spurious
        // zero-voltage solution and misreport the limit).
        double p_fail = std::numeric_limits<double>::quiet_NaN();
        for (long k = 1; k <= 2000000; ++k) {
            double p_try = p_base + static_cast<double>(k) * options.coarse_step_pu;
            bool at_cap = false;
            if (p_try >= cap_net) {
                p_try = cap_net;
                at_cap = true;
            }
            PowerFlowSolution sol = probe(p_try, sol_ok.state);
            if (sol.converged) {
                p_ok = p_try;
                sol_ok = sol;
                if (at_cap) {
                    result.saturated = true;
                    break;
                }
            } else {
                p_fail = p_try;
                break;
            }
        }
        if (!result.saturated && !std::isfinite(p_fail)) {
            throw StudyError("loadability search did not terminate");
        }
        if (!result.saturated) {
            while (p_fail - p_ok > options.bisection_tol_pu) {
                const double mid = 0.5 * (p_ok + p_fail);
                PowerFlowSolution sol = probe(mid, sol_ok.state);
                if (sol.converged) {
                    p_ok = mid;
                    sol_ok = sol;
                } else {
                    p_fail = mid;
                }
            }
            result.bracket_fail_pu = p_fail + offset;
        }
    }

    result.p_max_pu = p_ok + offset;
    result.last_converged_solution = sol_ok;
    std::stable_sort(result.search_trace.begin(), result.search_trace.end(),
                     [](const TracePoint& a, const TracePoint& b) { return a.p_pu < b.p_pu; });

    if (const auto denom = derive_denominator(tn.network, bus, options.denominator_mode);
        denom && *denom > 0.0) {
        result.denominator_pu = *denom;
        result.pmr = result.p_max_pu / *denom;
    }
    return result;
}

TypedNetwork ramp_typed_network(const Network& net, const PowerFlowSolution& base,
                                int study_bus) {
    const Plant* plant = net.plant_at(study_bus);
    if (!plant) {
        throw CaseError("no plant at bus " + std::to_string(study_bus));
    }
    if (plant->control_type == ControlType::InfiniteBus) {
        throw CaseError("bus " + std::to_string(study_bus) +
                        " is the infinite bus; its output is not a rampable injection");
    }

    TypedNetwork tn = assign_node_types(net, base.state.theta);
    if (plant->control_type == ControlType::Gfm) {
        // The study plant's own injection must stay specifiable, so it is
        // ramped as a voltage regulator rather than a fully fixed source.
        const int pos = net.index_of(study_bus);
        const Load* load = net.load_at(study_bus);
        tn.role[pos] = BusRole::Pv;
        tn.fixed_voltage(pos) = plant->v_setpoint_pu;
        tn.scheduled_p(pos) = plant->p_setpoint_pu - (load ? load->p_demand_pu : 0.0);
        tn.rebuild_indices();
    }
    return tn;
}

PmrResult pmr(const Network& net, int bus, const PmrOptions& options) {
    validate(net);
    if (!net.has_bus(bus)) throw CaseError("unknown bus id " + std::to_string(bus));

    const Plant* plant = net.plant_at(bus);
    if (!plant) throw CaseError("no plant at bus " + std::to_string(bus));
    if (plant->control_type == ControlType::InfiniteBus) {
        throw CaseError("bus " + std::to_string(bus) +
                        " is the infinite bus; its output is not a rampable injection");
    }
    const auto denom = derive_denominator(net, bus, options.denominator_mode);
    if (!(*denom > 0.0)) {
        throw StudyError("the rating denominator at bus " + std::to_string(bus) +
                         " is not positive; choose the other denominator mode");
    }

    const TypedNetwork tn_base = assign_base_types(net);
    const PowerFlowSolution base = solve(tn_base, std::nullopt, options.solve);
    if (!base.converged) {
        throw StudyError("base power flow did not converge (mismatch " +
                         std::to_string(base.final_mismatch) + ")");
    }

    const TypedNetwork tn_ramp = ramp_typed_network(net, base, bus);
    PmrOptions search = options;
    if (!search.cap_pu) search.cap_pu = options.cap_multiple * *denom;

    PmrResult result = pmax_search(tn_ramp, bus, search, base.state);
    result.denominator_pu = *denom;
    result.pmr = result.p_max_pu / *denom;
    return result;
}

}  // namespace gridmargin
