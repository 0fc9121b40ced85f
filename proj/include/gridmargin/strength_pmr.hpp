#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "gridmargin/powerflow.hpp"

namespace gridmargin {

// Nominal divides the maximum power by the plant's nominal rating; Actual by
// the plant's actual base output net of any local load, |P_actual - |P_load||.
enum class DenominatorMode { Nominal, Actual };

// Reactive policy for a following-type (Pq) study bus during the ramp:
// HoldBaseQ keeps Q at its base-case value; ConstantPowerFactor scales Q with
// the ramped plant output so the base power factor is preserved.
enum class QMode { HoldBaseQ, ConstantPowerFactor };

struct PmrOptions {
    double coarse_step_pu = 0.05;
    double bisection_tol_pu = 1e-3;
    double cap_multiple = 20.0;  // saturation cap as a multiple of the denominator
    DenominatorMode denominator_mode = DenominatorMode::Nominal;
    QMode q_mode = QMode::HoldBaseQ;
    // Net the study bus's local load into the ramped injection (the reported
    // maximum is then the delivery capacity of the network) instead of keeping
    // it as fixed demand (the reported maximum then includes the load
    // absorption). Defaults: true in Actual mode, false in Nominal mode.
    std::optional<bool> net_local_load;
    // Absolute cap on the reported power; when unset it is derived as
    // cap_multiple times the denominator (or the plant nominal rating when
    // the search is run standalone).
    std::optional<double> cap_pu;
    SolveOptions solve;

    bool nets_local_load() const {
        return net_local_load.value_or(denominator_mode == DenominatorMode::Actual);
    }
};

struct TracePoint {
    double p_pu = 0.0;
    bool converged = false;
    int iterations = 0;
};

struct PmrResult {
    int bus = 0;
    double p_max_pu = 0.0;       // largest converged injection (reported scale)
    double denominator_pu = 0.0;
    double pmr = 0.0;            // p_max / denominator; the cap multiple when saturated
    bool saturated = false;      // the search hit the cap while still converging
    DenominatorMode denominator_mode = DenominatorMode::Nominal;
    BusRole study_role = BusRole::Pq;  // role the study bus was ramped under
    PowerFlowSolution last_converged_solution;
    std::vector<TracePoint> search_trace;  // sorted by p ascending
    int iterations_total = 0;
    // First non-convergent power bounding p_max from above (NaN if saturated),
    // and the offset between reported and net solver-level power (the local
    // load added back when it is kept as fixed demand).
    double bracket_fail_pu = std::numeric_limits<double>::quiet_NaN();
    double report_offset_pu = 0.0;
};

// Ramp the study bus's net injection upward from its scheduled base value in
// coarse steps, warm-starting every solve from the previous accepted state
// (cold starts near fixed-angle buses can descend onto a spurious
// zero-voltage branch, so the chain of warm starts is essential). On the
// first failure, bisect the bracket down to bisection_tol_pu; p_max is the
// bracket's converged end. The study bus must be Pv or Pq in `tn`.
// `base_init` seeds the base solve (callers with a solved operating point
// should pass its state). Throws StudyError if the base solve fails.
PmrResult pmax_search(const TypedNetwork& tn, int bus, const PmrOptions& options = {},
                      const std::optional<State>& base_init = {});

// Full metric: base power flow (grid-forming plants as voltage regulators),
// ramp typing (study plant: GflPq stays Pq with Q per q_mode, GridSupporting
// stays Pv, Gfm is ramped as Pv since a fully fixed bus has no specifiable
// injection; non-study Gfm plants stay frozen at their base-case angles),
// the warm-started search above, then the denominator per mode.
PmrResult pmr(const Network& net, int bus, const PmrOptions& options = {});

// The ramp typing used by pmr(), exposed so fold studies can reuse it.
TypedNetwork ramp_typed_network(const Network& net, const PowerFlowSolution& base,
                                int study_bus);

}  // namespace gridmargin
