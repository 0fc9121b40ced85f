#pragma once

#include <limits>
#include <optional>

#include "gridmargin/netmodel.hpp"

namespace gridmargin {

// Full per-bus operating state (fixed entries included), radians / per-unit.
struct State {
    Eigen::VectorXd theta;
    Eigen::VectorXd v;
};

// Replaces the active-power mismatch row of the study bus with
// f_p = p_max * (1 + lambda) - P(theta, v). The bus is identified by id and
// must carry an active-power row (Pv or Pq role).
struct Loading {
    int bus = 0;
    double lambda = 0.0;
    double p_max = 0.0;
};

// Stability of a converged operating point under the pseudo-dynamics
// x' = f(x) whose equilibria are the power flow solutions: Sep when every
// eigenvalue of df/dx has negative real part, Uep when at least one is
// positive, Unknown otherwise (e.g. at a fold, or when not converged).
enum class StabilityClass { Sep, Uep, Unknown };

struct SolveOptions {
    double tolerance = 1e-8;  // infinity-norm of the mismatch
    int max_iter = 50;
};

struct PowerFlowSolution {
    State state;
    Eigen::VectorXd p_injection;  // per bus, Slack/Vtheta implied injections included
    Eigen::VectorXd q_injection;
    int iterations = 0;
    double final_mismatch = std::numeric_limits<double>::infinity();
    bool converged = false;
    bool singular = false;  // solver stopped on a singular Jacobian with no progress
    StabilityClass classification = StabilityClass::Unknown;
};

// theta from the fixed buses' values and 0 elsewhere; v = 1 at Pq buses.
State flat_start(const TypedNetwork& tn);

// Free-variable vector x = [theta_pv; theta_pq; v_pq], groups ascending bus id.
Eigen::VectorXd pack_state(const TypedNetwork& tn, const State& st);
// Rebuild the full state from x, filling fixed entries from the typing.
State unpack_state(const TypedNetwork& tn, const Eigen::VectorXd& x);

void compute_injections(const TypedNetwork& tn, const State& st,
                        Eigen::VectorXd& p, Eigen::VectorXd& q);

// Residual ordering: active mismatches for Pv buses, then Pq buses, then
// reactive mismatches for Pq buses (each group ascending bus id).
Eigen::VectorXd mismatch(const TypedNetwork& tn, const State& st,
                         const std::optional<Loading>& loading = {});

// d(mismatch)/dx in the residual/state ordering above; this equals the
// negated conventional power-flow Jacobian. The loading offset is constant in
// the state, so it does not alter any derivative.
Eigen::MatrixXd jacobian(const TypedNetwork& tn, const State& st,
                         const std::optional<Loading>& loading = {});

// Damped Newton-Raphson. Plain non-convergence (max_iter exhausted, or a raw
// Newton step with infinity-norm > 10) is data, not an error: the solution is
// returned with converged = false and the last iterate. A singular Jacobian
// with no progress additionally sets the `singular` flag. Step control: the
// step is halved up to 4 times until the mismatch norm decreases with all
// voltages positive; if no trial decreases it, the last positive-voltage
// trial is accepted anyway (keeps near-fold iterations on the solution branch).
PowerFlowSolution solve(const TypedNetwork& tn,
                        const std::optional<State>& init = {},
                        const SolveOptions& options = {},
                        const std::optional<Loading>& loading = {});

// Everything needed to seed the unstable solution from fold data: the packed
// critical state, the critical loading, the right null direction and the
// normal-form coefficients (the seed is x_star + sqrt(-alpha*lambda/beta)*nu).
struct UepSeed {
    Eigen::VectorXd x_star;
    double p_max = 0.0;
    Eigen::VectorXd nu;
    double alpha = 0.0;
    double beta = 0.0;
};

struct PairSolutions {
    PowerFlowSolution sep;
    PowerFlowSolution uep;
};

// Solve the loaded system at p_max*(1+lambda) twice: the stable solution from
// the high-voltage warm start `sep_start` (normally the base state), the
// unstable one from the seed above continued by Newton. lambda must lie in
// [-1, 0]. Non-convergence of either branch is reported in the returned
// solutions' flags, never thrown.
PairSolutions find_pair_solutions(const TypedNetwork& tn, int bus, double lambda,
                                  const State& sep_start, const UepSeed& seed,
                                  const SolveOptions& options = {});

}  // namespace gridmargin
