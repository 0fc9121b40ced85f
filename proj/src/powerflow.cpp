#include "gridmargin/powerflow.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>

namespace gridmargin {

State flat_start(const TypedNetwork& tn) {
    State st;
    st.theta = tn.fixed_angle;
    st.v = tn.fixed_voltage;
    for (int pos : tn.pv_index) st.theta(pos) = 0.0;
    for (int pos : tn.pq_index) {
        st.theta(pos) = 0.0;
        st.v(pos) = 1.0;
    }
    return st;
}

Eigen::VectorXd pack_state(const TypedNetwork& tn, const State& st) {
    Eigen::VectorXd x(tn.n_free());
    int k = 0;
    for (int pos : tn.pv_index) x(k++) = st.theta(pos);
    for (int pos : tn.pq_index) x(k++) = st.theta(pos);
    for (int pos : tn.pq_index) x(k++) = st.v(pos);
    return x;
}

State unpack_state(const TypedNetwork& tn, const Eigen::VectorXd& x) {
    State st;
    st.theta = tn.fixed_angle;
    st.v = tn.fixed_voltage;
    int k = 0;
    for (int pos : tn.pv_index) st.theta(pos) = x(k++);
    for (int pos : tn.pq_index) st.theta(pos) = x(k++);
    for (int pos : tn.pq_index) st.v(pos) = x(k++);
    return st;
}

void compute_injections(const TypedNetwork& tn, const State& st,
                        Eigen::VectorXd& p, Eigen::VectorXd& q) {
    const int n = tn.n_buses();
    p = Eigen::VectorXd::Zero(n);
    q = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        double pi = 0.0, qi = 0.0;
        for (int j = 0; j < n; ++j) {
            const double gij = tn.y.g(i, j);
            const double bij = tn.y.b(i, j);
            if (gij == 0.0 && bij == 0.0) continue;
            const double tij = st.theta(i) - st.theta(j);
            const double c = std::cos(tij);
            const double s = std::sin(tij);
            pi += st.v(j) * (gij * c + bij * s);
            qi += st.v(j) * (gij * s - bij * c);
        }
        p(i) = st.v(i) * pi;
        q(i) = st.v(i) * qi;
    }
}

namespace {

// The active-power target at a bus, honoring an optional loading override.
double p_target(const TypedNetwork& tn, int pos, const std::optional<Loading>& loading) {
    if (loading && tn.network.buses[pos].id == loading->bus) {
        return loading->p_max * (1.0 + loading->lambda);
    }
    return tn.scheduled_p(pos);
}

}  // namespace

Eigen::VectorXd mismatch(const TypedNetwork& tn, const State& st,
                         const std::optional<Loading>& loading) {
    Eigen::VectorXd p, q;
    compute_injections(tn, st, p, q);
    Eigen::VectorXd f(tn.n_free());
    int k = 0;
    for (int pos : tn.pv_index) f(k++) = p_target(tn, pos, loading) - p(pos);
    for (int pos : tn.pq_index) f(k++) = p_target(tn, pos, loading) - p(pos);
    for (int pos : tn.pq_index) f(k++) = tn.scheduled_q(pos) - q(pos);
    return f;
}

Eigen::MatrixXd jacobian(const TypedNetwork& tn, const State& st,
                         const std::optional<Loading>& loading) {
    (void)loading;  // the loading offset is constant in the state
    const int m = tn.n_free();
    Eigen::VectorXd p, q;
    compute_injections(tn, st, p, q);

    // Rows follow the residual ordering, columns the packed-state ordering.
    // The residual is target - injection, so every entry is the negated
    // injection sensitivity.
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, m);

    const int n_p_rows = static_cast<int>(tn.pv_index.size() + tn.pq_index.size());
    std::vector<int> p_rows_bus;  // bus position per active row
    p_rows_bus.reserve(n_p_rows);
    for (int pos : tn.pv_index) p_rows_bus.push_back(pos);
    for (int pos : tn.pq_index) p_rows_bus.push_back(pos);

    auto d_p = [&](int i, int j, bool wrt_theta) -> double {
        const double gij = tn.y.g(i, j);
        const double bij = tn.y.b(i, j);
        if (i == j) {
            if (wrt_theta) return -q(i) - bij * st.v(i) * st.v(i);
            return p(i) / st.v(i) + gij * st.v(i);
        }
        const double tij = st.theta(i) - st.theta(j);
        const double c = std::cos(tij);
        const double s = std::sin(tij);
        if (wrt_theta) return st.v(i) * st.v(j) * (gij * s - bij * c);
        return st.v(i) * (gij * c + bij * s);
    };
    auto d_q = [&](int i, int j, bool wrt_theta) -> double {
        const double gij = tn.y.g(i, j);
        const double bij = tn.y.b(i, j);
        if (i == j) {
            if (wrt_theta) return p(i) - gij * st.v(i) * st.v(i);
            return q(i) / st.v(i) - bij * st.v(i);
        }
        const double tij = st.theta(i) - st.theta(j);
        const double c = std::cos(tij);
        const double s = std::sin(tij);
        if (wrt_theta) return -st.v(i) * st.v(j) * (gij * c + bij * s);
        return st.v(i) * (gij * s - bij * c);
    };

    // Active rows.
    for (int r = 0; r < n_p_rows; ++r) {
        const int i = p_rows_bus[r];
        int col = 0;
        for (int j : tn.pv_index) jac(r, col++) = -d_p(i, j, true);
        for (int j : tn.pq_index) jac(r, col++) = -d_p(i, j, true);
        for (int j : tn.pq_index) jac(r, col++) = -d_p(i, j, false);
    }
    // Reactive rows.
    for (size_t rq = 0; rq < tn.pq_index.size(); ++rq) {
        const int r = n_p_rows + static_cast<int>(rq);
        const int i = tn.pq_index[rq];
        int col = 0;
        for (int j : tn.pv_index) jac(r, col++) = -d_q(i, j, true);
        for (int j : tn.pq_index) jac(r, col++) = -d_q(i, j, true);
        for (int j : tn.pq_index) jac(r, col++) = -d_q(i, j, false);
    }
    return jac;
}

namespace {

StabilityClass classify(const TypedNetwork& tn, const State& st,
                        const std::optional<Loading>& loading) {
    const Eigen::MatrixXd jac = jacobian(tn, st, loading);
    if (jac.rows() == 0) return StabilityClass::Unknown;
    const double scale = std::max(1.0, jac.cwiseAbs().maxCoeff());
    const double eps = 1e-9 * scale;
    const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(jac, false).eigenvalues();
    bool any_positive = false;
    bool all_negative = true;
    for (int i = 0; i < ev.size(); ++i) {
        const double re = ev(i).real();
        if (re > eps) any_positive = true;
        if (!(re < -eps)) all_negative = false;
    }
    if (any_positive) return StabilityClass::Uep;
    if (all_negative) return StabilityClass::Sep;
    return StabilityClass::Unknown;
}

bool voltages_positive(const TypedNetwork& tn, const Eigen::VectorXd& x) {
    const int n_theta = static_cast<int>(tn.pv_index.size() + tn.pq_index.size());
    for (int k = n_theta; k < x.size(); ++k) {
        if (!(x(k) > 0.0)) return false;
    }
    return true;
}

}  // namespace

PowerFlowSolution solve(const TypedNetwork& tn, const std::optional<State>& init,
                        const SolveOptions& options, const std::optional<Loading>& loading) {
    if (loading) {
        const int pos = tn.network.index_of(loading->bus);
        if (tn.role[pos] != BusRole::Pv && tn.role[pos] != BusRole::Pq) {
            throw CaseError("loading target bus " + std::to_string(loading->bus) +
                            " carries no active-power equation");
        }
    }

    PowerFlowSolution sol;
    State st = init ? *init : flat_start(tn);
    Eigen::VectorXd x = pack_state(tn, st);
    st = unpack_state(tn, x);  // normalize fixed entries from the typing

    Eigen::VectorXd f = mismatch(tn, st, loading);
    double norm = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;

    for (int it = 0; it < options.max_iter; ++it) {
        if (norm <= options.tolerance) break;

        const Eigen::MatrixXd jac = jacobian(tn, st, loading);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
        if (!lu.isInvertible()) {
            sol.singular = true;
            break;
        }
        const Eigen::VectorXd dx = lu.solve(-f);
        if (!dx.allFinite()) {
            sol.singular = true;
            break;
        }
        if (dx.cwiseAbs().maxCoeff() > 10.0) break;  // diverging step

        // Damping: halve until the mismatch decreases with physical voltages;
        // if nothing decreases, accept the smallest positive-voltage trial.
        bool stepped = false;
        Eigen::VectorXd x_fallback;
        Eigen::VectorXd f_fallback;
        double norm_fallback = 0.0;
        bool have_fallback = false;
        for (int half = 0; half < 5; ++half) {
            const double s = 1.0 / static_cast<double>(1 << half);
            const Eigen::VectorXd x_try = x + s * dx;
            if (!voltages_positive(tn, x_try)) continue;
            const State st_try = unpack_state(tn, x_try);
            const Eigen::VectorXd f_try = mismatch(tn, st_try, loading);
            const double norm_try = f_try.cwiseAbs().maxCoeff();
            x_fallback = x_try;
            f_fallback = f_try;
            norm_fallback = norm_try;
            have_fallback = true;
            if (norm_try < norm) {
                x = x_try;
                f = f_try;
                norm = norm_try;
                stepped = true;
                break;
            }
        }
        if (!stepped) {
            if (!have_fallback) break;  // no physical trial at all
            x = x_fallback;
            f = f_fallback;
            norm = norm_fallback;
        }
        st = unpack_state(tn, x);
        ++sol.iterations;
    }

    sol.state = st;
    sol.final_mismatch = norm;
    sol.converged = norm <= options.tolerance;
    compute_injections(tn, st, sol.p_injection, sol.q_injection);
    sol.classification =
        sol.converged ? classify(tn, st, loading) : StabilityClass::Unknown;
    return sol;
}

PairSolutions find_pair_solutions(const TypedNetwork& tn, int bus, double lambda,
                                  const State& sep_start, const UepSeed& seed,
                                  const SolveOptions& options) {
    if (!(lambda >= -1.0 && lambda <= 0.0)) {
        throw CaseError("loading factor must lie in [-1, 0], got " + std::to_string(lambda));
    }
    Loading loading{bus, lambda, seed.p_max};

    PairSolutions pair;
    pair.sep = solve(tn, sep_start, options, loading);

    const double radicand = -seed.alpha * lambda / seed.beta;
    if (radicand < 0.0) {
        throw StudyError("unstable-branch seed is undefined: negative offset radicand");
    }
    const Eigen::VectorXd x_seed = seed.x_star + std::sqrt(radicand) * seed.nu;
    pair.uep = solve(tn, unpack_state(tn, x_seed), options, loading);
    return pair;
}

}  // namespace gridmargin
