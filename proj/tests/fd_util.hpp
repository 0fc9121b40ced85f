#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "gridmargin/powerflow.hpp"

namespace testutil {

// Deterministic standard uniform built from raw engine words, so every
// platform draws the same sequence (the library distribution is free to
// differ between standard libraries).
inline double uniform01(std::mt19937& g) {
    const std::uint64_t hi = g();
    const std::uint64_t lo = g();
    return static_cast<double>((hi | (lo << 32)) >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937& g, double lo, double hi) {
    return lo + (hi - lo) * uniform01(g);
}

inline gridmargin::State random_state(const gridmargin::TypedNetwork& tn, std::mt19937& g) {
    gridmargin::State st = gridmargin::flat_start(tn);
    for (int pos : tn.pv_index) st.theta(pos) = uniform(g, -1.0, 1.0);
    for (int pos : tn.pq_index) {
        st.theta(pos) = uniform(g, -1.0, 1.0);
        st.v(pos) = uniform(g, 0.7, 1.2);
    }
    return st;
}

// Worst relative disagreement between the analytic sensitivity matrix and a
// central difference of the residual, over entries whose difference value
// exceeds `floor` in magnitude (tiny entries are dominated by roundoff and
// carry no information about the formulas).
inline double jacobian_fd_max_rel_error(const gridmargin::TypedNetwork& tn,
                                        const gridmargin::State& st, double h,
                                        double floor = 1e-8) {
    using namespace gridmargin;
    const Eigen::VectorXd x = pack_state(tn, st);
    const Eigen::MatrixXd jac = jacobian(tn, unpack_state(tn, x));
    double worst = 0.0;
    for (int c = 0; c < x.size(); ++c) {
        Eigen::VectorXd xp = x;
        Eigen::VectorXd xm = x;
        xp(c) += h;
        xm(c) -= h;
        const Eigen::VectorXd fp = mismatch(tn, unpack_state(tn, xp));
        const Eigen::VectorXd fm = mismatch(tn, unpack_state(tn, xm));
        const Eigen::VectorXd col = (fp - fm) / (2.0 * h);
        for (int r = 0; r < col.size(); ++r) {
            if (std::abs(col(r)) <= floor) continue;
            const double rel = std::abs(jac(r, c) - col(r)) / std::abs(col(r));
            if (rel > worst) worst = rel;
        }
    }
    return worst;
}

}  // namespace testutil
