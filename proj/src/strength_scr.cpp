#include "gridmargin/strength_scr.hpp"

#include <Eigen/LU>

#include <cmath>
#include <complex>
#include <deque>
#include <set>

namespace gridmargin {

TheveninEquivalent thevenin_reactance(const Network& net, int bus,
                                      bool exclude_study_transformer) {
    validate(net);
    if (!net.has_bus(bus)) throw CaseError("unknown bus id " + std::to_string(bus));
    const int slack_id = net.slack_bus_id();
    if (bus == slack_id) {
        throw CaseError("bus " + std::to_string(bus) +
                        " is the infinite bus; its source impedance is zero by definition");
    }

    TheveninEquivalent th;
    th.bus = bus;
    th.measured_at_bus = bus;
    const Plant* slack_plant = net.plant_at(slack_id);
    th.v_source_pu = slack_plant->v_setpoint_pu;

    // Optionally drop the study bus's dedicated transformer and measure at its
    // far end instead.
    std::set<size_t> dropped;
    if (exclude_study_transformer) {
        std::vector<size_t> incident_tx;
        for (size_t i = 0; i < net.branches.size(); ++i) {
            const Branch& br = net.branches[i];
            if (br.kind != BranchKind::Transformer) continue;
            if (br.from_bus == bus || br.to_bus == bus) incident_tx.push_back(i);
        }
        if (incident_tx.size() > 1) {
            throw StudyError("bus " + std::to_string(bus) +
                             " is served by several transformers; the exclusion is ambiguous "
                             "(rerun keeping the study transformer)");
        }
        if (incident_tx.size() == 1) {
            const Branch& br = net.branches[incident_tx[0]];
            dropped.insert(incident_tx[0]);
            th.measured_at_bus = (br.from_bus == bus) ? br.to_bus : br.from_bus;
            th.excluded_elements.push_back("transformer " + std::to_string(br.from_bus) + "-" +
                                           std::to_string(br.to_bus));
        }
    }
    if (th.measured_at_bus == slack_id) {
        throw StudyError("measurement point coincides with the infinite bus; "
                         "the source impedance there is zero by definition");
    }

    // Passive complex admittance over the kept branches. Plants contribute
    // nothing: inverters are current injections (open-circuit for impedance
    // purposes) and the slack node is grounded below.
    const int n = static_cast<int>(net.buses.size());
    using Cplx = std::complex<double>;
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
    for (size_t i = 0; i < net.branches.size(); ++i) {
        if (dropped.count(i)) continue;
        const Branch& br = net.branches[i];
        const Cplx adm = 1.0 / Cplx(br.resistance_pu, br.reactance_pu);
        const int a = net.index_of(br.from_bus);
        const int b = net.index_of(br.to_bus);
        y(a, a) += adm;
        y(b, b) += adm;
        y(a, b) -= adm;
        y(b, a) -= adm;
    }

    // Grounding the slack deletes its row/column. Reduce only over buses still
    // connected to the slack across the kept branches; anything cut off (for
    // instance the study bus once its sole feeder is dropped) would otherwise
    // contribute an identically-zero row.
    const int slack_pos = net.index_of(slack_id);
    std::vector<char> reachable(n, 0);
    std::deque<int> frontier{slack_pos};
    reachable[slack_pos] = 1;
    while (!frontier.empty()) {
        const int a = frontier.front();
        frontier.pop_front();
        for (int b = 0; b < n; ++b) {
            if (b == a || reachable[b]) continue;
            if (y(a, b) != Cplx(0.0, 0.0)) {
                reachable[b] = 1;
                frontier.push_back(b);
            }
        }
    }

    const int measure_pos = net.index_of(th.measured_at_bus);
    if (!reachable[measure_pos]) {
        throw StudyError("bus " + std::to_string(th.measured_at_bus) +
                         " is isolated from the infinite bus; no source impedance exists");
    }

    std::vector<int> keep;
    for (int i = 0; i < n; ++i) {
        if (i != slack_pos && reachable[i]) keep.push_back(i);
    }
    const int m = static_cast<int>(keep.size());
    Eigen::MatrixXcd yr(m, m);
    int rhs_row = -1;
    for (int r = 0; r < m; ++r) {
        if (keep[r] == measure_pos) rhs_row = r;
        for (int c = 0; c < m; ++c) yr(r, c) = y(keep[r], keep[c]);
    }

    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(m);
    e(rhs_row) = Cplx(1.0, 0.0);
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(yr);
    if (!lu.isInvertible()) {
        throw StudyError("the reduced network is singular; no source impedance exists");
    }
    const Eigen::VectorXcd z = lu.solve(e);
    th.z_th_pu = std::abs(z(rhs_row));
    return th;
}

ScrResult scr(const Network& net, int bus, double p_nom_pu, bool exclude_study_transformer) {
    if (!(p_nom_pu > 0.0)) {
        throw CaseError("short-circuit ratio needs a positive nominal power, got " +
                        std::to_string(p_nom_pu));
    }
    const TheveninEquivalent th = thevenin_reactance(net, bus, exclude_study_transformer);
    ScrResult r;
    r.bus = bus;
    r.z_th_pu = th.z_th_pu;
    r.scc_pu = th.v_source_pu * th.v_source_pu / th.z_th_pu;
    r.p_nom_pu = p_nom_pu;
    r.scr = r.scc_pu / p_nom_pu;
    r.excluded_elements = th.excluded_elements;
    return r;
}

}  // namespace gridmargin
