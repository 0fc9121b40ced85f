#include "gridmargin/foldanalysis.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace gridmargin {

NullPair null_vectors(const Eigen::MatrixXd& j0, int sign_row) {
    if (j0.rows() != j0.cols() || j0.rows() == 0) {
        throw StudyError("null-vector extraction needs a nonempty square matrix");
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(j0, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const int last = static_cast<int>(svd.singularValues().size()) - 1;

    NullPair pair;
    pair.nu = svd.matrixV().col(last);
    Eigen::VectorXd omega = svd.matrixU().col(last);

    // Fix the direction of nu by the requested coordinate; when that
    // coordinate vanishes, fall back to the largest one.
    int pivot = sign_row;
    if (pivot < 0 || pivot >= pair.nu.size() || std::abs(pair.nu(pivot)) < 1e-12) {
        pair.nu.cwiseAbs().maxCoeff(&pivot);
    }
    if (pair.nu(pivot) < 0.0) pair.nu = -pair.nu;

    const double dot = omega.dot(pair.nu);
    if (std::abs(dot) < 1e-10) {
        throw StudyError("degenerate left/right null pairing (their inner product vanishes)");
    }
    pair.omega = omega / dot;
    return pair;
}

Eigen::VectorXd directional_second_difference(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, const Eigen::VectorXd& direction) {
    const Eigen::VectorXd f0 = f(x);
    auto stencil = [&](double h) -> Eigen::VectorXd {
        return (f(x + h * direction) - 2.0 * f0 + f(x - h * direction)) / (h * h);
    };
    for (double h : {1e-4, 1e-3}) {
        const Eigen::VectorXd coarse = stencil(h);
        const Eigen::VectorXd fine = stencil(0.5 * h);
        const double scale = std::max(1.0, coarse.cwiseAbs().maxCoeff());
        if ((coarse - fine).cwiseAbs().maxCoeff() <= 1e-3 * scale) return coarse;
    }
    throw StudyError("directional curvature did not stabilize under step halving");
}

Eigen::VectorXd curvature(const TypedNetwork& tn, const State& x_star,
                          const Eigen::VectorXd& nu, const Loading& loading) {
    const std::optional<Loading> ld = loading;
    auto f = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return mismatch(tn, unpack_state(tn, x), ld);
    };
    return directional_second_difference(f, pack_state(tn, x_star), nu);
}

FoldCoefficients fold_coefficients(const NullPair& pair,
                                   const Eigen::VectorXd& hess_contraction,
                                   double p_max, int e_c_row) {
    if (e_c_row < 0 || e_c_row >= pair.omega.size()) {
        throw StudyError("the study bus carries no active-power row at the fold");
    }
    FoldCoefficients c;
    c.e_c_row = e_c_row;
    c.alpha = p_max * pair.omega(e_c_row);
    c.beta = 0.5 * pair.omega.dot(hess_contraction);
    if (std::abs(c.beta) < 1e-12) {
        throw StudyError("degenerate limit point: the curvature coefficient vanishes");
    }
    if (c.alpha / c.beta < 0.0) {
        throw StudyError("normal-form sign check failed: the two solution branches would "
                         "not be real below the limit");
    }
    return c;
}

double estimated_distance(const FoldCoefficients& coeffs, double lambda) {
    const double radicand = -coeffs.alpha * lambda / coeffs.beta;
    if (radicand < 0.0) {
        throw StudyError("distance estimate is undefined above the limit (negative radicand)");
    }
    return 2.0 * std::sqrt(radicand);
}

FoldStudy fold_study(const TypedNetwork& tn, int bus, const PmrOptions& options,
                     const std::optional<State>& base_init) {
    if (options.q_mode != QMode::HoldBaseQ) {
        throw CaseError("limit-point analysis supports only the hold-base-q policy "
                        "(a tracked power factor makes the loaded reactive schedule "
                        "depend on the loading itself)");
    }

    FoldStudy study;
    study.tn = tn;

    if (base_init) {
        study.base_state = *base_init;
    } else {
        const PowerFlowSolution base = solve(tn, std::nullopt, options.solve);
        if (!base.converged) {
            throw StudyError("base power flow did not converge (mismatch " +
                             std::to_string(base.final_mismatch) + ")");
        }
        study.base_state = base.state;
    }

    PmrResult search = pmax_search(tn, bus, options, study.base_state);
    if (search.saturated) {
        throw StudyError("the loadability search saturated at its cap before any limit; "
                         "no fold exists within range");
    }

    const int pos = tn.network.index_of(bus);
    const double offset = search.report_offset_pu;
    double p_ok = search.p_max_pu - offset;      // net solver-level bracket
    double p_fail = search.bracket_fail_pu - offset;
    State state_ok = search.last_converged_solution.state;

    // Deepen the bracket far below the search tolerance: the extracted state
    // must sit essentially on the fold, or every downstream coefficient
    // inherits the bracket bias.
    TypedNetwork work = tn;
    auto refine = [&](double width) {
        for (int guard = 0; guard < 200 && p_fail - p_ok > width; ++guard) {
            const double mid = 0.5 * (p_ok + p_fail);
            work.scheduled_p(pos) = mid;
            const PowerFlowSolution sol = solve(work, state_ok, options.solve);
            if (sol.converged) {
                p_ok = mid;
                state_ok = sol.state;
            } else {
                p_fail = mid;
            }
        }
    };
    refine(1e-10);

    study.fold.bus = bus;
    study.fold.x_star = state_ok;
    study.fold.p_max_pu = p_ok;

    auto singular_values = [&]() {
        const Eigen::MatrixXd j0 = jacobian(tn, study.fold.x_star);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(j0);
        const auto& sv = svd.singularValues();
        study.fold.sigma_max = sv(0);
        study.fold.sigma_min = sv(sv.size() - 1);
    };
    // Scale floor of 1 pu: when the state is one-dimensional the only mode is
    // the collapsing one, so sigma_max itself goes to zero and the ratio test
    // would compare the vanishing value against itself.
    const auto singular_enough = [&study]() {
        return study.fold.sigma_min <= 1e-3 * std::max(study.fold.sigma_max, 1.0);
    };
    singular_values();
    if (!singular_enough()) {
        refine(1e-12);
        study.fold.x_star = state_ok;
        study.fold.p_max_pu = p_ok;
        singular_values();
        if (!singular_enough()) {
            throw StudyError("the limit state is not singular enough to be a fold "
                             "(smallest/largest singular value ratio " +
                             std::to_string(study.fold.sigma_min / study.fold.sigma_max) + ")");
        }
    }

    const int e_c_row = tn.p_row(pos);
    study.nulls = null_vectors(jacobian(tn, study.fold.x_star), tn.theta_position(pos));

    const Loading at_fold{bus, 0.0, study.fold.p_max_pu};
    const Eigen::VectorXd c = curvature(tn, study.fold.x_star, study.nulls.nu, at_fold);
    study.coeffs = fold_coefficients(study.nulls, c, study.fold.p_max_pu, e_c_row);
    return study;
}

FoldPoint fold_point(const TypedNetwork& tn, int bus, const PmrOptions& options,
                     const std::optional<State>& base_init) {
    return fold_study(tn, bus, options, base_init).fold;
}

double exact_distance(const FoldStudy& study, double lambda, const SolveOptions& options) {
    UepSeed seed{pack_state(study.tn, study.fold.x_star), study.fold.p_max_pu,
                 study.nulls.nu, study.coeffs.alpha, study.coeffs.beta};
    const PairSolutions pair = find_pair_solutions(study.tn, study.fold.bus, lambda,
                                                   study.base_state, seed, options);
    if (!pair.sep.converged || !pair.uep.converged) {
        throw StudyError("solution pair did not converge at this loading");
    }
    return (pack_state(study.tn, pair.sep.state) - pack_state(study.tn, pair.uep.state))
        .norm();
}

std::vector<DistancePoint> distance_curve(const FoldStudy& study,
                                          const std::vector<double>& lambda_grid,
                                          const SolveOptions& options) {
    std::vector<DistancePoint> curve;
    curve.reserve(lambda_grid.size());
    UepSeed seed{pack_state(study.tn, study.fold.x_star), study.fold.p_max_pu,
                 study.nulls.nu, study.coeffs.alpha, study.coeffs.beta};
    for (double lambda : lambda_grid) {
        DistancePoint pt;
        pt.lambda = lambda;
        try {
            pt.d_estimated = estimated_distance(study.coeffs, lambda);
            const PairSolutions pair = find_pair_solutions(
                study.tn, study.fold.bus, lambda, study.base_state, seed, options);
            pt.sep_converged = pair.sep.converged;
            pt.uep_converged = pair.uep.converged;
            if (!pt.sep_converged && !pt.uep_converged) {
                pt.failure = "neither solution converged";
            } else if (!pt.sep_converged) {
                pt.failure = "stable solution did not converge";
            } else if (!pt.uep_converged) {
                pt.failure = "unstable solution did not converge";
            } else {
                pt.d_exact = (pack_state(study.tn, pair.sep.state) -
                              pack_state(study.tn, pair.uep.state))
                                 .norm();
                pt.relative_error = pt.d_exact > 0.0
                                        ? std::abs(pt.d_estimated - pt.d_exact) / pt.d_exact
                                        : 0.0;
            }
        } catch (const StudyError& e) {
            pt.failure = e.what();
        } catch (const CaseError& e) {
            pt.failure = e.what();
        }
        curve.push_back(pt);
    }
    return curve;
}

FoldStudy run_fold_study(const Network& net, int bus, const PmrOptions& options) {
    validate(net);
    if (!net.has_bus(bus)) throw CaseError("unknown bus id " + std::to_string(bus));

    const TypedNetwork tn_base = assign_base_types(net);
    const PowerFlowSolution base = solve(tn_base, std::nullopt, options.solve);
    if (!base.converged) {
        throw StudyError("base power flow did not converge (mismatch " +
                         std::to_string(base.final_mismatch) + ")");
    }
    const TypedNetwork tn_ramp = ramp_typed_network(net, base, bus);
    return fold_study(tn_ramp, bus, options, base.state);
}

std::vector<DistancePoint> run_distance_curve(const Network& net, int bus,
                                              const std::vector<double>& lambda_grid,
                                              const PmrOptions& options) {
    const FoldStudy study = run_fold_study(net, bus, options);
    return distance_curve(study, lambda_grid, options.solve);
}

}  // namespace gridmargin
