#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gridmargin/strength_pmr.hpp"

namespace gridmargin {

// The loadability limit of a study bus: critical state, critical power and
// the singular-value evidence that the Jacobian has dropped rank there.
struct FoldPoint {
    int bus = 0;
    double p_max_pu = 0.0;  // net critical injection at the study bus
    State x_star;
    double sigma_min = 0.0;
    double sigma_max = 0.0;
};

// Right/left null vectors of the Jacobian at the fold: ||nu|| = 1 with the
// study bus's angle component >= 0 (falling back to the largest component
// when that one vanishes), and omega scaled so omega' * nu = 1.
struct NullPair {
    Eigen::VectorXd nu;
    Eigen::VectorXd omega;
};

// Normal-form coefficients of the fold: alpha = p_max * omega[e_c_row] and
// beta = omega' * (1/2)[nu' H_i nu], where e_c_row is the study bus's
// active-mismatch row.
struct FoldCoefficients {
    double alpha = 0.0;
    double beta = 0.0;
    int e_c_row = 0;
};

struct DistancePoint {
    double lambda = 0.0;
    double d_estimated = std::numeric_limits<double>::quiet_NaN();
    double d_exact = std::numeric_limits<double>::quiet_NaN();
    double relative_error = std::numeric_limits<double>::quiet_NaN();
    bool sep_converged = false;
    bool uep_converged = false;
    std::string failure;  // empty when the point evaluated cleanly
};

// The full pipeline output for one study bus, kept together so distance
// curves can be evaluated without recomputing the fold.
struct FoldStudy {
    FoldPoint fold;
    NullPair nulls;
    FoldCoefficients coeffs;
    State base_state;  // warm start for the stable branch
    TypedNetwork tn;
};

// Locate the fold on an already ramp-typed network: run the loadability
// search, then keep bisecting the bracket far below the search tolerance
// (width 1e-10) so the extracted state sits essentially on the fold — a
// shallow bracket biases every downstream coefficient. Verifies the
// singularity criterion sigma_min <= 1e-3 * max(sigma_max, 1) — the 1-pu
// floor keeps the test meaningful when the state is one-dimensional and the
// largest mode is itself the collapsing one. Only the hold-base-Q policy is
// supported (a power-factor-tracking Q would make the loaded system's
// reactive schedule lambda-dependent).
FoldStudy fold_study(const TypedNetwork& tn, int bus, const PmrOptions& options = {},
                     const std::optional<State>& base_init = {});

// Convenience wrappers over fold_study.
FoldPoint fold_point(const TypedNetwork& tn, int bus, const PmrOptions& options = {},
                     const std::optional<State>& base_init = {});

// Null vectors of a near-singular square matrix via SVD (the numerically
// robust choice near singularity). sign_row selects the coordinate whose
// nonnegativity fixes the sign of nu.
NullPair null_vectors(const Eigen::MatrixXd& j0, int sign_row = 0);

// Second directional difference (f(x+h*d) - 2 f(x) + f(x-h*d)) / h^2 with a
// halved-step consistency check: evaluated at h and h/2, accepted when they
// agree to 1e-3 relative, retried once at h = 1e-3, then a StudyError.
Eigen::VectorXd directional_second_difference(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, const Eigen::VectorXd& direction);

// The n-vector [nu' H_i nu]: second directional derivative of every mismatch
// component along nu at the critical state.
Eigen::VectorXd curvature(const TypedNetwork& tn, const State& x_star,
                          const Eigen::VectorXd& nu, const Loading& loading);

// alpha = p_max * omega[e_c_row], beta = (1/2) omega' * hess_contraction.
// Hard error when beta vanishes (degenerate fold) or when alpha/beta is not
// positive (the square root in the distance estimate must be real for
// lambda <= 0).
FoldCoefficients fold_coefficients(const NullPair& pair,
                                   const Eigen::VectorXd& hess_contraction,
                                   double p_max, int e_c_row);

// d = 2 * sqrt(-alpha * lambda / beta); rejects a negative radicand.
double estimated_distance(const FoldCoefficients& coeffs, double lambda);

// Unweighted Euclidean norm of the free-variable difference between the two
// solutions at loading p_max*(1+lambda) (angles in radians, voltages in
// per-unit — the same mixed metric as the state vector itself).
double exact_distance(const FoldStudy& study, double lambda,
                      const SolveOptions& options = {});

// One DistancePoint per grid value; per-point failures are recorded in the
// point and the curve is still returned. An empty grid yields an empty curve.
std::vector<DistancePoint> distance_curve(const FoldStudy& study,
                                          const std::vector<double>& lambda_grid,
                                          const SolveOptions& options = {});

// Orchestrations from a raw network: base power flow, ramp typing, pipeline.
FoldStudy run_fold_study(const Network& net, int bus, const PmrOptions& options = {});
std::vector<DistancePoint> run_distance_curve(const Network& net, int bus,
                                              const std::vector<double>& lambda_grid,
                                              const PmrOptions& options = {});

}  // namespace gridmargin
