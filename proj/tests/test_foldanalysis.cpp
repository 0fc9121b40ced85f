#include <doctest.h>

#include <cmath>

#include "cases_util.hpp"
#include "gridmargin/foldanalysis.hpp"

using namespace gridmargin;

namespace {

bool bitwise_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) return false;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a(i) != b(i)) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("null vectors of hand-built singular matrices") {
    SUBCASE("one-by-one zero matrix") {
        Eigen::MatrixXd j(1, 1);
        j << 0.0;
        const NullPair pair = null_vectors(j);
        CHECK(pair.nu(0) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(pair.omega(0) == doctest::Approx(1.0).epsilon(1e-14));
    }

    SUBCASE("diagonal with one zero mode") {
        Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2, 2);
        j(1, 1) = 5.0;
        const NullPair pair = null_vectors(j, 0);
        CHECK(pair.nu(0) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(std::abs(pair.nu(1)) <= 1e-14);
        CHECK(pair.omega.dot(pair.nu) == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("symmetric rank-one matrix") {
        Eigen::MatrixXd j(2, 2);
        j << 1.0, 2.0, 2.0, 4.0;  // null direction (2, -1)/sqrt(5)
        const NullPair pair = null_vectors(j, 0);
        const double s = std::sqrt(5.0);
        CHECK(pair.nu(0) == doctest::Approx(2.0 / s).epsilon(1e-12));
        CHECK(pair.nu(1) == doctest::Approx(-1.0 / s).epsilon(1e-12));
        // Symmetric matrix: left and right null directions coincide, and the
        // normalization omega' * nu = 1 makes omega equal to nu here.
        CHECK(pair.omega(0) == doctest::Approx(pair.nu(0)).epsilon(1e-12));
        CHECK(pair.omega(1) == doctest::Approx(pair.nu(1)).epsilon(1e-12));
        CHECK((j * pair.nu).norm() <= 1e-12);
        CHECK((j.transpose() * pair.omega).norm() <= 1e-11);
    }

    SUBCASE("sign pivot falls back when the requested row vanishes") {
        Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2, 2);
        j(0, 0) = 5.0;  // null direction is e2; row 0 of nu is zero
        const NullPair pair = null_vectors(j, 0);
        CHECK(pair.nu(1) == doctest::Approx(1.0).epsilon(1e-14));
    }

    SUBCASE("empty or rectangular input is rejected") {
        CHECK_THROWS_AS(null_vectors(Eigen::MatrixXd()), StudyError);
        CHECK_THROWS_AS(null_vectors(Eigen::MatrixXd::Zero(2, 3)), StudyError);
    }
}

TEST_CASE("second directional difference on known functions") {
    SUBCASE("quadratic gives its constant second derivative") {
        auto f = [](const Eigen::VectorXd& x) {
            Eigen::VectorXd out(1);
            out(0) = x(0) * x(0);
            return out;
        };
        Eigen::VectorXd x(1), d(1);
        x << 0.3;
        d << 1.0;
        const Eigen::VectorXd c = directional_second_difference(f, x, d);
        CHECK(c(0) == doctest::Approx(2.0).epsilon(1e-6));
    }

    SUBCASE("affine map has zero curvature") {
        auto f = [](const Eigen::VectorXd& x) {
            Eigen::VectorXd out(1);
            out(0) = 3.0 * x(0) + 1.0;
            return out;
        };
        Eigen::VectorXd x(1), d(1);
        x << -0.7;
        d << 1.0;
        CHECK(std::abs(directional_second_difference(f, x, d)(0)) <= 1e-6);
    }

    SUBCASE("componentwise curvature of a vector map") {
        auto f = [](const Eigen::VectorXd& x) {
            Eigen::VectorXd out(2);
            out(0) = x(0) * x(0);
            out(1) = x(0) * x(0) * x(0);
            return out;
        };
        Eigen::VectorXd x(1), d(1);
        x << 0.5;
        d << 1.0;
        const Eigen::VectorXd c = directional_second_difference(f, x, d);
        CHECK(c(0) == doctest::Approx(2.0).epsilon(1e-5));
        CHECK(c(1) == doctest::Approx(3.0).epsilon(1e-5));  // 6x at x = 0.5
    }

    SUBCASE("cross terms along a diagonal direction") {
        auto f = [](const Eigen::VectorXd& x) {
            Eigen::VectorXd out(1);
            out(0) = x(0) * x(1);
            return out;
        };
        Eigen::VectorXd x(2), d(2);
        x << 1.0, 2.0;
        d << 1.0, 1.0;
        CHECK(directional_second_difference(f, x, d)(0) ==
              doctest::Approx(2.0).epsilon(1e-6));
    }
}

TEST_CASE("normal-form coefficients from explicit inputs") {
    NullPair pair;
    pair.nu = Eigen::VectorXd::Ones(1);
    pair.omega = Eigen::VectorXd::Ones(1);
    Eigen::VectorXd c(1);

    c << 2.0;
    const FoldCoefficients ok = fold_coefficients(pair, c, 1.5, 0);
    CHECK(ok.alpha == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(ok.beta == doctest::Approx(1.0).epsilon(1e-14));

    c << 0.0;  // vanishing curvature
    CHECK_THROWS_AS(fold_coefficients(pair, c, 1.5, 0), StudyError);
    c << -2.0;  // alpha/beta < 0
    CHECK_THROWS_AS(fold_coefficients(pair, c, 1.5, 0), StudyError);
    c << 2.0;  // row index out of range
    CHECK_THROWS_AS(fold_coefficients(pair, c, 1.5, 3), StudyError);
}

TEST_CASE("distance estimate formula and its guards") {
    FoldCoefficients coeffs;
    coeffs.alpha = 1.0;
    coeffs.beta = 0.5;
    CHECK(estimated_distance(coeffs, -0.02) == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(estimated_distance(coeffs, 0.0) == 0.0);
    // Square-root law: scaling lambda by 4 doubles the distance.
    CHECK(estimated_distance(coeffs, -0.2) ==
          doctest::Approx(2.0 * estimated_distance(coeffs, -0.05)).epsilon(1e-12));
    CHECK_THROWS_AS(estimated_distance(coeffs, 0.1), StudyError);
}

TEST_CASE("single-machine fold matches the closed-form solution") {
    // One plant behind a pure reactance: the transfer limit is 1/X at 90
    // degrees, the Jacobian is the 1x1 matrix [-cos(theta)], and the two
    // solution branches are theta and pi - theta.
    const double x_line = 0.935;
    const Network net = testutil::two_bus(x_line);
    const FoldStudy study = run_fold_study(net, 2);

    CHECK(std::abs(study.fold.p_max_pu - 1.0 / x_line) <= 1e-3);
    // One-dimensional state: both singular values are the collapsing mode,
    // so the singularity evidence is absolute in per-unit terms.
    CHECK(study.fold.sigma_min <= 1e-3);
    CHECK(study.fold.sigma_min == study.fold.sigma_max);
    REQUIRE(study.nulls.nu.size() == 1);
    CHECK(study.nulls.nu(0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(study.nulls.omega(0) == doctest::Approx(1.0).epsilon(1e-12));

    // At the fold the curvature of p = sin(theta)/X is -p_max, so
    // alpha = p_max and beta = p_max / 2.
    CHECK(study.coeffs.alpha == doctest::Approx(study.fold.p_max_pu).epsilon(1e-4));
    CHECK(study.coeffs.beta ==
          doctest::Approx(study.fold.p_max_pu / 2.0).epsilon(1e-4));

    const double lambda = -0.02;
    const double d_est = estimated_distance(study.coeffs, lambda);
    const double d_exact = exact_distance(study, lambda);
    const double closed_form = M_PI - 2.0 * std::asin(0.98);  // angle gap at 98%
    CHECK(std::abs(d_est - 0.4) <= 1e-3);
    CHECK(std::abs(d_exact - closed_form) <= 1e-3);
    CHECK(std::abs(d_est - d_exact) / d_exact <= 0.01);

    // Very close to the limit the two branches nearly coalesce.
    CHECK(exact_distance(study, -1e-4) < 0.05);
}

TEST_CASE("fold study of the second reference case at the near bus") {
    const Network net = testutil::load_case("two_ibr_b.json");
    const FoldStudy study = run_fold_study(net, 2);

    CHECK(std::abs(study.fold.p_max_pu - 1.607093371) <= 1e-6);
    CHECK(study.fold.sigma_min <= 1e-3 * study.fold.sigma_max);
    CHECK(study.fold.sigma_min <= 1e-4);
    CHECK(study.fold.sigma_max > 1.0);
    CHECK(std::abs(study.coeffs.alpha - 0.764930) <= 1e-4);
    CHECK(std::abs(study.coeffs.beta - 0.144088) <= 1e-4);
    CHECK(std::abs(study.coeffs.alpha / study.coeffs.beta - 5.308776) <= 1e-3);
    CHECK(study.nulls.omega.dot(study.nulls.nu) == doctest::Approx(1.0).epsilon(1e-10));

    // The stored critical state really is a null state of the Jacobian.
    const Eigen::MatrixXd j0 = jacobian(study.tn, study.fold.x_star);
    CHECK((j0 * study.nulls.nu).norm() <= 10.0 * study.fold.sigma_min);
    CHECK((j0.transpose() * study.nulls.omega).norm() <=
          10.0 * study.fold.sigma_min * study.nulls.omega.norm());
}

TEST_CASE("distance curve of the second reference case") {
    const std::vector<double> grid = {-0.3, -0.2, -0.1, -0.05, -0.02, -0.01};
    const Network net = testutil::load_case("two_ibr_b.json");
    const std::vector<DistancePoint> curve = run_distance_curve(net, 2, grid);
    REQUIRE(curve.size() == grid.size());

    const double expected[6][3] = {
        {2.523991, 2.569506, 0.017714}, {2.060830, 2.085370, 0.011767},
        {1.457227, 1.465824, 0.005865}, {1.030415, 1.033442, 0.002929},
        {0.651692, 0.652457, 0.001172}, {0.460816, 0.461086, 0.000587},
    };
    for (size_t i = 0; i < curve.size(); ++i) {
        CAPTURE(i);
        CHECK(curve[i].lambda == grid[i]);
        CHECK(curve[i].sep_converged);
        CHECK(curve[i].uep_converged);
        CHECK(curve[i].failure.empty());
        CHECK(std::abs(curve[i].d_estimated - expected[i][0]) <= 1e-5);
        CHECK(std::abs(curve[i].d_exact - expected[i][1]) <= 1e-5);
        CHECK(std::abs(curve[i].relative_error - expected[i][2]) <= 1e-5);
    }
    for (size_t i = 1; i < curve.size(); ++i) {
        CHECK(curve[i].d_estimated < curve[i - 1].d_estimated);
        CHECK(curve[i].d_exact < curve[i - 1].d_exact);
        CHECK(curve[i].relative_error < curve[i - 1].relative_error);
    }
}

TEST_CASE("the pipeline is deterministic bit for bit") {
    const Network net = testutil::load_case("two_ibr_b.json");
    const FoldStudy a = run_fold_study(net, 2);
    const FoldStudy b = run_fold_study(net, 2);
    CHECK(a.fold.p_max_pu == b.fold.p_max_pu);
    CHECK(a.coeffs.alpha == b.coeffs.alpha);
    CHECK(a.coeffs.beta == b.coeffs.beta);
    CHECK(bitwise_equal(a.nulls.nu, b.nulls.nu));
    CHECK(bitwise_equal(pack_state(a.tn, a.fold.x_star), pack_state(b.tn, b.fold.x_star)));

    const std::vector<double> grid = {-0.1, -0.02};
    const auto ca = distance_curve(a, grid);
    const auto cb = distance_curve(b, grid);
    REQUIRE(ca.size() == cb.size());
    for (size_t i = 0; i < ca.size(); ++i) {
        CHECK(ca[i].d_estimated == cb[i].d_estimated);
        CHECK(ca[i].d_exact == cb[i].d_exact);
    }
}

TEST_CASE("flipping the null-vector sign leaves every observable unchanged") {
    const Network net = testutil::load_case("two_ibr_b.json");
    const FoldStudy study = run_fold_study(net, 2);
    const Loading at_fold{2, 0.0, study.fold.p_max_pu};

    const Eigen::VectorXd c_plus = curvature(study.tn, study.fold.x_star,
                                             study.nulls.nu, at_fold);
    const Eigen::VectorXd c_minus = curvature(study.tn, study.fold.x_star,
                                              Eigen::VectorXd(-study.nulls.nu), at_fold);
    // The second difference is even in the direction.
    CHECK((c_plus - c_minus).lpNorm<Eigen::Infinity>() <=
          1e-6 * std::max(1.0, c_plus.lpNorm<Eigen::Infinity>()));

    NullPair flipped;
    flipped.nu = -study.nulls.nu;
    flipped.omega = -study.nulls.omega;
    const FoldCoefficients f = fold_coefficients(flipped, c_minus,
                                                 study.fold.p_max_pu,
                                                 study.coeffs.e_c_row);
    CHECK(f.alpha == doctest::Approx(-study.coeffs.alpha).epsilon(1e-9));
    CHECK(f.beta == doctest::Approx(-study.coeffs.beta).epsilon(1e-6));
    CHECK(f.alpha / f.beta ==
          doctest::Approx(study.coeffs.alpha / study.coeffs.beta).epsilon(1e-6));
    CHECK(estimated_distance(f, -0.05) ==
          doctest::Approx(estimated_distance(study.coeffs, -0.05)).epsilon(1e-6));
}

TEST_CASE("pipeline preconditions and failure modes") {
    SUBCASE("power-factor-tracking ramps are not allowed") {
        PmrOptions opts;
        opts.q_mode = QMode::ConstantPowerFactor;
        CHECK_THROWS_AS(run_fold_study(testutil::load_case("two_ibr_b.json"), 2, opts),
                        CaseError);
    }

    SUBCASE("a saturated search has no fold to analyze") {
        CHECK_THROWS_AS(run_fold_study(testutil::two_bus(0.001), 2), StudyError);
    }

    SUBCASE("unknown bus") {
        CHECK_THROWS_AS(run_fold_study(testutil::load_case("two_ibr_b.json"), 42),
                        CaseError);
    }

    SUBCASE("an empty grid yields an empty curve") {
        CHECK(run_distance_curve(testutil::load_case("two_ibr_b.json"), 2, {}).empty());
    }
}
