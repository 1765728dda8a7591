#include <doctest.h>

#include <random>

#include "pairqfi/oracle.hpp"
#include "pairqfi/qfi.hpp"

using namespace pairqfi;

namespace {

constexpr double pi = pi_v<double>;
const auto circle = PupilModel<double>::circular();
const QuadratureSpec<double> spec{};
const auto moments = psi_moments(circle, spec);

using B = BrightnessSplit<double>;
using L = SeparationVector<double>;

Matrix3<double> diag(double a, double b, double c) {
    Matrix3<double> m = Matrix3<double>::Zero();
    m.diagonal() << a, b, c;
    return m;
}

double max_abs(const Matrix3<double> &a, const Matrix3<double> &b) { return (a - b).cwiseAbs().maxCoeff(); }

} // namespace

TEST_SUITE("qfi") {

TEST_CASE("brightness split") {
    const auto b = B::from_probabilities(0.8, 0.2);
    CHECK(b.dp() == doctest::Approx(0.6));
    CHECK(b.dp2() == doctest::Approx(0.36));
    CHECK(B::from_dp2(0.36).p_plus() == doctest::Approx(0.8));
    CHECK_THROWS_AS(B::from_probabilities(0.7, 0.2), DomainError);
    CHECK_THROWS_AS(B::from_dp(1.5), DomainError);
    CHECK_THROWS_AS(B::from_dp2(-0.1), DomainError);
}

TEST_CASE("eigen structure special cases") {
    const auto single = eigen_structure(0.3, B::from_dp(1.0));
    CHECK(single.e_plus == doctest::Approx(1.0));
    CHECK(single.e_minus == doctest::Approx(0.0));
    CHECK(single.rank_one());

    const auto pure = eigen_structure(1.0, B::from_dp(0.0));
    CHECK(pure.de == doctest::Approx(1.0));
    CHECK(pure.e_plus == doctest::Approx(1.0));
    CHECK(pure.rank_one());

    CHECK_THROWS_AS(eigen_structure(0.0, B::from_dp(0.0)), DegenerateSpectrumError);
    CHECK_THROWS_AS(eigen_structure(1.5, B::from_dp(0.2)), DomainError);
}

TEST_CASE("eigen structure against the gram-basis matrix") {
    const double dp = 0.6, delta = 0.5;
    const auto b = B::from_dp(dp);
    const auto s = eigen_structure(delta, b);
    CHECK(s.de == doctest::Approx(std::sqrt(0.52)).epsilon(1e-14));
    CHECK(s.e_plus == doctest::Approx((1 + std::sqrt(0.52)) / 2).epsilon(1e-14));

    // rho in the non-orthogonal basis {K+, K-}: eigenvalues of G P with real overlap.
    Eigen::Matrix2d gram;
    gram << 1, delta, delta, 1;
    const Eigen::Matrix2d probs = Eigen::Vector2d(b.p_plus(), b.p_minus()).asDiagonal();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix2d> solver(gram * probs * gram, gram);
    CHECK(solver.eigenvalues()(1) == doctest::Approx(s.e_plus).epsilon(1e-14));
    CHECK(solver.eigenvalues()(0) == doctest::Approx(s.e_minus).epsilon(1e-14));

    // Eigenvectors alpha K+ + beta K- are normalized and orthogonal.
    auto inner = [&](int i, int j) {
        return s.alpha(i) * s.alpha(j) + s.beta(i) * s.beta(j) + delta * (s.alpha(i) * s.beta(j) + s.beta(i) * s.alpha(j));
    };
    CHECK(inner(1, 1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(inner(-1, -1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(inner(1, -1)) < 1e-14);
}

TEST_CASE("eigen structure invariants over a grid") {
    for (double dp : {0.0, 0.3, 0.7, 0.95})
        for (double delta : {0.05, 0.4, 0.8, 0.99}) {
            const auto s = eigen_structure(delta, B::from_dp(dp));
            CHECK(s.e_plus + s.e_minus == doctest::Approx(1.0).epsilon(1e-14));
            CHECK(s.e_plus * s.e_minus == doctest::Approx((1 - dp * dp) * (1 - delta * delta) / 4).epsilon(1e-12));
            CHECK(s.e_plus >= s.e_minus);
        }
}

TEST_CASE("geometric closed form and its bounds") {
    const Matrix3<double> h = qfi_geometric_closed(circle, spec);
    CHECK(max_abs(h, diag(4 * pi * pi, 4 * pi * pi, pi * pi / 3)) < 1e-10);
    const auto q = qcrb_from_qfi(h);
    CHECK(q.x() == doctest::Approx(1 / (4 * pi * pi)).epsilon(1e-10));
    CHECK(q.y() == doctest::Approx(1 / (4 * pi * pi)).epsilon(1e-10));
    CHECK(q.z() == doctest::Approx(3 / (pi * pi)).epsilon(1e-10));
}

TEST_CASE("geometric coefficient path collapses to the constant matrix") {
    const Matrix3<double> expected = diag(4 * pi * pi, 4 * pi * pi, pi * pi / 3);
    double worst = 0;
    for (double dp : {0.0, 0.5, 0.9})
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j)
                for (double lz : {0.0, 1.0, 2.0}) {
                    const L l(0.1 + 0.6 * i, 0.2 + 0.55 * j, lz);
                    const auto h =
                        qfi_coefficient_path(l, B::from_dp(dp), CenteringConvention::geometric_center, circle, spec, moments);
                    worst = std::max(worst, max_abs(h, expected));
                }
    CHECK(worst <= 1e-7);
}

TEST_CASE("geometric coefficients reduce to four times the product and derivative terms") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.02, 0.98);
    for (int k = 0; k < 30; ++k) {
        const double dp = u(rng) * 0.99, delta = u(rng);
        const auto b = B::from_dp(dp);
        const auto c = coefficient_set(eigen_structure(delta, b), delta, b, CenteringConvention::geometric_center);
        CHECK(c.product == doctest::Approx(4.0).epsilon(1e-12));
        CHECK(c.derivative == doctest::Approx(4.0).epsilon(1e-12));
        CHECK(std::abs(c.cross) < 1e-11);
        CHECK(std::abs(c.overlap_gradient) < 1e-11);
    }
}

TEST_CASE("centroid coefficients match the pupil-average form") {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u(0.02, 0.98);
    for (int k = 0; k < 30; ++k) {
        const double dp = u(rng) * 0.99, delta = u(rng);
        const auto b = B::from_dp(dp);
        const double dp2 = dp * dp;
        const auto c = coefficient_set(eigen_structure(delta, b), delta, b, CenteringConvention::intensity_centroid);
        const double ratio = 4 * b.p_plus() / b.p_minus();
        CHECK(c.product == doctest::Approx(ratio * (1 + delta * delta * dp2 / (1 - delta * delta))).epsilon(1e-10));
        CHECK(c.derivative == doctest::Approx(ratio).epsilon(1e-12));
        CHECK(std::abs(c.cross) < 1e-10 * ratio);
        CHECK(c.overlap_gradient == doctest::Approx(-dp2 * (1 - dp2)).epsilon(1e-10));
    }
}

TEST_CASE("centroid coefficient path equals the closed form") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> t(-3, 3), z(0, 2), d(0.05, 0.95);
    for (int k = 0; k < 20; ++k) {
        const L l(t(rng), t(rng), z(rng));
        const auto b = B::from_dp2(d(rng));
        const auto path = qfi_coefficient_path(l, b, CenteringConvention::intensity_centroid, circle, spec, moments);
        const auto closed = qfi_centroid_closed(l, b, circle, spec, moments);
        CHECK(max_abs(path, closed) / closed.cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("centroid equal brightness is separation independent") {
    const Matrix3<double> expected = diag(pi * pi, pi * pi, pi * pi / 12);
    for (const L &l : {L(1, 1, 0), L(0.2, -2, 1.5), L(3, 0, 2), L(0, 0, 2), L(1e-4, 0, 0)}) {
        const auto h = qfi_centroid_closed(l, B::from_dp(0.0), circle, spec, moments);
        CHECK(max_abs(h, expected) < 1e-10);
    }
    const auto h = qfi_coefficient_path(L(0.7, 0.4, 1), B::from_dp(0.0), CenteringConvention::intensity_centroid,
                                        circle, spec, moments);
    CHECK(max_abs(h, expected) < 1e-8);
}

TEST_CASE("centroid small-separation limit") {
    const Matrix3<double> base = diag(pi * pi, pi * pi, pi * pi / 12);
    for (double dp2 : {0.0, 0.5, 0.95}) {
        const auto b = B::from_dp2(dp2);
        const auto at_zero = evaluate_centroid_qfi(L(0, 0, 0), b, circle, spec, moments);
        CHECK(max_abs(at_zero.information, (1 - dp2) * base) < 1e-10);
        if (dp2 > 0)
            CHECK(at_zero.small_separation_limit);
    }
    const L tiny(1e-3, 1e-3, 1e-3);
    const auto b = B::from_dp2(0.75);
    const auto oracle = oracle::sld_qfi(tiny, b, CenteringConvention::intensity_centroid).information;
    const auto closed = qfi_centroid_closed(tiny, b, circle, spec, moments);
    CHECK(max_abs(closed, oracle) / oracle.cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("centroid approaches the incoherent limit at large separation") {
    for (double dp2 : {0.75, 0.95}) {
        const auto h = qfi_centroid_closed(L(5, 0, 0.5), B::from_dp2(dp2), circle, spec, moments);
        const auto q = qcrb_from_qfi(h);
        CHECK(q.x() == doctest::Approx(1 / ((1 - dp2) * pi * pi)).epsilon(0.05));
    }
}

TEST_CASE("uniform prefactor form disagrees with the oracle away from equal brightness") {
    const L l(0.3, 0.2, 1);
    const auto b = B::from_dp2(0.95);
    const auto oracle = oracle::sld_qfi(l, b, CenteringConvention::intensity_centroid).information;
    const auto rejected = qfi_centroid_uniform_prefactor(l, b, circle, spec, moments);
    CHECK(max_abs(rejected, oracle) / oracle.cwiseAbs().maxCoeff() > 1.0);
    CHECK_FALSE(is_symmetric_psd(rejected));
    // Equal brightness removes the offending term and both forms coincide.
    const auto b0 = B::from_dp(0.0);
    CHECK(max_abs(qfi_centroid_uniform_prefactor(l, b0, circle, spec, moments),
                  qfi_centroid_closed(l, b0, circle, spec, moments)) < 1e-10);
}

TEST_CASE("convention factor of four at equal brightness") {
    for (const L &l : {L(1, 1, 0), L(-0.4, 2.2, 1.7)}) {
        const auto c = qfi_centroid_closed(l, B::from_dp(0.0), circle, spec, moments);
        CHECK(max_abs(qfi_geometric_closed(moments), 4 * c) < 1e-10);
    }
}

TEST_CASE("qcrb inversion") {
    CHECK((qcrb_from_qfi(Matrix3<double>(Matrix3<double>::Identity())).bounds - Vector3<double>(1, 1, 1)).norm() <
          1e-15);
    const auto q = qcrb_from_qfi(diag(pi * pi, pi * pi, pi * pi / 12));
    CHECK(q.x() == doctest::Approx(0.101321183642).epsilon(1e-11));
    CHECK(q.y() == doctest::Approx(0.101321183642).epsilon(1e-11));
    CHECK(q.z() == doctest::Approx(1.215854203708).epsilon(1e-11));
    Matrix3<double> m;
    m << 4, 1, 0.5, 1, 3, 0.2, 0.5, 0.2, 2;
    const Matrix3<double> inv = m.inverse();
    CHECK((qcrb_from_qfi(m).bounds - inv.diagonal()).norm() < 1e-14);
    CHECK_THROWS_AS(qcrb_from_qfi(diag(1, 1, 0)), SingularMatrixError);
    CHECK_THROWS_AS(qcrb_from_qfi(diag(1, 1, 1e-14)), SingularMatrixError);
    CHECK_THROWS_AS(qcrb_from_qfi(Matrix3<double>(Matrix3<double>::Zero())), SingularMatrixError);
    CHECK_THROWS_AS(qcrb_from_qfi(diag(1, 1, 1), 2.0), SingularMatrixError);
}

TEST_CASE("one-source limit is singular") {
    const auto h = qfi_centroid_closed(L(1, 1, 0), B::from_dp2(1.0), circle, spec, moments);
    CHECK(h.cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(qcrb_from_qfi(h), SingularMatrixError);
}

TEST_CASE("brightness ratios") {
    CHECK(dp2_to_brightness_ratio(0.0) == doctest::Approx(1.0));
    CHECK(dp2_to_brightness_ratio(0.75) == doctest::Approx(13.928).epsilon(1e-4));
    CHECK(dp2_to_brightness_ratio(0.95) == doctest::Approx(77.98).epsilon(1e-3));
    CHECK_THROWS_AS(dp2_to_brightness_ratio(1.0), DomainError);
    CHECK_THROWS_AS(dp2_to_brightness_ratio(-0.5), DomainError);
}

TEST_CASE("centroid information stays symmetric positive semidefinite") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> t(-3, 3), z(0, 2), d(0, 0.99);
    for (int k = 0; k < 200; ++k) {
        const L l(t(rng), t(rng), z(rng));
        CHECK(is_symmetric_psd(qfi_centroid_closed(l, B::from_dp2(d(rng)), circle, spec, moments)));
    }
}

TEST_CASE("centroid at an overlap null needs equal brightness") {
    CHECK_NOTHROW(qfi_centroid_closed(L(0, 0, 2), B::from_dp(0.0), circle, spec, moments));
    CHECK_THROWS_AS(qfi_centroid_closed(L(0, 0, 2), B::from_dp2(0.5), circle, spec, moments), OverlapVanishesError);
}

TEST_CASE("long double closed forms") {
    using LD = long double;
    const auto pupil = PupilModel<LD>::circular();
    const QuadratureSpec<LD> s;
    const auto m = psi_moments(pupil, s);
    const auto h = qfi_centroid_closed(SeparationVector<LD>(0.3L, 0.2L, 1.0L), BrightnessSplit<LD>::from_dp2(0.95L),
                                       pupil, s, m);
    const auto hd = qfi_centroid_closed(L(0.3, 0.2, 1), B::from_dp2(0.95), circle, spec, moments);
    CHECK(max_abs(h.cast<double>(), hd) < 1e-11);
    const auto path = qfi_coefficient_path(SeparationVector<LD>(0.7L, -0.1L, 0.4L), BrightnessSplit<LD>::from_dp(0.3L),
                                           CenteringConvention::geometric_center, pupil, s, m);
    CHECK(max_abs(path.cast<double>(), diag(4 * pi * pi, 4 * pi * pi, pi * pi / 3)) < 1e-9);
}

} // TEST_SUITE
