#include <doctest.h>

#include <random>

#include "pairqfi/oracle.hpp"
#include "pairqfi/overlap.hpp"

using namespace pairqfi;

namespace {
constexpr double pi = pi_v<double>;
const auto circle = PupilModel<double>::circular();
const QuadratureSpec<double> spec{};
} // namespace

TEST_SUITE("overlap") {

TEST_CASE("phase function values") {
    CHECK(phase_function(Vector2<double>(0.5, 0), SeparationVector<double>(1, 0, 0)) == doctest::Approx(pi));
    CHECK(phase_function(Vector2<double>(0, 0), SeparationVector<double>(2, -1, 3)) == 0.0);
    CHECK(phase_function(Vector2<double>(0.6, 0.8), SeparationVector<double>(0, 0, 1)) == doctest::Approx(pi));
    const Vector3<double> g = phase_gradient(Vector2<double>(0.6, 0.8));
    CHECK(g.x() == doctest::Approx(1.2 * pi));
    CHECK(g.y() == doctest::Approx(1.6 * pi));
    CHECK(g.z() == doctest::Approx(pi));
}

TEST_CASE("physical units") {
    const PhysicalScales<double> s{500e-9, 5e-3, 0.1, 0.2};
    CHECK(to_dimensionless(Vector3<double>(0, 0, 0), s).coords.norm() == 0.0);
    const auto lx = to_dimensionless(Vector3<double>(500e-9 * 0.1 / 5e-3, 0, 0), s);
    CHECK(lx.x() == doctest::Approx(1.0));
    const auto lz = to_dimensionless(Vector3<double>(0, 0, 500e-9 * 0.01 / 25e-6), s);
    CHECK(lz.z() == doctest::Approx(1.0));
    CHECK_THROWS_AS(to_dimensionless(Vector3<double>(1, 0, 0), PhysicalScales<double>{0, 1, 1, 1}), DomainError);
    CHECK_THROWS_AS(to_dimensionless(Vector3<double>(1, 0, 0), PhysicalScales<double>{1, 1, -1, 1}), DomainError);
}

TEST_CASE("separation vectors reject non-finite input") {
    CHECK_THROWS_AS(SeparationVector<double>(std::nan(""), 0, 0), DomainError);
    CHECK_THROWS_AS(SeparationVector<double>(0, INFINITY, 0), DomainError);
}

TEST_CASE("overlap at zero separation") {
    const auto ov = overlap_data(SeparationVector<double>(0, 0, 0), circle, spec);
    CHECK(ov.delta == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(ov.phi == doctest::Approx(0.0));
    CHECK(ov.d_delta.norm() < 1e-14);
    CHECK(ov.d_phi.x() == doctest::Approx(0.0));
    CHECK(ov.d_phi.y() == doctest::Approx(0.0));
    CHECK(ov.d_phi.z() == doctest::Approx(pi / 2));
}

TEST_CASE("overlap nulls") {
    CHECK_THROWS_AS(overlap_data(SeparationVector<double>(0, 0, 2), circle, spec), OverlapVanishesError);
    CHECK(std::abs(phase_averages(SeparationVector<double>(0, 0, 2), circle, spec).i0) <= 1e-9);
    CHECK(std::abs(phase_averages(SeparationVector<double>(0.6098, 0, 0), circle, spec).i0) <= 1e-3);
}

TEST_CASE("overlap is even in the separation") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> t(-3, 3);
    for (int k = 0; k < 30; ++k) {
        const SeparationVector<double> l(t(rng), t(rng), t(rng));
        const double a = std::abs(phase_averages(l, circle, spec).i0);
        const double b = std::abs(phase_averages(l.scaled(-1), circle, spec).i0);
        CHECK(std::abs(a - b) < 1e-12);
    }
}

TEST_CASE("overlap is invariant under z rotation") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> t(-3, 3), angle(-pi, pi);
    for (int k = 0; k < 30; ++k) {
        const SeparationVector<double> l(t(rng), t(rng), t(rng));
        const auto a = phase_averages(l, circle, spec);
        const auto b = phase_averages(l.rotated_about_z(angle(rng)), circle, spec);
        CHECK(std::abs(a.i0 - b.i0) < 1e-12);
        CHECK(std::abs(a.iz - b.iz) < 1e-11);
    }
}

TEST_CASE("analytic derivatives match central differences") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> t(-3, 3), z(-2, 2);
    int tested = 0;
    while (tested < 40) {
        const SeparationVector<double> l(t(rng), t(rng), z(rng));
        if (std::abs(phase_averages(l, circle, spec).i0) <= 1e-3)
            continue;
        ++tested;
        const auto an = overlap_data(l, circle, spec);
        const auto [dd, dp] = oracle::finite_diff_overlap(l, circle, 1e-5);
        const double scale = std::max(an.d_delta.cwiseAbs().maxCoeff(), an.d_phi.cwiseAbs().maxCoeff());
        CHECK((dd - an.d_delta).cwiseAbs().maxCoeff() / scale < 1e-6);
        CHECK((dp - an.d_phi).cwiseAbs().maxCoeff() / scale < 1e-6);
    }
}

TEST_CASE("finite differences at the origin") {
    const auto [dd, dp] = oracle::finite_diff_overlap(SeparationVector<double>(0, 0, 0), circle, 1e-5);
    CHECK(dd.cwiseAbs().maxCoeff() < 1e-9);
    CHECK(dp.x() == doctest::Approx(0.0));
    CHECK(dp.z() == doctest::Approx(pi / 2).epsilon(1e-8));
    CHECK_THROWS_AS(oracle::finite_diff_overlap(SeparationVector<double>(0, 0, 0), circle, 1e-13), DomainError);
    CHECK_THROWS_AS(oracle::finite_diff_overlap(SeparationVector<double>(0, 0, 2), circle, 1e-5),
                    OverlapVanishesError);
}

TEST_CASE("phase moments of the clear aperture") {
    const auto m = psi_moments(circle, spec);
    CHECK(m.m1.x() == doctest::Approx(0.0));
    CHECK(m.m1.y() == doctest::Approx(0.0));
    CHECK(m.m1.z() == doctest::Approx(pi / 2).epsilon(1e-12));
    Matrix3<double> m2 = Matrix3<double>::Zero();
    m2.diagonal() << pi * pi, pi * pi, pi * pi / 3;
    CHECK((m.m2 - m2).cwiseAbs().maxCoeff() < 1e-11);
    Matrix3<double> cov = Matrix3<double>::Zero();
    cov.diagonal() << pi * pi, pi * pi, pi * pi / 12;
    CHECK((m.covariance() - cov).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("sampled disk approaches the clear aperture") {
    const int n = 400;
    const double h = 2.0 / n;
    std::vector<double> w(static_cast<std::size_t>(n) * n);
    auto probe = PupilModel<double>::sampled(1, 2.0, {1.0});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const Vector2<double> u(-1 + (i + 0.5) * h, -1 + (j + 0.5) * h);
            w[static_cast<std::size_t>(i) * n + j] = u.squaredNorm() <= 1 ? 1.0 : 0.0;
        }
    const auto p = PupilModel<double>::sampled(n, h, w);
    const auto m = psi_moments(p, spec);
    CHECK(m.m1.z() == doctest::Approx(pi / 2).epsilon(1e-3));
    CHECK(m.m2(0, 0) == doctest::Approx(pi * pi).epsilon(1e-3));
    const SeparationVector<double> l(0.4, -0.3, 0.8);
    CHECK(std::abs(phase_averages(l, p, spec).i0 - phase_averages(l, circle, spec).i0) < 5e-3);
    (void)probe;
}

} // TEST_SUITE
