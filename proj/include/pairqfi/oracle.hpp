#pragma once

// Brute-force QFI: photon states sampled on a polar pupil grid, the density
// operator diagonalized in the span of the two states, and the general
// eigen-decomposition QFI formula summed with no closed-form shortcuts.

#include <cmath>
#include <complex>
#include <memory>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "pairqfi/overlap.hpp"
#include "pairqfi/qfi.hpp"
#include "pairqfi/quadrature.hpp"
#include "pairqfi/types.hpp"

namespace pairqfi::oracle {

/// Circular-aperture nodes: `resolution` Gauss-Legendre radii times
/// 2 * `resolution` uniform angles. `weight` includes |P|^2 = 1/pi.
template <typename Scalar>
struct PolarGrid {
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
    int resolution = 0;
    Array ux;
    Array uy;
    Array weight;

    Eigen::Index size() const { return weight.size(); }
};

template <typename Scalar>
std::shared_ptr<const PolarGrid<Scalar>> make_polar_grid(int resolution) {
    if (resolution < 64)
        throw DomainError("oracle grid resolution must be at least 64");
    const auto radial = composite(gauss_legendre<Scalar>(resolution), 1, Scalar(0), Scalar(1));
    const int n_angle = 2 * resolution;
    const Scalar dtheta = 2 * pi_v<Scalar> / n_angle;
    auto grid = std::make_shared<PolarGrid<Scalar>>();
    grid->resolution = resolution;
    const Eigen::Index total = static_cast<Eigen::Index>(resolution) * n_angle;
    grid->ux.resize(total);
    grid->uy.resize(total);
    grid->weight.resize(total);
    Eigen::Index k = 0;
    for (int r = 0; r < resolution; ++r) {
        const Scalar u = radial.nodes(r);
        const Scalar w = radial.weights(r) * u * dtheta / pi_v<Scalar>;
        for (int a = 0; a < n_angle; ++a, ++k) {
            grid->ux(k) = u * std::cos(a * dtheta);
            grid->uy(k) = u * std::sin(a * dtheta);
            grid->weight(k) = w;
        }
    }
    return grid;
}

/// Sampled single-source state. Components are sqrt(node weight) <u|K>, so
/// the discretized inner product is the plain Euclidean one.
template <typename Scalar>
struct DiscretizedState {
    Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> amplitude;

    std::complex<Scalar> inner(const DiscretizedState &other) const { return amplitude.dot(other.amplitude); }
    Scalar norm() const { return amplitude.norm(); }
};

template <typename Scalar>
struct StatePair {
    std::shared_ptr<const PolarGrid<Scalar>> grid;
    DiscretizedState<Scalar> plus;
    DiscretizedState<Scalar> minus;
    // Phase constant that makes <K+|K-> real and positive.
    Scalar phi = 0;
    // d phi / d l, from the same discrete sums.
    Vector3<Scalar> d_phi = Vector3<Scalar>::Zero();
    // Psi(u; l) enters K+ as -plus_multiplier Psi and K- as +minus_multiplier Psi.
    Scalar plus_multiplier = 1;
    Scalar minus_multiplier = 1;

    Scalar overlap() const { return plus.inner(minus).real(); }
};

namespace detail {

template <typename Scalar>
std::pair<Scalar, Scalar> phase_multipliers(const BrightnessSplit<Scalar> &b, CenteringConvention convention) {
    if (convention == CenteringConvention::geometric_center)
        return {Scalar(1), Scalar(1)};
    return {b.p_minus(), b.p_plus()};
}

template <typename Scalar>
Eigen::Array<Scalar, Eigen::Dynamic, 1> phase_on_grid(const PolarGrid<Scalar> &g, const SeparationVector<Scalar> &l) {
    const Scalar pi = pi_v<Scalar>;
    return 2 * pi * (g.ux * l.x() + g.uy * l.y()) + pi * (g.ux.square() + g.uy.square()) * l.z();
}

} // namespace detail

/// Sample |K+> and |K-> on the grid for either centering convention.
template <typename Scalar>
StatePair<Scalar> build_states(const SeparationVector<Scalar> &l, const BrightnessSplit<Scalar> &brightness,
                               CenteringConvention convention, std::shared_ptr<const PolarGrid<Scalar>> grid) {
    using Complex = std::complex<Scalar>;
    using CArray = Eigen::Array<Complex, Eigen::Dynamic, 1>;
    const auto &g = *grid;
    const Scalar defect = std::abs(g.weight.sum() - 1);
    if (defect > Scalar(1e-6))
        throw ResolutionError("oracle grid too coarse: norm defect above 1e-6");

    const auto [a_plus, a_minus] = detail::phase_multipliers(brightness, convention);
    const Scalar total = a_plus + a_minus;
    const auto psi = detail::phase_on_grid(g, l);

    // Overlap phase from the discrete average of exp(i total Psi).
    const CArray e = (Complex(0, total) * psi.template cast<Complex>()).exp();
    const Complex avg = (g.weight.template cast<Complex>() * e).sum();
    const Scalar pi = pi_v<Scalar>;
    Eigen::Matrix<Complex, 3, 1> grad_avg;
    grad_avg(0) = (g.weight.template cast<Complex>() * (2 * pi * g.ux).template cast<Complex>() * e).sum();
    grad_avg(1) = (g.weight.template cast<Complex>() * (2 * pi * g.uy).template cast<Complex>() * e).sum();
    grad_avg(2) =
        (g.weight.template cast<Complex>() * (pi * (g.ux.square() + g.uy.square())).template cast<Complex>() * e).sum();

    StatePair<Scalar> s;
    s.grid = grid;
    s.plus_multiplier = a_plus;
    s.minus_multiplier = a_minus;
    s.phi = std::abs(avg) > 0 ? std::arg(avg) / total : Scalar(0);
    if (std::abs(avg) > 0)
        s.d_phi = (grad_avg / avg).real();

    const auto root_w = g.weight.sqrt().template cast<Complex>();
    const CArray phase_plus = Complex(0, 1) * (a_plus * (s.phi - psi)).template cast<Complex>();
    const CArray phase_minus = Complex(0, -1) * (a_minus * (s.phi - psi)).template cast<Complex>();
    s.plus.amplitude = (root_w * phase_plus.exp()).matrix();
    s.minus.amplitude = (root_w * phase_minus.exp()).matrix();

    if (std::abs(s.plus.norm() - 1) > Scalar(1e-6) || std::abs(s.minus.norm() - 1) > Scalar(1e-6))
        throw ResolutionError("oracle grid too coarse: state norm defect above 1e-6");
    return s;
}

template <typename Scalar>
StatePair<Scalar> build_states(const SeparationVector<Scalar> &l, const BrightnessSplit<Scalar> &brightness,
                               CenteringConvention convention, int resolution) {
    return build_states(l, brightness, convention, make_polar_grid<Scalar>(resolution));
}

enum class DerivativeMode {
    // d|K>/dl from the wavefunction phases
    analytic,
    // central differences of rho applied to vectors
    finite_difference,
};

template <typename Scalar>
struct OracleOptions {
    int resolution = 256;
    Scalar step = Scalar(1e-5);
    DerivativeMode mode = DerivativeMode::analytic;
    // Re-run at twice the resolution and fail if the result moves by more
    // than 1e-6 relative.
    bool check_resolution = false;
};

template <typename Scalar>
struct SldEvaluation {
    Matrix3<Scalar> information;
    Scalar e_plus;
    Scalar e_minus;
    // max_i || rho |e_i> - e_i |e_i> ||
    Scalar eigen_residual;
    // <e_i| d_mu rho |e_i>, column 0 for e_+, column 1 for e_-
    Eigen::Matrix<Scalar, 3, 2> diagonal_elements;
    Scalar overlap;
};

namespace detail {

template <typename Scalar>
using CVector = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

// rho |v> = p+ |K+><K+|v> + p- |K-><K-|v>
template <typename Scalar>
CVector<Scalar> apply_rho(const StatePair<Scalar> &s, const BrightnessSplit<Scalar> &b, const CVector<Scalar> &v) {
    return b.p_plus() * s.plus.amplitude * s.plus.amplitude.dot(v) +
           b.p_minus() * s.minus.amplitude * s.minus.amplitude.dot(v);
}

template <typename Scalar>
Scalar max_relative(const Matrix3<Scalar> &a, const Matrix3<Scalar> &b) {
    return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
}

} // namespace detail

/// QFI matrix from the full eigen-decomposition formula
///   H = sum_i 4/e_i <e_i|d rho d rho|e_i>
///     + sum_ij [4 e_i/(e_i+e_j)^2 - 4/e_i] <e_i|d rho|e_j><e_j|d rho|e_i>,
/// real part taken.
template <typename Scalar>
SldEvaluation<Scalar> sld_qfi(const SeparationVector<Scalar> &l, const BrightnessSplit<Scalar> &brightness,
                              CenteringConvention convention, const OracleOptions<Scalar> &options = {}) {
    using Complex = std::complex<Scalar>;
    using CVector = detail::CVector<Scalar>;
    using Matrix2c = Eigen::Matrix<Complex, 2, 2>;

    if (!(options.step >= Scalar(1e-6) && options.step <= Scalar(1e-4)))
        throw DomainError("oracle finite-difference step must lie in [1e-6, 1e-4]");
    const auto grid = make_polar_grid<Scalar>(options.resolution);
    const StatePair<Scalar> s = build_states(l, brightness, convention, grid);
    const CVector &kp = s.plus.amplitude;
    const CVector &km = s.minus.amplitude;

    // Diagonalize rho in the span of {K+, K-}: (G P G) c = e G c.
    Matrix2c gram;
    gram << Complex(1), kp.dot(km), km.dot(kp), Complex(1);
    gram(0, 0) = kp.squaredNorm();
    gram(1, 1) = km.squaredNorm();
    const Matrix2c probs = Eigen::Vector2<Complex>(brightness.p_plus(), brightness.p_minus()).asDiagonal();
    const Matrix2c lhs = gram * probs * gram;
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix2c> solver(lhs, gram);
    if (solver.info() != Eigen::Success)
        throw DegenerateSpectrumError("rank-one state: the two photon states are parallel");
    const Scalar e_minus = solver.eigenvalues()(0);
    const Scalar e_plus = solver.eigenvalues()(1);
    if (e_plus - e_minus < degenerate_spectrum_threshold<Scalar>)
        throw DegenerateSpectrumError("degenerate spectrum: e+ - e- < 1e-9");
    if (!(e_minus > Scalar(1e-13)))
        throw DegenerateSpectrumError("rank-one state: e- vanishes");

    const Scalar e[2] = {e_plus, e_minus};
    CVector ev[2];
    for (int i = 0; i < 2; ++i) {
        const auto c = solver.eigenvectors().col(1 - i);
        ev[i] = c(0) * kp + c(1) * km;
        ev[i] /= ev[i].norm();
    }

    // w[mu][j] = d_mu rho |e_j>
    CVector w[3][2];
    if (options.mode == DerivativeMode::analytic) {
        const auto psi_grad = [&](int mu) -> Eigen::Array<Scalar, Eigen::Dynamic, 1> {
            const Scalar pi = pi_v<Scalar>;
            if (mu == 0)
                return 2 * pi * grid->ux;
            if (mu == 1)
                return 2 * pi * grid->uy;
            return pi * (grid->ux.square() + grid->uy.square());
        };
        for (int mu = 0; mu < 3; ++mu) {
            const Eigen::Array<Complex, Eigen::Dynamic, 1> factor = (s.d_phi(mu) - psi_grad(mu)).template cast<Complex>();
            const CVector dkp = (Complex(0, s.plus_multiplier) * factor * kp.array()).matrix();
            const CVector dkm = (Complex(0, -s.minus_multiplier) * factor * km.array()).matrix();
            for (int j = 0; j < 2; ++j)
                w[mu][j] = brightness.p_plus() * (dkp * kp.dot(ev[j]) + kp * dkp.dot(ev[j])) +
                           brightness.p_minus() * (dkm * km.dot(ev[j]) + km * dkm.dot(ev[j]));
        }
    } else {
        for (int mu = 0; mu < 3; ++mu) {
            const auto up = build_states(l.shifted(mu, options.step), brightness, convention, grid);
            const auto down = build_states(l.shifted(mu, -options.step), brightness, convention, grid);
            for (int j = 0; j < 2; ++j)
                w[mu][j] = (detail::apply_rho(up, brightness, ev[j]) - detail::apply_rho(down, brightness, ev[j])) /
                           (2 * options.step);
        }
    }

    SldEvaluation<Scalar> out;
    out.e_plus = e_plus;
    out.e_minus = e_minus;
    out.overlap = s.overlap();
    out.eigen_residual = 0;
    for (int i = 0; i < 2; ++i)
        out.eigen_residual =
            std::max(out.eigen_residual, (detail::apply_rho(s, brightness, ev[i]) - e[i] * ev[i]).norm());
    for (int mu = 0; mu < 3; ++mu)
        for (int i = 0; i < 2; ++i)
            out.diagonal_elements(mu, i) = ev[i].dot(w[mu][i]).real();

    Matrix3<Scalar> h;
    for (int mu = 0; mu < 3; ++mu)
        for (int nu = 0; nu < 3; ++nu) {
            Complex acc = 0;
            for (int i = 0; i < 2; ++i) {
                acc += (4 / e[i]) * w[mu][i].dot(w[nu][i]);
                for (int j = 0; j < 2; ++j) {
                    const Scalar c = 4 * e[i] / ((e[i] + e[j]) * (e[i] + e[j])) - 4 / e[i];
                    acc += c * ev[i].dot(w[mu][j]) * ev[j].dot(w[nu][i]);
                }
            }
            h(mu, nu) = acc.real();
        }
    out.information = (h + h.transpose()) / 2;

    if (options.check_resolution) {
        OracleOptions<Scalar> finer = options;
        finer.resolution *= 2;
        finer.check_resolution = false;
        const auto refined = sld_qfi(l, brightness, convention, finer);
        if (detail::max_relative(out.information, refined.information) > Scalar(1e-6))
            throw ResolutionError("oracle grid too coarse: QFI changes by more than 1e-6 when N doubles");
    }
    return out;
}

/// Central differences of Delta and phi (phi differences wrapped to
/// (-pi, pi]); independent counterpart of the analytic derivatives.
template <typename Scalar>
std::pair<Vector3<Scalar>, Vector3<Scalar>> finite_diff_overlap(const SeparationVector<Scalar> &l,
                                                                const PupilModel<Scalar> &pupil, Scalar h,
                                                                const QuadratureSpec<Scalar> &spec) {
    if (!(h >= Scalar(1e-12)))
        throw DomainError("finite-difference step underflow (h < 1e-12)");
    const auto center = phase_averages(l, pupil, spec);
    if (!(std::abs(center.i0) > Scalar(1e-3)))
        throw OverlapVanishesError("finite-difference overlap derivatives need |<exp(i Psi)>| > 1e-3");
    Vector3<Scalar> d_delta, d_phi;
    const Scalar pi = pi_v<Scalar>;
    for (int mu = 0; mu < 3; ++mu) {
        const auto up = phase_averages(l.shifted(mu, h), pupil, spec).i0;
        const auto down = phase_averages(l.shifted(mu, -h), pupil, spec).i0;
        d_delta(mu) = (std::abs(up) - std::abs(down)) / (2 * h);
        Scalar dphi = std::arg(up) - std::arg(down);
        while (dphi > pi)
            dphi -= 2 * pi;
        while (dphi <= -pi)
            dphi += 2 * pi;
        d_phi(mu) = dphi / (2 * h);
    }
    return {d_delta, d_phi};
}

template <typename Scalar>
std::pair<Vector3<Scalar>, Vector3<Scalar>> finite_diff_overlap(const SeparationVector<Scalar> &l,
                                                                const PupilModel<Scalar> &pupil, Scalar h) {
    QuadratureSpec<Scalar> spec;
    spec.tolerance = Scalar(1e-13);
    return finite_diff_overlap(l, pupil, h, spec);
}

} // namespace pairqfi::oracle
