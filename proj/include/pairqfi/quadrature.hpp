#pragma once

// Pupil-plane integration: Gauss-Legendre rules, weighted pupil averages,
// Bessel functions and the circular-aperture radial integrals.

#include <math.h>

#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pairqfi/types.hpp"

namespace pairqfi {

template <typename Scalar>
struct QuadratureSpec {
    int radial_nodes = 16;
    int angular_nodes = 32;
    Scalar tolerance = Scalar(1e-10);
    // Maximum number of node doublings before giving up.
    int refinement_cap = 6;

    void validate() const {
        if (radial_nodes < 16)
            throw DomainError("radial node count must be at least 16");
        if (angular_nodes < 32)
            throw DomainError("angular node count must be at least 32");
        if (!(tolerance > 0))
            throw DomainError("quadrature tolerance must be positive");
        if (refinement_cap < 0)
            throw DomainError("refinement cap must be non-negative");
    }
};

/// Normalized pupil weight |P(u)|^2.
///
/// The circular clear aperture carries no data: the weight is 1/pi on the
/// unit disk. A sampled grid stores weights at the centres of an N x N grid
/// of cells of size h, u = (-1 + (i+1/2)h, -1 + (j+1/2)h), renormalized on
/// construction so the midpoint sum of the weights is one. Averages over a
/// sampled grid use the midpoint rule and are only O(h^2) accurate; the
/// quadrature tolerance does not apply to them.
template <typename Scalar>
class PupilModel {
  public:
    enum class Kind { circular_clear, sampled_grid };
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

    static PupilModel circular() { return PupilModel(); }

    static PupilModel sampled(int n, Scalar h, std::vector<Scalar> weights) {
        if (n <= 0 || !(h > 0))
            throw DomainError("sampled pupil needs N > 0 and h > 0");
        if (weights.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n))
            throw DomainError("sampled pupil needs exactly N^2 weights");
        PupilModel p;
        p.kind_ = Kind::sampled_grid;
        p.n_ = n;
        p.h_ = h;
        p.weights_ = Eigen::Map<const Array>(weights.data(), static_cast<Eigen::Index>(weights.size()));
        if (!p.weights_.allFinite() || (p.weights_ < 0).any())
            throw DomainError("pupil weights must be finite and non-negative");
        const Scalar total = p.weights_.sum() * h * h;
        if (!(total > 0))
            throw DomainError("pupil weights integrate to zero");
        p.factor_ = 1 / total;
        p.weights_ *= p.factor_;
        return p;
    }

    Kind kind() const { return kind_; }
    bool is_circular() const { return kind_ == Kind::circular_clear; }
    int grid_size() const { return n_; }
    Scalar spacing() const { return h_; }
    // Factor applied to the raw samples to reach unit integral (1 for the
    // analytic aperture).
    Scalar normalization_factor() const { return factor_; }
    const Array &weights() const { return weights_; }
    Scalar weight(int i, int j) const { return weights_(static_cast<Eigen::Index>(i) * n_ + j); }
    Vector2<Scalar> cell_center(int i, int j) const {
        return {-1 + (i + Scalar(0.5)) * h_, -1 + (j + Scalar(0.5)) * h_};
    }

  private:
    PupilModel() = default;
    Kind kind_ = Kind::circular_clear;
    int n_ = 0;
    Scalar h_ = 0;
    Scalar factor_ = 1;
    Array weights_;
};

template <typename Scalar>
struct QuadratureRule {
    Eigen::Array<Scalar, Eigen::Dynamic, 1> nodes;
    Eigen::Array<Scalar, Eigen::Dynamic, 1> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1] by Newton iteration on P_n.
template <typename Scalar>
QuadratureRule<Scalar> gauss_legendre(int n) {
    if (n < 1)
        throw DomainError("Gauss-Legendre order must be positive");
    QuadratureRule<Scalar> rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const Scalar eps = std::numeric_limits<Scalar>::epsilon();
    for (int i = 0; i < (n + 1) / 2; ++i) {
        Scalar x = std::cos(pi_v<Scalar> * (i + Scalar(0.75)) / (n + Scalar(0.5)));
        Scalar dp = 0;
        for (int iter = 0; iter < 100; ++iter) {
            Scalar p0 = 1, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const Scalar pk = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            if (n == 1)
                p0 = 1;
            dp = n * (x * p1 - p0) / (x * x - 1);
            const Scalar dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) <= 4 * eps)
                break;
        }
        // One more derivative evaluation at the converged node.
        Scalar p0 = 1, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const Scalar pk = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
            p0 = p1;
            p1 = pk;
        }
        if (n == 1)
            p0 = 1;
        dp = n * (x * p1 - p0) / (x * x - 1);
        const Scalar w = 2 / ((1 - x * x) * dp * dp);
        rule.nodes(i) = -x;
        rule.nodes(n - 1 - i) = x;
        rule.weights(i) = w;
        rule.weights(n - 1 - i) = w;
    }
    if (n % 2 == 1)
        rule.nodes(n / 2) = 0;
    return rule;
}

/// Composite rule on [a, b]: `panels` equal panels of the given base rule.
template <typename Scalar>
QuadratureRule<Scalar> composite(const QuadratureRule<Scalar> &base, int panels, Scalar a, Scalar b) {
    const Eigen::Index m = base.nodes.size();
    QuadratureRule<Scalar> rule;
    rule.nodes.resize(m * panels);
    rule.weights.resize(m * panels);
    const Scalar width = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const Scalar lo = a + p * width;
        rule.nodes.segment(p * m, m) = lo + (base.nodes + 1) * (width / 2);
        rule.weights.segment(p * m, m) = base.weights * (width / 2);
    }
    return rule;
}

namespace detail {

template <typename T>
auto max_abs_diff(const T &a, const T &b) {
    if constexpr (requires { (a - b).cwiseAbs().maxCoeff(); })
        return (a - b).cwiseAbs().maxCoeff();
    else
        return std::abs(a - b);
}

template <typename T>
std::string describe(const T &value) {
    std::ostringstream os;
    os.precision(17);
    if constexpr (requires { value.transpose(); })
        os << value.transpose();
    else
        os << value;
    return os.str();
}

template <typename T>
double magnitude(const T &value) {
    if constexpr (requires { value.cwiseAbs().maxCoeff(); })
        return static_cast<double>(value.cwiseAbs().maxCoeff());
    else
        return static_cast<double>(std::abs(value));
}

} // namespace detail

/// Weighted pupil average  integral d^2u |P(u)|^2 f(u).
///
/// `f` maps a pupil coordinate (Vector2) to a scalar, complex or fixed-size
/// Eigen value. For the circular aperture the rule is composite
/// Gauss-Legendre in radius times trapezoidal in angle; node counts double
/// until successive estimates differ by less than the tolerance.
template <typename Scalar, typename F>
auto pupil_average(F &&f, const PupilModel<Scalar> &pupil, const QuadratureSpec<Scalar> &spec) {
    using T = std::decay_t<std::invoke_result_t<F &, const Vector2<Scalar> &>>;

    if (!pupil.is_circular()) {
        const int n = pupil.grid_size();
        const Scalar cell = pupil.spacing() * pupil.spacing();
        T acc = (cell * pupil.weight(0, 0)) * f(pupil.cell_center(0, 0));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == 0 && j == 0)
                    continue;
                const Scalar w = pupil.weight(i, j);
                if (w != 0)
                    acc += (cell * w) * f(pupil.cell_center(i, j));
            }
        return acc;
    }

    spec.validate();
    const auto base = gauss_legendre<Scalar>(spec.radial_nodes);
    auto estimate = [&](int level) {
        const auto radial = composite(base, 1 << level, Scalar(0), Scalar(1));
        const int n_angle = spec.angular_nodes << level;
        const Scalar dtheta = 2 * pi_v<Scalar> / n_angle;
        std::vector<Scalar> cs(n_angle), sn(n_angle);
        for (int a = 0; a < n_angle; ++a) {
            cs[a] = std::cos(a * dtheta);
            sn[a] = std::sin(a * dtheta);
        }
        bool first = true;
        T acc{};
        for (Eigen::Index r = 0; r < radial.nodes.size(); ++r) {
            const Scalar u = radial.nodes(r);
            // (1/pi) * u du * dtheta
            const Scalar w = radial.weights(r) * u * dtheta / pi_v<Scalar>;
            for (int a = 0; a < n_angle; ++a) {
                const Vector2<Scalar> pt(u * cs[a], u * sn[a]);
                if (first) {
                    acc = w * f(pt);
                    first = false;
                } else {
                    acc += w * f(pt);
                }
            }
        }
        return acc;
    };

    T previous = estimate(0);
    T current = previous;
    for (int level = 1; level <= spec.refinement_cap; ++level) {
        current = estimate(level);
        if (detail::max_abs_diff(current, previous) < spec.tolerance)
            return current;
        if (level < spec.refinement_cap)
            previous = current;
    }
    throw QuadratureError("quadrature did not converge: last two estimates " + detail::describe(previous) +
                              " and " + detail::describe(current),
                          detail::magnitude(previous), detail::magnitude(current));
}

inline float bessel_j0(float x) { return ::j0f(x); }
inline double bessel_j0(double x) { return ::j0(x); }
inline long double bessel_j0(long double x) { return ::j0l(x); }
inline float bessel_j1(float x) { return ::j1f(x); }
inline double bessel_j1(double x) { return ::j1(x); }
inline long double bessel_j1(long double x) { return ::j1l(x); }

/// The four pupil averages <e^{i Psi}>, <d_x Psi e^{i Psi}>,
/// <d_y Psi e^{i Psi}>, <d_z Psi e^{i Psi}>.
template <typename Scalar>
struct RadialIntegralSet {
    using Complex = std::complex<Scalar>;
    Complex i0{};
    Complex ix{};
    Complex iy{};
    Complex iz{};

    ComplexVector3<Scalar> derivative_averages() const { return {ix, iy, iz}; }
};

namespace detail {

template <typename Scalar>
bool needs_oscillation_guard(const SeparationVector<Scalar> &l) {
    return l.transverse_norm() > 10 || std::abs(l.z()) > 10;
}

} // namespace detail

/// Circular clear aperture: the pupil averages reduced to 1D radial
/// integrals through the Bessel angular identities, evaluated by composite
/// Gauss-Legendre with panel doubling.
template <typename Scalar>
RadialIntegralSet<Scalar> radial_integrals(const SeparationVector<Scalar> &l, const QuadratureSpec<Scalar> &spec) {
    using Complex = std::complex<Scalar>;
    using Sums = Eigen::Matrix<Complex, 3, 1>;
    spec.validate();

    const Scalar pi = pi_v<Scalar>;
    const Scalar lt = l.transverse_norm();
    const Scalar lz = l.z();
    const auto base = gauss_legendre<Scalar>(spec.radial_nodes);

    // (int 2u J0 e, int u^2 J1 e, int u^3 J0 e) with e = exp(i pi u^2 l_z)
    auto sums = [&](int panels) {
        const auto rule = composite(base, panels, Scalar(0), Scalar(1));
        Sums s = Sums::Zero();
        for (Eigen::Index k = 0; k < rule.nodes.size(); ++k) {
            const Scalar u = rule.nodes(k);
            const Scalar w = rule.weights(k);
            const Scalar arg = 2 * pi * u * lt;
            const Scalar j0 = bessel_j0(arg);
            const Scalar j1 = bessel_j1(arg);
            const Complex e = std::polar(Scalar(1), pi * u * u * lz);
            s(0) += (w * 2 * u * j0) * e;
            s(1) += (w * u * u * j1) * e;
            s(2) += (w * u * u * u * j0) * e;
        }
        return s;
    };

    int panels = detail::needs_oscillation_guard(l) ? 2 : 1;
    Sums previous = sums(panels);
    Sums current = previous;
    bool converged = false;
    for (int level = 1; level <= spec.refinement_cap; ++level) {
        panels *= 2;
        current = sums(panels);
        // Compare the assembled integrals, whose scale differs from the sums.
        const Eigen::Matrix<Scalar, 3, 1> scale(1, 4 * pi, 2 * pi);
        if (((current - previous).cwiseAbs().array() * scale.array()).maxCoeff() < spec.tolerance) {
            converged = true;
            break;
        }
        previous = current;
    }
    if (!converged)
        throw QuadratureError("quadrature did not converge: radial integrals at l = (" + detail::describe(l.coords) +
                                  "), last two estimates of <exp(i Psi)> " + detail::describe(previous(0)) +
                                  " and " + detail::describe(current(0)),
                              std::abs(previous(0)), std::abs(current(0)));

    const Scalar cos_phi = lt > 0 ? l.x() / lt : Scalar(0);
    const Scalar sin_phi = lt > 0 ? l.y() / lt : Scalar(0);
    const Complex four_i_pi(0, 4 * pi);
    RadialIntegralSet<Scalar> out;
    out.i0 = current(0);
    out.ix = four_i_pi * cos_phi * current(1);
    out.iy = four_i_pi * sin_phi * current(1);
    out.iz = 2 * pi * current(2);
    return out;
}

/// The RadialIntegralSet for any pupil: the radial fast path for the
/// circular aperture, a direct 2D pupil average otherwise.
template <typename Scalar>
RadialIntegralSet<Scalar> phase_averages(const SeparationVector<Scalar> &l, const PupilModel<Scalar> &pupil,
                                         const QuadratureSpec<Scalar> &spec) {
    if (pupil.is_circular())
        return radial_integrals(l, spec);
    using Complex = std::complex<Scalar>;
    const Scalar pi = pi_v<Scalar>;
    const auto v = pupil_average(
        [&](const Vector2<Scalar> &u) {
            const Scalar psi = 2 * pi * (u.x() * l.x() + u.y() * l.y()) + pi * u.squaredNorm() * l.z();
            const Complex e = std::polar(Scalar(1), psi);
            Eigen::Matrix<Complex, 4, 1> r;
            r << e, (2 * pi * u.x()) * e, (2 * pi * u.y()) * e, (pi * u.squaredNorm()) * e;
            return r;
        },
        pupil, spec);
    return {v(0), v(1), v(2), v(3)};
}

} // namespace pairqfi
