#pragma once

// QFI matrices for the two centering conventions and their inversion to
// quantum Cramer-Rao bounds.

#include <cmath>
#include <complex>
#include <limits>

#include <Eigen/Eigenvalues>

#include "pairqfi/overlap.hpp"
#include "pairqfi/quadrature.hpp"
#include "pairqfi/types.hpp"

namespace pairqfi {

/// Nonzero eigenvalues e_+- of rho = p+ |K+><K+| + p- |K-><K-| and the
/// expansion |e_+-> = alpha_+- |K+> + beta_+- |K->.
///
/// When e_- = 0 (pure state) the minus eigenvector is not in the range of
/// rho; alpha_minus and beta_minus are then NaN and rank_one() is true.
template <typename Scalar>
struct EigenStructure {
    Scalar e_plus;
    Scalar e_minus;
    Scalar de;
    Scalar alpha_plus;
    Scalar alpha_minus;
    Scalar beta_plus;
    Scalar beta_minus;

    bool rank_one() const { return !(e_minus > 0) || std::isnan(alpha_minus); }
    Scalar alpha(int sign) const { return sign > 0 ? alpha_plus : alpha_minus; }
    Scalar beta(int sign) const { return sign > 0 ? beta_plus : beta_minus; }
    Scalar e(int sign) const { return sign > 0 ? e_plus : e_minus; }
};

template <typename Scalar>
inline constexpr Scalar degenerate_spectrum_threshold = Scalar(1e-9);

template <typename Scalar>
EigenStructure<Scalar> eigen_structure(Scalar delta, const BrightnessSplit<Scalar> &brightness) {
    if (!(delta >= 0 && delta <= 1 + Scalar(1e-12)))
        throw DomainError("overlap must lie in [0,1]");
    delta = std::min(delta, Scalar(1));
    const Scalar dp = brightness.dp();
    const Scalar dp2 = dp * dp;
    const Scalar de = std::sqrt(dp2 + delta * delta * (1 - dp2));
    if (de < degenerate_spectrum_threshold<Scalar>)
        throw DegenerateSpectrumError("degenerate spectrum: e+ - e- < 1e-9 (equal brightness at an overlap null)");

    EigenStructure<Scalar> s;
    s.de = de;
    s.e_plus = (1 + de) / 2;
    s.e_minus = (1 - de) / 2;
    const Scalar pp = brightness.p_plus(), pm = brightness.p_minus();
    s.alpha_plus = std::sqrt(pp * (de + dp) / (de * (1 + de)));
    s.beta_plus = std::sqrt(pm * (de - dp) / (de * (1 + de)));
    if (1 - de > std::numeric_limits<Scalar>::epsilon()) {
        s.alpha_minus = std::sqrt(std::max(Scalar(0), pp * (de - dp)) / (de * (1 - de)));
        s.beta_minus = -std::sqrt(std::max(Scalar(0), pm * (de + dp)) / (de * (1 - de)));
    } else {
        s.e_minus = 0;
        s.alpha_minus = s.beta_minus = std::numeric_limits<Scalar>::quiet_NaN();
    }
    return s;
}

/// Multipliers of the four state matrix elements in the coefficient form
///   H = product * <K+|d_mu|K+><K+|d_nu|K+>
///     + derivative * d_mu<K+|d_nu|K+>
///     + cross * Re d_mu<K+|d_nu|K->
///     + overlap_gradient * d_mu Delta d_nu Delta.
template <typename Scalar>
struct CoefficientSet {
    Scalar product;
    Scalar derivative;
    Scalar cross;
    Scalar overlap_gradient;
};

/// Assemble the multipliers from the g/h coefficient tables.
///
/// Two entries differ from the literal tables: the geometric h4 carries the
/// factor 1/4 that follows from <K-+|d_mu|K+-> = d_mu Delta / 2, and the
/// eigenvalue-derivative term -3 Delta^2 (1-dp^2)^2 / (de^2 (1-de^2)) enters
/// with unit weight. Both were re-derived symbolically and checked against
/// the brute-force oracle.
template <typename Scalar>
CoefficientSet<Scalar> coefficient_set(const EigenStructure<Scalar> &s, Scalar delta,
                                       const BrightnessSplit<Scalar> &brightness, CenteringConvention convention) {
    if (s.rank_one())
        throw DegenerateSpectrumError("rank-one state (e- = 0): coefficient path undefined, use the closed form");
    const Scalar pp = brightness.p_plus(), pm = brightness.p_minus();
    const Scalar dp2 = brightness.dp2();
    const Scalar D = delta;
    const Scalar ap = s.alpha_plus, am = s.alpha_minus, bp = s.beta_plus, bm = s.beta_minus;

    Scalar g1, g2;
    Scalar h1[2], h2[2], h3[2], h4[2];
    for (int k = 0; k < 2; ++k) {
        const int sign = k == 0 ? 1 : -1;
        const Scalar a = s.alpha(sign), b = s.beta(sign);
        h3[k] = 2 * pp * pm * (a + b * D) * (a * D + b);
        if (convention == CenteringConvention::geometric_center) {
            h1[k] = pp * pp * a * a + pm * pm * b * b + 2 * a * b * D * (pp * pp + pm * pm + pp * pm);
            h2[k] = pp * pp * (a + b * D) * (a + b * D) + pm * pm * (a * D + b) * (a * D + b);
            h4[k] = (pm * pm * a * a + pp * pp * b * b + 2 * pp * pm * (1 + a * b * D)) / 4;
        } else {
            h1[k] = pp * pp * (1 + 4 * a * b * D);
            h2[k] = pp * pp * (1 + D) * (1 + D) * (a + b) * (a + b);
            h4[k] = 3 * pp * pp * pm * pm;
        }
    }
    const Scalar minor = am * bp - ap * bm;
    const Scalar major = am * bp + ap * bm;
    if (convention == CenteringConvention::geometric_center) {
        g1 = -minor * minor * D * D;
        const Scalar t = major + 2 * D * (pp * bp * bm + pm * ap * am);
        g2 = t * t / 4;
    } else {
        g1 = -4 * pp * pp * minor * minor * D * D;
        const Scalar t = major + D * (bp * bm + ap * am);
        g2 = 4 * pp * pp * pm * pm * t * t;
    }

    const Scalar ep = s.e_plus, em = s.e_minus;
    const Scalar k = 1 / (ep * em) - 1;
    const Scalar eigen_term = 3 * D * D * (1 - dp2) * (1 - dp2) / (s.de * s.de * (1 - s.de * s.de));
    CoefficientSet<Scalar> c;
    c.product = 4 * (h1[0] / ep + h1[1] / em - g1 * k);
    c.derivative = 4 * (h2[0] / ep + h2[1] / em);
    c.cross = 4 * (h3[0] / ep + h3[1] / em);
    c.overlap_gradient = 4 * (h4[0] / ep + h4[1] / em - g2 * k) - eigen_term;
    return c;
}

/// The four single-source matrix elements entering the coefficient form,
/// built from pupil averages.
template <typename Scalar>
struct StateMatrixElements {
    // <K+|d_mu|K+>, purely imaginary
    ComplexVector3<Scalar> first;
    // d_mu<K+|d_nu|K+>, real
    Matrix3<Scalar> second;
    // Re d_mu<K+|d_nu|K->
    Matrix3<Scalar> cross;
    Vector3<Scalar> d_delta;
    Scalar delta;
};

template <typename Scalar>
StateMatrixElements<Scalar> state_matrix_elements(const SeparationVector<Scalar> &l,
                                                  const BrightnessSplit<Scalar> &brightness,
                                                  CenteringConvention convention, const PupilModel<Scalar> &pupil,
                                                  const QuadratureSpec<Scalar> &spec, const PsiMoments<Scalar> &moments) {
    using Complex = std::complex<Scalar>;
    const bool geometric = convention == CenteringConvention::geometric_center;
    // Phases of the two states add up to `total` * Psi(u; l).
    const Scalar total = geometric ? Scalar(2) : Scalar(1);
    const OverlapData<Scalar> ov = overlap_data(l.scaled(total), pupil, spec);
    // Overlap phase phi enters the states as phi_state = ov.phi / total.
    const Scalar phase = ov.phi;
    const Vector3<Scalar> dphi = ov.d_phi;
    // Phase multiplier of K+: Psi(u; l) enters as -a Psi.
    const Scalar a = geometric ? Scalar(1) : brightness.p_minus();

    StateMatrixElements<Scalar> m;
    m.delta = ov.delta;
    m.d_delta = total * ov.d_delta;
    const Vector3<Scalar> shift = dphi - moments.m1;
    m.first = Complex(0, a) * shift.template cast<Complex>();
    m.second = a * a * (moments.covariance() + shift * shift.transpose());

    const ComplexMatrix3<Scalar> weighted = pupil_average(
        [&](const Vector2<Scalar> &u) {
            const Vector3<Scalar> g = dphi - phase_gradient(u);
            const Complex e = std::polar(Scalar(1), total * phase_function(u, l));
            return ComplexMatrix3<Scalar>((g * g.transpose()).template cast<Complex>() * e);
        },
        pupil, spec);
    const Scalar pair = geometric ? Scalar(1) : brightness.p_plus() * brightness.p_minus();
    const Complex rotate = std::polar(Scalar(1), -phase);
    m.cross = (-pair * rotate * weighted).real();
    return m;
}

/// QFI from the coefficient tables combined with the state matrix elements.
/// Cross-validation path; refuses nearly degenerate or rank-one spectra.
template <typename Scalar>
Matrix3<Scalar> qfi_coefficient_path(const SeparationVector<Scalar> &l, const BrightnessSplit<Scalar> &brightness,
                                     CenteringConvention convention, const PupilModel<Scalar> &pupil,
                                     const QuadratureSpec<Scalar> &spec, const PsiMoments<Scalar> &moments) {
    const auto m = state_matrix_elements(l, brightness, convention, pupil, spec, moments);
    const auto s = eigen_structure(m.delta, brightness);
    const auto c = coefficient_set(s, m.delta, brightness, convention);
    const Matrix3<Scalar> first_product = (m.first * m.first.transpose()).real();
    Matrix3<Scalar> h = c.product * first_product + c.derivative * m.second + c.cross * m.cross +
                        c.overlap_gradient * m.d_delta * m.d_delta.transpose();
    return (h + h.transpose()) / 2;
}

template <typename Scalar>
Matrix3<Scalar> qfi_coefficient_path(const SeparationVector<Scalar> &l, const BrightnessSplit<Scalar> &brightness,
                                     CenteringConvention convention, const PupilModel<Scalar> &pupil,
                                     const QuadratureSpec<Scalar> &spec) {
    return qfi_coefficient_path(l, brightness, convention, pupil, spec, psi_moments(pupil, spec));
}

/// Geometric-center QFI: H = 4 (m2 - m1 m1^T), independent of l and dp.
template <typename Scalar>
Matrix3<Scalar> qfi_geometric_closed(const PsiMoments<Scalar> &moments) {
    return 4 * moments.covariance();
}

template <typename Scalar>
Matrix3<Scalar> qfi_geometric_closed(const PupilModel<Scalar> &pupil, const QuadratureSpec<Scalar> &spec) {
    return qfi_geometric_closed(psi_moments(pupil, spec));
}

template <typename Scalar>
inline constexpr Scalar small_separation_threshold = Scalar(1e-8);

template <typename Scalar>
struct CentroidEvaluation {
    Matrix3<Scalar> information;
    Scalar delta;
    Scalar phi;
    // 1 - Delta^2 fell below 1e-8 and the Delta^2/(1-Delta^2) term was dropped.
    bool small_separation_limit = false;
};

/// Intensity-centroid QFI in pupil-average form:
///   H = (1-dp^2) C - dp^2 (1-dp^2) [ Delta^2/(1-Delta^2) (m1 - d phi)(m1 - d phi)^T
///                                    + d Delta d Delta^T ],
/// with C = m2 - m1 m1^T.
template <typename Scalar>
CentroidEvaluation<Scalar> evaluate_centroid_qfi(const SeparationVector<Scalar> &l,
                                                 const BrightnessSplit<Scalar> &brightness,
                                                 const PupilModel<Scalar> &pupil, const QuadratureSpec<Scalar> &spec,
                                                 const PsiMoments<Scalar> &moments) {
    const Scalar dp2 = brightness.dp2();
    const auto avg = phase_averages(l, pupil, spec);
    CentroidEvaluation<Scalar> out;
    out.delta = std::min(std::abs(avg.i0), Scalar(1));
    out.phi = std::arg(avg.i0);
    out.information = (1 - dp2) * moments.covariance();
    if (dp2 == 0)
        return out;

    const OverlapData<Scalar> ov = overlap_from_averages(avg);
    const Scalar one_minus = 1 - ov.delta * ov.delta;
    Matrix3<Scalar> bracket = ov.d_delta * ov.d_delta.transpose();
    if (one_minus < small_separation_threshold<Scalar>) {
        out.small_separation_limit = true;
    } else {
        const Vector3<Scalar> a = moments.m1 - ov.d_phi;
        bracket += (ov.delta * ov.delta / one_minus) * a * a.transpose();
    }
    out.information -= dp2 * (1 - dp2) * bracket;
    out.information = ((out.information + out.information.transpose()) / 2).eval();
    return out;
}

template <typename Scalar>
Matrix3<Scalar> qfi_centroid_closed(const SeparationVector<Scalar> &l, const BrightnessSplit<Scalar> &brightness,
                                    const PupilModel<Scalar> &pupil, const QuadratureSpec<Scalar> &spec,
                                    const PsiMoments<Scalar> &moments) {
    return evaluate_centroid_qfi(l, brightness, pupil, spec, moments).information;
}

template <typename Scalar>
Matrix3<Scalar> qfi_centroid_closed(const SeparationVector<Scalar> &l, const BrightnessSplit<Scalar> &brightness,
                                    const PupilModel<Scalar> &pupil, const QuadratureSpec<Scalar> &spec) {
    return qfi_centroid_closed(l, brightness, pupil, spec, psi_moments(pupil, spec));
}

/// Centroid QFI with the overall 4 p+/p- prefactor applied uniformly to all
/// bracketed terms, including d Delta d Delta^T. This is the form obtained by
/// reading the prefactored expression literally. It agrees with the true QFI
/// only at dp = 0: the oracle shows the d Delta d Delta^T term is then
/// over-weighted by 4 p+/p-. Kept for comparison; do not use for results.
template <typename Scalar>
Matrix3<Scalar> qfi_centroid_uniform_prefactor(const SeparationVector<Scalar> &l,
                                               const BrightnessSplit<Scalar> &brightness,
                                               const PupilModel<Scalar> &pupil, const QuadratureSpec<Scalar> &spec,
                                               const PsiMoments<Scalar> &moments) {
    const Scalar dp2 = brightness.dp2();
    const auto ov = overlap_data(l, pupil, spec);
    const Scalar prefactor = 4 * brightness.p_plus() / brightness.p_minus();
    const Scalar pm = brightness.p_minus();
    const Vector3<Scalar> a = moments.m1 - ov.d_phi;
    const Scalar d2 = ov.delta * ov.delta;
    // <K+|d|K+><K+|d|K+> = -pm^2 a a^T,  d<K+|d|K+> = pm^2 (C + a a^T)
    const Matrix3<Scalar> aa = a * a.transpose();
    Matrix3<Scalar> h = prefactor * ((1 + d2 * dp2 / (1 - d2)) * (-pm * pm * aa) + pm * pm * (moments.covariance() + aa) -
                                     dp2 * (1 - dp2) * ov.d_delta * ov.d_delta.transpose());
    return (h + h.transpose()) / 2;
}

/// Diagonal of the inverse information matrix.
template <typename Scalar>
struct QcrbVector {
    Vector3<Scalar> bounds;
    // lambda_max / lambda_min of the information matrix
    Scalar condition;

    Scalar x() const { return bounds.x(); }
    Scalar y() const { return bounds.y(); }
    Scalar z() const { return bounds.z(); }
};

/// Invert a symmetric 3x3 information matrix by the adjugate formula.
///
/// The matrix counts as singular when its smallest eigenvalue is not above
/// 1e-12 times the largest, or when the largest does not exceed
/// `min_information` (an absolute floor, zero by default).
template <typename Scalar>
QcrbVector<Scalar> qcrb_from_qfi(const Matrix3<Scalar> &h, Scalar min_information = 0) {
    if (!h.allFinite())
        throw SingularMatrixError("singular information matrix: non-finite entries");
    const Matrix3<Scalar> sym = (h + h.transpose()) / 2;
    Eigen::SelfAdjointEigenSolver<Matrix3<Scalar>> solver(sym, Eigen::EigenvaluesOnly);
    const Scalar lo = solver.eigenvalues()(0);
    const Scalar hi = solver.eigenvalues()(2);
    if (!(hi > min_information) || !(lo > Scalar(1e-12) * hi))
        throw SingularMatrixError("singular information matrix");

    const auto &m = sym;
    const Scalar c00 = m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
    const Scalar c11 = m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0);
    const Scalar c22 = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    const Scalar c01 = m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0);
    const Scalar c02 = m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0);
    const Scalar det = m(0, 0) * c00 - m(0, 1) * c01 + m(0, 2) * c02;
    QcrbVector<Scalar> q;
    q.bounds = Vector3<Scalar>(c00, c11, c22) / det;
    q.condition = hi / lo;
    return q;
}

/// Brightness ratio (1 + dp) / (1 - dp) for dp = sqrt(dp2).
template <typename Scalar>
Scalar dp2_to_brightness_ratio(Scalar dp2) {
    if (!(dp2 >= 0 && dp2 < 1))
        throw DomainError("dp2 must lie in [0,1)");
    const Scalar dp = std::sqrt(dp2);
    return (1 + dp) / (1 - dp);
}

template <typename Scalar>
bool is_symmetric_psd(const Matrix3<Scalar> &h, Scalar symmetry_tol = Scalar(1e-12), Scalar eigen_floor = Scalar(-1e-9)) {
    if (!h.allFinite())
        return false;
    if ((h - h.transpose()).cwiseAbs().maxCoeff() > symmetry_tol * std::max(Scalar(1), h.cwiseAbs().maxCoeff()))
        return false;
    Eigen::SelfAdjointEigenSolver<Matrix3<Scalar>> solver(h, Eigen::EigenvaluesOnly);
    return solver.eigenvalues()(0) >= eigen_floor;
}

} // namespace pairqfi
