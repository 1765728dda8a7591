#pragma once

// Phase function, state overlap and its separation derivatives.

#include <cmath>
#include <complex>

#include "pairqfi/quadrature.hpp"
#include "pairqfi/types.hpp"

namespace pairqfi {

/// Psi(u; l) = 2 pi u.l_perp + pi |u|^2 l_z
template <typename Scalar>
Scalar phase_function(const Vector2<Scalar> &u, const SeparationVector<Scalar> &l) {
    const Scalar pi = pi_v<Scalar>;
    return 2 * pi * (u.x() * l.x() + u.y() * l.y()) + pi * u.squaredNorm() * l.z();
}

/// d Psi / d l_mu. Psi is linear in l, so this does not depend on l.
template <typename Scalar>
Vector3<Scalar> phase_gradient(const Vector2<Scalar> &u) {
    const Scalar pi = pi_v<Scalar>;
    return {2 * pi * u.x(), 2 * pi * u.y(), pi * u.squaredNorm()};
}

template <typename Scalar>
struct PhysicalScales {
    Scalar wavelength;
    Scalar pupil_size;
    Scalar image_distance;
    // Not used by the conversion, which is image-side in both axes.
    Scalar object_distance;

    void validate() const {
        if (!(wavelength > 0 && pupil_size > 0 && image_distance > 0 && object_distance > 0))
            throw DomainError("physical scales must all be positive");
    }
    Scalar transverse_unit() const { return wavelength * image_distance / pupil_size; }
    Scalar axial_unit() const {
        return wavelength * image_distance * image_distance / (pupil_size * pupil_size);
    }
};

/// Physical separation (x, y, z) to diffraction units:
/// (l_x, l_y) = (x, y) R / (lambda z_I),  l_z = z R^2 / (lambda z_I^2).
template <typename Scalar>
SeparationVector<Scalar> to_dimensionless(const Vector3<Scalar> &physical, const PhysicalScales<Scalar> &scales) {
    scales.validate();
    return {physical.x() / scales.transverse_unit(), physical.y() / scales.transverse_unit(),
            physical.z() / scales.axial_unit()};
}

/// Delta = |<e^{i Psi}>|, phi = arg <e^{i Psi}> and their l-derivatives.
template <typename Scalar>
struct OverlapData {
    Scalar delta = 1;
    Scalar phi = 0;
    Vector3<Scalar> d_delta = Vector3<Scalar>::Zero();
    Vector3<Scalar> d_phi = Vector3<Scalar>::Zero();
};

template <typename Scalar>
inline constexpr Scalar overlap_null_threshold = Scalar(1e-13);

/// Overlap data from precomputed pupil averages:
///   d_mu Delta = -Delta Im(I_mu / I_0),  d_mu phi = Re(I_mu / I_0).
template <typename Scalar>
OverlapData<Scalar> overlap_from_averages(const RadialIntegralSet<Scalar> &avg) {
    const Scalar magnitude = std::abs(avg.i0);
    if (magnitude < overlap_null_threshold<Scalar>)
        throw OverlapVanishesError("overlap vanishes (|<exp(i Psi)>| < 1e-13); phase derivatives undefined");
    const ComplexVector3<Scalar> ratio = avg.derivative_averages() / avg.i0;
    OverlapData<Scalar> out;
    out.delta = magnitude;
    out.phi = std::arg(avg.i0);
    out.d_delta = -magnitude * ratio.imag();
    out.d_phi = ratio.real();
    return out;
}

template <typename Scalar>
OverlapData<Scalar> overlap_data(const SeparationVector<Scalar> &l, const PupilModel<Scalar> &pupil,
                                 const QuadratureSpec<Scalar> &spec) {
    return overlap_from_averages(phase_averages(l, pupil, spec));
}

/// First and second moments of the phase gradient over the pupil:
/// m1 = <d Psi>, m2 = <d Psi d Psi^T>.
template <typename Scalar>
struct PsiMoments {
    Vector3<Scalar> m1 = Vector3<Scalar>::Zero();
    Matrix3<Scalar> m2 = Matrix3<Scalar>::Zero();

    Matrix3<Scalar> covariance() const { return m2 - m1 * m1.transpose(); }
};

template <typename Scalar>
PsiMoments<Scalar> psi_moments(const PupilModel<Scalar> &pupil, const QuadratureSpec<Scalar> &spec) {
    using Stacked = Eigen::Matrix<Scalar, 3, 4>;
    const Stacked s = pupil_average(
        [](const Vector2<Scalar> &u) {
            const Vector3<Scalar> g = phase_gradient(u);
            Stacked r;
            r.col(0) = g;
            r.template rightCols<3>() = g * g.transpose();
            return r;
        },
        pupil, spec);
    PsiMoments<Scalar> m;
    m.m1 = s.col(0);
    m.m2 = s.template rightCols<3>();
    m.m2 = (m.m2 + m.m2.transpose()).eval() / 2;
    return m;
}

} // namespace pairqfi
