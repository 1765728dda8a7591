#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace pairqfi {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using ComplexVector3 = Eigen::Matrix<std::complex<Scalar>, 3, 1>;
template <typename Scalar>
using ComplexMatrix3 = Eigen::Matrix<std::complex<Scalar>, 3, 3>;

template <typename Scalar>
inline constexpr Scalar pi_v = Scalar(3.141592653589793238462643383279502884L);

// Error hierarchy. Every numerical failure the library can report derives
// from NumericalError so callers can map it to one exit status.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class DomainError : public Error {
  public:
    using Error::Error;
};

class NumericalError : public Error {
  public:
    using Error::Error;
};

class QuadratureError : public NumericalError {
  public:
    QuadratureError(const std::string &what, double previous, double last)
        : NumericalError(what), previous_(previous), last_(last) {}
    double previous_estimate() const { return previous_; }
    double last_estimate() const { return last_; }

  private:
    double previous_;
    double last_;
};

class OverlapVanishesError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

class DegenerateSpectrumError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

class SingularMatrixError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

class ResolutionError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

class FormatError : public Error {
  public:
    using Error::Error;
};

/// Dimensionless 3D separation (l_x, l_y, l_z) in diffraction units.
template <typename Scalar>
struct SeparationVector {
    Vector3<Scalar> coords = Vector3<Scalar>::Zero();

    SeparationVector() = default;
    SeparationVector(Scalar lx, Scalar ly, Scalar lz) : coords(lx, ly, lz) {
        if (!coords.allFinite())
            throw DomainError("separation components must be finite");
    }
    explicit SeparationVector(const Vector3<Scalar> &v)
        : SeparationVector(v.x(), v.y(), v.z()) {}

    Scalar x() const { return coords.x(); }
    Scalar y() const { return coords.y(); }
    Scalar z() const { return coords.z(); }
    Scalar transverse_norm() const { return std::hypot(x(), y()); }
    // Polar angle of (l_x, l_y); zero when the transverse part vanishes.
    Scalar azimuth() const { return std::atan2(y(), x()); }

    SeparationVector scaled(Scalar factor) const {
        return SeparationVector(Vector3<Scalar>(factor * coords));
    }
    SeparationVector rotated_about_z(Scalar theta) const {
        const Scalar c = std::cos(theta), s = std::sin(theta);
        return {c * x() - s * y(), s * x() + c * y(), z()};
    }
    SeparationVector shifted(int axis, Scalar step) const {
        Vector3<Scalar> v = coords;
        v(axis) += step;
        return SeparationVector(v);
    }
};

/// Photon emission probabilities of the two sources; dp = p_plus - p_minus.
template <typename Scalar>
class BrightnessSplit {
  public:
    BrightnessSplit() = default;

    static BrightnessSplit from_probabilities(Scalar p_plus, Scalar p_minus) {
        if (!(p_plus >= 0 && p_minus >= 0 && p_plus <= 1 && p_minus <= 1) ||
            std::abs(p_plus + p_minus - 1) > Scalar(1e-12))
            throw DomainError("brightness probabilities must lie in [0,1] and sum to 1");
        return BrightnessSplit(p_plus, p_minus);
    }
    static BrightnessSplit from_dp(Scalar dp) {
        if (!(dp >= -1 && dp <= 1))
            throw DomainError("probability difference dp must lie in [-1,1]");
        return BrightnessSplit((1 + dp) / 2, (1 - dp) / 2);
    }
    // The brighter source is labelled '+', so dp = +sqrt(dp2).
    static BrightnessSplit from_dp2(Scalar dp2) {
        if (!(dp2 >= 0 && dp2 <= 1))
            throw DomainError("dp2 must lie in [0,1]");
        return from_dp(std::sqrt(dp2));
    }

    Scalar p_plus() const { return p_plus_; }
    Scalar p_minus() const { return p_minus_; }
    Scalar dp() const { return p_plus_ - p_minus_; }
    Scalar dp2() const { return dp() * dp(); }

  private:
    BrightnessSplit(Scalar p_plus, Scalar p_minus) : p_plus_(p_plus), p_minus_(p_minus) {}
    Scalar p_plus_ = Scalar(0.5);
    Scalar p_minus_ = Scalar(0.5);
};

/// Origin of the separation coordinates. Geometric center: sources at +-l
/// (half separation). Intensity centroid: sources at +p_minus r and -p_plus r
/// (full separation r).
enum class CenteringConvention { geometric_center, intensity_centroid };

inline const char *to_string(CenteringConvention c) {
    return c == CenteringConvention::geometric_center ? "geometric" : "centroid";
}

inline CenteringConvention parse_convention(const std::string &name) {
    if (name == "geometric" || name == "geometric-center")
        return CenteringConvention::geometric_center;
    if (name == "centroid" || name == "intensity-centroid")
        return CenteringConvention::intensity_centroid;
    throw DomainError("unknown centering convention '" + name + "'");
}

} // namespace pairqfi
