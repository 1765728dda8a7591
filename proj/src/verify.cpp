#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "pairqfi/oracle.hpp"
#include "pairqfi/qfi.hpp"
#include "pairqfi/sweep.hpp"
#include "pairqfi/verify.hpp"

namespace pairqfi::verify {

namespace {

using Mat = Matrix3<double>;
using Vec = Vector3<double>;
using L = SeparationVector<double>;
using B = BrightnessSplit<double>;

constexpr double pi = pi_v<double>;

const PupilModel<double> &circular() {
    static const PupilModel<double> p = PupilModel<double>::circular();
    return p;
}

CheckResult make(std::string name, double deviation, double tolerance, std::string detail = {}) {
    CheckResult r;
    r.name = std::move(name);
    r.deviation = deviation;
    r.tolerance = tolerance;
    r.passed = std::isfinite(deviation) && deviation <= tolerance;
    r.detail = std::move(detail);
    return r;
}

double max_abs(const Mat &a, const Mat &b) { return (a - b).cwiseAbs().maxCoeff(); }

double max_rel(const Mat &a, const Mat &b) { return max_abs(a, b) / b.cwiseAbs().maxCoeff(); }

class Sampler {
  public:
    Sampler(std::uint64_t seed, std::uint64_t stream) : rng_(seed ^ (stream * 0x9e3779b97f4a7c15ULL)) {}

    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }

    L box(double transverse, double axial) {
        const double x = uniform(-transverse, transverse);
        const double y = uniform(-transverse, transverse);
        return L(x, y, uniform(-axial, axial));
    }

  private:
    std::mt19937_64 rng_;
};

Mat diag_constants() {
    Mat d = Mat::Zero();
    d(0, 0) = 4 * pi * pi;
    d(1, 1) = 4 * pi * pi;
    d(2, 2) = pi * pi / 3;
    return d;
}

std::string describe_point(const L &l, double dp2) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "worst at l=(%.4f,%.4f,%.4f) dp2=%.4f", l.x(), l.y(), l.z(), dp2);
    return buf;
}

Mat centroid(const L &l, double dp2, const Options &o, const PsiMoments<double> &m) {
    return qfi_centroid_closed(l, B::from_dp2(dp2), circular(), o.quadrature, m);
}

} // namespace

const char *to_string(Suite suite) {
    switch (suite) {
    case Suite::constants:
        return "constants";
    case Suite::collapse:
        return "collapse";
    case Suite::oracle:
        return "oracle";
    case Suite::gradients:
        return "gradients";
    case Suite::symmetry:
        return "symmetry";
    }
    return "unknown";
}

Suite parse_suite(const std::string &name) {
    for (Suite s : all_suites())
        if (name == to_string(s))
            return s;
    throw DomainError("unknown suite '" + name + "' (constants, collapse, oracle, gradients, symmetry)");
}

std::vector<Suite> all_suites() {
    return {Suite::constants, Suite::collapse, Suite::oracle, Suite::gradients, Suite::symmetry};
}

CheckResult geometric_constants(const Options &o) {
    Sampler s(o.seed, 1);
    const auto moments = psi_moments(circular(), o.quadrature);
    const Mat expected = diag_constants();
    double worst = max_abs(qfi_geometric_closed(moments), expected);
    std::string where = "closed form";
    int skipped = 0;
    for (int k = 0; k < 20;) {
        const L l = s.box(3, 3);
        const double dp = s.uniform(0, 0.99);
        Mat h;
        try {
            h = qfi_coefficient_path(l, B::from_dp(dp), CenteringConvention::geometric_center, circular(),
                                     o.quadrature, moments);
        } catch (const NumericalError &) {
            ++skipped;
            continue;
        }
        ++k;
        const double d = max_abs(h, expected);
        if (d > worst) {
            worst = d;
            where = describe_point(l, dp * dp);
        }
    }
    std::string detail = where;
    if (skipped)
        detail += ", " + std::to_string(skipped) + " degenerate draws replaced";
    return make("geometric-constants", worst, 1e-7, detail);
}

CheckResult geometric_collapse(const Options &o) {
    const auto moments = psi_moments(circular(), o.quadrature);
    const Mat closed = qfi_geometric_closed(moments);
    double worst = 0;
    std::string where;
    for (double dp : {0.0, 0.5, 0.9})
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j)
                for (double lz : {0.0, 1.0, 2.0}) {
                    const L l(0.1 + 0.6 * i, 0.2 + 0.55 * j, lz);
                    const Mat h = qfi_coefficient_path(l, B::from_dp(dp), CenteringConvention::geometric_center,
                                                       circular(), o.quadrature, moments);
                    const double d = max_abs(h, closed);
                    if (d >= worst) {
                        worst = d;
                        where = describe_point(l, dp * dp);
                    }
                }
    return make("geometric-collapse", worst, 1e-7, where);
}

CheckResult centroid_equal_brightness(const Options &o) {
    const PointEvaluator evaluate(CenteringConvention::intensity_centroid, circular(), o.quadrature);
    const Vec expected(1 / (pi * pi), 1 / (pi * pi), 12 / (pi * pi));
    double worst = 0;
    std::string where;
    for (int i = 1; i <= 10; ++i)
        for (int j = 1; j <= 10; ++j)
            for (double lz : {0.0, 1.0, 2.0}) {
                const L l(0.3 * i, 0.3 * j, lz);
                const SweepRecord r = evaluate(l, 0.0);
                const double d = r.status == RecordStatus::ok ? (r.qcrb - expected).cwiseAbs().maxCoeff()
                                                              : std::numeric_limits<double>::infinity();
                if (!(d < worst)) {
                    worst = d;
                    where = describe_point(l, 0);
                }
            }
    return make("centroid-equal-brightness-qcrb", worst, 1e-8, where);
}

CheckResult convention_factor(const Options &o) {
    Sampler s(o.seed, 2);
    const auto moments = psi_moments(circular(), o.quadrature);
    double worst = 0;
    std::string where;
    for (int k = 0; k < 20; ++k) {
        const L l = s.box(3, 2);
        // Geometric side through the l-dependent coefficient route, centroid
        // side through the pupil-average form.
        Mat geometric;
        try {
            geometric = qfi_coefficient_path(l, B::from_dp(0.0), CenteringConvention::geometric_center, circular(),
                                             o.quadrature, moments);
        } catch (const NumericalError &) {
            --k;
            continue;
        }
        const Mat c = centroid(l, 0.0, o, moments);
        const double d = max_abs(geometric, 4 * c);
        if (d >= worst) {
            worst = d;
            where = describe_point(l, 0);
        }
    }
    return make("convention-factor", worst, 1e-10, where);
}

CheckResult axial_null(const Options &o) {
    const double delta = std::abs(phase_averages(L(0, 0, 2), circular(), o.quadrature).i0);
    return make("axial-null", delta, 1e-9, "l=(0,0,2)");
}

CheckResult transverse_null(const Options &o) {
    const double j11 = 3.8317059702075123156;
    const double delta = std::abs(phase_averages(L(j11 / (2 * pi), 0, 0), circular(), o.quadrature).i0);
    return make("transverse-null", delta, 1e-3, "l=(j11/(2 pi),0,0)");
}

CheckResult null_locations(const Options &o) {
    const CheckResult a = axial_null(o);
    const CheckResult t = transverse_null(o);
    // Both tolerances differ; report the deviation relative to its own tolerance.
    const double ratio = std::max(a.deviation / a.tolerance, t.deviation / t.tolerance);
    std::ostringstream detail;
    detail << "delta(0,0,2)=" << format_number(a.deviation) << " delta(j11/2pi,0,0)=" << format_number(t.deviation)
           << " (deviation is the larger ratio to its tolerance)";
    CheckResult r = make("null-locations", ratio, 1.0, detail.str());
    r.passed = a.passed && t.passed;
    return r;
}

CheckResult asymptote(const Options &o) {
    const PointEvaluator evaluate(CenteringConvention::intensity_centroid, circular(), o.quadrature);
    double worst = 0;
    std::ostringstream detail;
    for (double dp2 : {0.75, 0.95}) {
        const SweepRecord r = evaluate(L(5, 0, 0.5), dp2);
        const double target = 1 / ((1 - dp2) * pi * pi);
        const double d = std::abs(r.qcrb.x() / target - 1);
        worst = std::max(worst, std::isfinite(d) ? d : std::numeric_limits<double>::infinity());
        detail << "dp2=" << dp2 << " qcrb_x=" << format_number(r.qcrb.x()) << " target=" << format_number(target)
               << (dp2 == 0.75 ? "; " : "");
    }
    return make("asymptote", worst, 0.05, detail.str());
}

CheckResult oracle_equivalence(const Options &o) {
    Sampler s(o.seed, 3);
    const auto moments = psi_moments(circular(), o.quadrature);
    oracle::OracleOptions<double> oo;
    oo.resolution = o.oracle_resolution;
    const double dp2s[3] = {0.0, 0.75, 0.95};
    double worst = 0;
    std::string where;
    for (int k = 0; k < 50; ++k) {
        const double dp2 = dp2s[k % 3];
        const double r = s.uniform(0.05, 3);
        const double angle = s.uniform(-pi, pi);
        const L l(r * std::cos(angle), r * std::sin(angle), s.uniform(0, 2));
        const auto b = B::from_dp2(dp2);
        const Mat reference = oracle::sld_qfi(l, b, CenteringConvention::intensity_centroid, oo).information;
        const Mat closed = qfi_centroid_closed(l, b, circular(), o.quadrature, moments);
        const double d = max_rel(closed, reference);
        if (d >= worst) {
            worst = d;
            where = describe_point(l, dp2);
        }
    }
    return make("oracle-equivalence", worst, 1e-5, where);
}

CheckResult overlap_gradients(const Options &o) {
    Sampler s(o.seed, 4);
    QuadratureSpec<double> fine = o.quadrature;
    fine.tolerance = 1e-13;
    double worst = 0;
    std::string where;
    int drawn = 0;
    for (int k = 0; k < 50;) {
        const L l = s.box(3, 2);
        ++drawn;
        if (!(std::abs(phase_averages(l, circular(), fine).i0) > 1e-3))
            continue;
        ++k;
        const auto analytic = overlap_data(l, circular(), o.quadrature);
        const auto [fd_delta, fd_phi] = oracle::finite_diff_overlap(l, circular(), o.gradient_step, fine);
        Eigen::Matrix<double, 6, 1> an, fd;
        an << analytic.d_delta, analytic.d_phi;
        fd << fd_delta, fd_phi;
        const double d = (fd - an).cwiseAbs().maxCoeff() / an.cwiseAbs().maxCoeff();
        if (d >= worst) {
            worst = d;
            where = describe_point(l, 0);
        }
    }
    return make("overlap-gradients", worst, 1e-5,
                where + ", " + std::to_string(drawn - 50) + " draws with delta <= 1e-3 replaced");
}

CheckResult exchange_symmetry(const Options &o) {
    Sampler s(o.seed, 5);
    const auto moments = psi_moments(circular(), o.quadrature);
    Mat swap = Mat::Zero();
    swap(0, 1) = swap(1, 0) = swap(2, 2) = 1;
    double worst = 0;
    std::string where;
    for (int k = 0; k < 20; ++k) {
        const L l = s.box(3, 2);
        const double dp2 = s.uniform(0, 0.95);
        const Mat h = centroid(l, dp2, o, moments);
        const Mat swapped = centroid(L(l.y(), l.x(), l.z()), dp2, o, moments);
        const double d = max_abs(swapped, swap * h * swap);
        if (d >= worst) {
            worst = d;
            where = describe_point(l, dp2);
        }
    }
    return make("exchange-symmetry", worst, 1e-9, where);
}

CheckResult rotation_covariance(const Options &o) {
    Sampler s(o.seed, 6);
    const auto moments = psi_moments(circular(), o.quadrature);
    double worst = 0;
    std::string where;
    for (int k = 0; k < 20; ++k) {
        const L l = s.box(3, 2);
        const double dp2 = s.uniform(0, 0.95);
        const double angle = s.uniform(-pi, pi);
        Mat rot = Mat::Identity();
        rot(0, 0) = rot(1, 1) = std::cos(angle);
        rot(1, 0) = std::sin(angle);
        rot(0, 1) = -rot(1, 0);
        const Mat h = centroid(l, dp2, o, moments);
        const Mat rotated = centroid(l.rotated_about_z(angle), dp2, o, moments);
        const double d = max_abs(rotated, rot * h * rot.transpose());
        if (d >= worst) {
            worst = d;
            where = describe_point(l, dp2);
        }
    }
    return make("rotation-covariance", worst, 1e-9, where);
}

CheckResult axial_sign_symmetry(const Options &o) {
    Sampler s(o.seed, 7);
    const auto moments = psi_moments(circular(), o.quadrature);
    Mat flip = Mat::Identity();
    flip(0, 0) = flip(1, 1) = -1;
    double worst = 0;
    std::string where;
    for (int k = 0; k < 20; ++k) {
        const L l = s.box(3, 2);
        const double dp2 = s.uniform(0, 0.95);
        const Mat h = centroid(l, dp2, o, moments);
        const Mat mirrored = centroid(L(l.x(), l.y(), -l.z()), dp2, o, moments);
        const double d = max_abs(mirrored, flip * h * flip);
        if (d >= worst) {
            worst = d;
            where = describe_point(l, dp2);
        }
    }
    return make("axial-sign-symmetry", worst, 1e-9, where);
}

std::vector<CheckResult> run_suite(Suite suite, const Options &options) {
    switch (suite) {
    case Suite::constants:
        return {geometric_constants(options), centroid_equal_brightness(options), convention_factor(options),
                axial_null(options),          transverse_null(options),          asymptote(options)};
    case Suite::collapse:
        return {geometric_collapse(options)};
    case Suite::oracle:
        return {oracle_equivalence(options)};
    case Suite::gradients:
        return {overlap_gradients(options)};
    case Suite::symmetry:
        return {exchange_symmetry(options), rotation_covariance(options), axial_sign_symmetry(options)};
    }
    return {};
}

std::string format_line(const CheckResult &c) {
    char buf[96];
    std::snprintf(buf, sizeof buf, " deviation=%.3e tolerance=%.1e", c.deviation, c.tolerance);
    std::string line = std::string(c.passed ? "PASS " : "FAIL ") + c.name + buf;
    if (!c.detail.empty())
        line += "  (" + c.detail + ")";
    return line;
}

std::string summary_json(const std::vector<std::pair<Suite, std::vector<CheckResult>>> &runs) {
    nlohmann::json out;
    out["suites"] = nlohmann::json::array();
    bool all = true;
    for (const auto &[suite, checks] : runs) {
        nlohmann::json js;
        js["suite"] = to_string(suite);
        js["checks"] = nlohmann::json::array();
        bool passed = true;
        for (const auto &c : checks) {
            js["checks"].push_back({{"name", c.name},
                                    {"passed", c.passed},
                                    {"deviation", std::isfinite(c.deviation) ? nlohmann::json(c.deviation) : nullptr},
                                    {"tolerance", c.tolerance},
                                    {"detail", c.detail}});
            passed = passed && c.passed;
        }
        js["passed"] = passed;
        all = all && passed;
        out["suites"].push_back(js);
    }
    out["passed"] = all;
    return out.dump(2);
}

} // namespace pairqfi::verify
