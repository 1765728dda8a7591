#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pairqfi/quadrature.hpp"

namespace pairqfi::verify {

struct CheckResult {
    std::string name;
    double deviation = 0;
    double tolerance = 0;
    bool passed = false;
    std::string detail;
};

enum class Suite { constants, collapse, oracle, gradients, symmetry };

const char *to_string(Suite suite);
Suite parse_suite(const std::string &name);
std::vector<Suite> all_suites();

struct Options {
    std::uint64_t seed = 0x5eed2024;
    QuadratureSpec<double> quadrature{};
    int oracle_resolution = 256;
    double gradient_step = 1e-5;
};

// Individual checks. Each draws its own random points from `options.seed`,
// so results do not depend on which other checks ran.
CheckResult geometric_constants(const Options &options);
CheckResult geometric_collapse(const Options &options);
CheckResult centroid_equal_brightness(const Options &options);
CheckResult convention_factor(const Options &options);
CheckResult axial_null(const Options &options);
CheckResult transverse_null(const Options &options);
// Both nulls combined; deviation is the larger ratio to its own tolerance.
CheckResult null_locations(const Options &options);
CheckResult asymptote(const Options &options);
CheckResult oracle_equivalence(const Options &options);
CheckResult overlap_gradients(const Options &options);
CheckResult exchange_symmetry(const Options &options);
CheckResult rotation_covariance(const Options &options);
CheckResult axial_sign_symmetry(const Options &options);

std::vector<CheckResult> run_suite(Suite suite, const Options &options = {});

/// "PASS <name> deviation=<d> tolerance=<t>" (FAIL on failure), plus the
/// detail text when present.
std::string format_line(const CheckResult &check);

/// JSON summary of one or more suite runs.
std::string summary_json(const std::vector<std::pair<Suite, std::vector<CheckResult>>> &runs);

} // namespace pairqfi::verify
