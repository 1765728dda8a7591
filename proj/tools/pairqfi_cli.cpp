#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "pairqfi/sweep.hpp"
#include "pairqfi/verify.hpp"

namespace {

enum ExitCode { exit_ok = 0, exit_usage = 1, exit_numerical = 2, exit_io = 3 };

using namespace pairqfi;

struct PointArgs {
    double lx = 0, ly = 0, lz = 0, dp2 = 0;
    std::string convention = "centroid";
    std::string pupil;
    bool json = false;
};

struct SweepArgs {
    std::string config;
    std::string dp2, lz, grid, convention, out, format, pupil;
    int threads = -1;
    double tolerance = 0;
    bool resume = false;
};

struct VerifyArgs {
    std::string suite = "all";
    std::string report;
    std::uint64_t seed = verify::Options{}.seed;
};

int run_point_command(const PointArgs &a) {
    const auto pupil = a.pupil.empty() ? PupilModel<double>::circular() : load_pupil_grid(a.pupil);
    if (!(a.dp2 >= 0 && a.dp2 < 1))
        throw DomainError("dp2 must lie in [0,1)");
    const SweepRecord r =
        run_point(SeparationVector<double>(a.lx, a.ly, a.lz), a.dp2, parse_convention(a.convention), {}, pupil);
    if (a.json) {
        std::cout << format_jsonl(r) << '\n';
        return exit_ok;
    }
    std::cout << "status  " << to_string(r.status) << '\n'
              << "delta   " << format_number(r.delta) << '\n'
              << "phi     " << format_number(r.phi) << '\n'
              << "H       " << format_number(r.information(0, 0)) << ' ' << format_number(r.information(0, 1)) << ' '
              << format_number(r.information(0, 2)) << '\n'
              << "        " << format_number(r.information(1, 0)) << ' ' << format_number(r.information(1, 1)) << ' '
              << format_number(r.information(1, 2)) << '\n'
              << "        " << format_number(r.information(2, 0)) << ' ' << format_number(r.information(2, 1)) << ' '
              << format_number(r.information(2, 2)) << '\n'
              << "qcrb    " << format_number(r.qcrb.x()) << ' ' << format_number(r.qcrb.y()) << ' '
              << format_number(r.qcrb.z()) << '\n';
    return exit_ok;
}

int run_sweep_command(const SweepArgs &a) {
    SweepConfig c = a.config.empty() ? SweepConfig{} : load_config_file(a.config);
    if (!a.dp2.empty())
        c.dp2 = parse_list(a.dp2);
    if (!a.lz.empty())
        c.lz = parse_list(a.lz);
    if (!a.grid.empty())
        c.grid = GridSpec::parse(a.grid);
    if (!a.convention.empty())
        c.convention = parse_convention(a.convention);
    if (!a.out.empty())
        c.output_path = a.out;
    if (!a.pupil.empty())
        c.pupil_path = a.pupil;
    if (a.format == "csv")
        c.format = OutputFormat::csv;
    else if (a.format == "jsonl")
        c.format = OutputFormat::jsonl;
    if (a.threads >= 0)
        c.threads = a.threads;
    if (a.tolerance > 0)
        c.quadrature.tolerance = a.tolerance;
    if (c.output_path.empty())
        throw DomainError("sweep needs an output path (--out or 'out =' in the config)");
    c.validate();
    const std::size_t written = run_sweep_to_file(c, a.resume);
    std::cerr << "wrote " << written << " of " << c.record_count() << " records to " << c.output_path << '\n';
    return exit_ok;
}

int run_verify_command(const VerifyArgs &a) {
    verify::Options options;
    options.seed = a.seed;
    const std::vector<verify::Suite> suites =
        a.suite == "all" ? verify::all_suites() : std::vector<verify::Suite>{verify::parse_suite(a.suite)};
    std::vector<std::pair<verify::Suite, std::vector<verify::CheckResult>>> runs;
    bool ok = true;
    for (verify::Suite s : suites) {
        auto checks = verify::run_suite(s, options);
        for (const auto &c : checks) {
            std::cout << verify::format_line(c) << '\n';
            ok = ok && c.passed;
        }
        runs.emplace_back(s, std::move(checks));
    }
    if (!a.report.empty()) {
        std::ofstream out(a.report);
        out << verify::summary_json(runs) << '\n';
        if (!out)
            throw IoError("cannot write report '" + a.report + "'");
    }
    return ok ? exit_ok : exit_numerical;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"QFI and quantum Cramer-Rao bounds for two incoherent point sources in 3D"};
    app.require_subcommand(1);

    PointArgs point;
    auto *pc = app.add_subcommand("point", "evaluate a single separation");
    pc->add_option("--lx", point.lx, "transverse separation x")->required();
    pc->add_option("--ly", point.ly, "transverse separation y")->required();
    pc->add_option("--lz", point.lz, "axial separation")->required();
    pc->add_option("--dp2", point.dp2, "squared brightness difference, in [0,1)")->required();
    pc->add_option("--convention", point.convention, "geometric or centroid")
        ->check(CLI::IsMember({"geometric", "centroid"}));
    pc->add_option("--pupil", point.pupil, "sampled pupil grid file");
    pc->add_flag("--json", point.json, "print one JSON object");

    SweepArgs sweep;
    auto *sc = app.add_subcommand("sweep", "grid sweep to CSV or JSON lines");
    sc->add_option("--config", sweep.config, "key = value config file");
    sc->add_option("--dp2", sweep.dp2, "comma-separated dp2 values");
    sc->add_option("--lz", sweep.lz, "comma-separated l_z values");
    sc->add_option("--grid", sweep.grid, "transverse grid min:step:max");
    sc->add_option("--convention", sweep.convention, "geometric or centroid")
        ->check(CLI::IsMember({"geometric", "centroid"}));
    sc->add_option("--out", sweep.out, "output file");
    sc->add_option("--format", sweep.format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
    sc->add_option("--pupil", sweep.pupil, "sampled pupil grid file");
    sc->add_option("--threads", sweep.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    sc->add_option("--tolerance", sweep.tolerance, "quadrature tolerance")->check(CLI::PositiveNumber);
    sc->add_flag("--resume", sweep.resume, "continue an interrupted sweep");

    VerifyArgs ver;
    auto *vc = app.add_subcommand("verify", "run an acceptance suite");
    vc->add_option("--suite", ver.suite, "constants, collapse, oracle, gradients, symmetry or all");
    vc->add_option("--report", ver.report, "write a JSON summary here");
    vc->add_option("--seed", ver.seed, "random seed for the sampled checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (*pc)
            return run_point_command(point);
        if (*sc)
            return run_sweep_command(sweep);
        return run_verify_command(ver);
    } catch (const DomainError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const NumericalError &e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return exit_numerical;
    } catch (const IoError &e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return exit_io;
    } catch (const FormatError &e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return exit_io;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_numerical;
    }
}
