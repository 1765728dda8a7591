#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include <Eigen/Eigenvalues>

#include "pairqfi/sweep.hpp"

namespace pairqfi {

GridSpec GridSpec::parse(const std::string &text) {
    const auto a = text.find(':');
    const auto b = a == std::string::npos ? std::string::npos : text.find(':', a + 1);
    if (b == std::string::npos || text.find(':', b + 1) != std::string::npos)
        throw DomainError("grid must be given as min:step:max, got '" + text + "'");
    GridSpec g;
    try {
        std::size_t used = 0;
        auto number = [&](const std::string &s) {
            const double v = std::stod(s, &used);
            if (used != s.size())
                throw std::invalid_argument(s);
            return v;
        };
        g.min = number(text.substr(0, a));
        g.step = number(text.substr(a + 1, b - a - 1));
        g.max = number(text.substr(b + 1));
    } catch (const std::logic_error &) {
        throw DomainError("grid must be given as min:step:max, got '" + text + "'");
    }
    g.validate();
    return g;
}

void GridSpec::validate() const {
    if (!std::isfinite(min) || !std::isfinite(max) || !std::isfinite(step))
        throw DomainError("grid bounds must be finite");
    if (!(min < max))
        throw DomainError("grid needs l_min < l_max");
    if (!(step > 0))
        throw DomainError("grid step must be positive");
    if ((max - min) / step + 1 > static_cast<double>(max_grid_points))
        throw DomainError("grid has too many points");
}

std::size_t GridSpec::count() const {
    return static_cast<std::size_t>(std::floor((max - min) / step + 1e-9)) + 1;
}

void SweepConfig::validate() const {
    grid.validate();
    quadrature.validate();
    if (dp2.empty() || lz.empty())
        throw DomainError("sweep needs at least one dp2 and one l_z value");
    for (double v : dp2)
        if (!(v >= 0 && v < 1))
            throw DomainError("dp2 values must lie in [0,1)");
    for (double v : lz)
        if (!std::isfinite(v))
            throw DomainError("l_z values must be finite");
    const double n = static_cast<double>(dp2.size()) * static_cast<double>(lz.size()) *
                     static_cast<double>(grid.count()) * static_cast<double>(grid.count());
    if (n > static_cast<double>(max_grid_points))
        throw DomainError("sweep exceeds 1e7 grid points");
}

std::size_t SweepConfig::record_count() const {
    return dp2.size() * lz.size() * grid.count() * grid.count();
}

PointEvaluator::PointEvaluator(CenteringConvention convention, PupilModel<double> pupil, QuadratureSpec<double> spec)
    : convention_(convention), pupil_(std::move(pupil)), spec_(spec), moments_(psi_moments(pupil_, spec_)) {
    Eigen::SelfAdjointEigenSolver<Matrix3<double>> solver(moments_.covariance(), Eigen::EigenvaluesOnly);
    const double reference = solver.eigenvalues()(2) *
                             (convention_ == CenteringConvention::geometric_center ? 4.0 : 1.0);
    information_floor_ = singular_information_fraction * reference;
}

SweepRecord PointEvaluator::operator()(const SeparationVector<double> &l, double dp2) const {
    const auto brightness = BrightnessSplit<double>::from_dp2(dp2);
    SweepRecord r;
    r.dp2 = dp2;
    r.lx = l.x();
    r.ly = l.y();
    r.lz = l.z();

    if (convention_ == CenteringConvention::geometric_center) {
        // State overlap for sources at +-l is the centroid-form overlap at 2l.
        const auto avg = phase_averages(l.scaled(2.0), pupil_, spec_);
        r.delta = std::min(std::abs(avg.i0), 1.0);
        r.phi = std::arg(avg.i0) / 2;
        r.information = qfi_geometric_closed(moments_);
    } else {
        try {
            const auto eval = evaluate_centroid_qfi(l, brightness, pupil_, spec_, moments_);
            r.delta = eval.delta;
            r.phi = eval.phi;
            r.information = eval.information;
            if (eval.small_separation_limit)
                r.status = RecordStatus::small_separation_limit;
        } catch (const OverlapVanishesError &) {
            const auto avg = phase_averages(l, pupil_, spec_);
            const double nan = std::numeric_limits<double>::quiet_NaN();
            r.delta = std::abs(avg.i0);
            r.phi = std::arg(avg.i0);
            r.information.setConstant(nan);
            r.qcrb.setConstant(nan);
            r.status = RecordStatus::overlap_null;
            return r;
        }
    }

    try {
        r.qcrb = qcrb_from_qfi(r.information, information_floor_).bounds;
    } catch (const SingularMatrixError &) {
        r.qcrb.setConstant(std::numeric_limits<double>::infinity());
        r.status = RecordStatus::singular;
    }
    return r;
}

SweepRecord run_point(const SeparationVector<double> &l, double dp2, CenteringConvention convention,
                      const QuadratureSpec<double> &spec, const PupilModel<double> &pupil) {
    return PointEvaluator(convention, pupil, spec)(l, dp2);
}

namespace {

PupilModel<double> config_pupil(const SweepConfig &config) {
    if (config.pupil_path.empty())
        return PupilModel<double>::circular();
    return load_pupil_grid(config.pupil_path);
}

struct GridIndex {
    std::size_t dp2, lz, ly, lx;
};

GridIndex unflatten(const SweepConfig &c, std::size_t index) {
    const std::size_t n = c.grid.count();
    GridIndex g;
    g.lx = index % n;
    index /= n;
    g.ly = index % n;
    index /= n;
    g.lz = index % c.lz.size();
    g.dp2 = index / c.lz.size();
    return g;
}

} // namespace

void run_sweep(const SweepConfig &config, const RecordSink &sink, std::size_t first, std::size_t chunk_size) {
    config.validate();
    const PointEvaluator evaluate(config.convention, config_pupil(config), config.quadrature);
    const std::size_t total = config.record_count();
    if (first > total)
        throw DomainError("resume index beyond the end of the sweep");
    chunk_size = std::max<std::size_t>(chunk_size, 1);

    unsigned workers = config.threads > 0 ? static_cast<unsigned>(config.threads) : std::thread::hardware_concurrency();
    workers = std::max(1u, workers);

    std::vector<SweepRecord> chunk;
    for (std::size_t begin = first; begin < total; begin += chunk_size) {
        const std::size_t end = std::min(total, begin + chunk_size);
        chunk.assign(end - begin, SweepRecord{});
        std::atomic<std::size_t> next{begin};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto work = [&] {
            for (std::size_t i = next++; i < end; i = next++) {
                try {
                    const GridIndex g = unflatten(config, i);
                    const SeparationVector<double> l(config.grid.value(g.lx), config.grid.value(g.ly), config.lz[g.lz]);
                    chunk[i - begin] = evaluate(l, config.dp2[g.dp2]);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure)
                        failure = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        const unsigned n_threads = static_cast<unsigned>(std::min<std::size_t>(workers, end - begin));
        for (unsigned t = 1; t < n_threads; ++t)
            pool.emplace_back(work);
        work();
        for (auto &t : pool)
            t.join();
        if (failure)
            std::rethrow_exception(failure);
        for (const auto &r : chunk)
            sink(r);
    }
}

namespace {

// Number of complete data records in an existing output file; truncates a
// trailing partial line.
std::size_t complete_records(const SweepConfig &config) {
    namespace fs = std::filesystem;
    const fs::path path(config.output_path);
    if (!fs::exists(path))
        return 0;
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read '" + config.output_path + "'");
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();

    const std::size_t keep = content.rfind('\n') == std::string::npos ? 0 : content.rfind('\n') + 1;
    if (keep != content.size()) {
        std::error_code ec;
        fs::resize_file(path, keep, ec);
        if (ec)
            throw IoError("cannot truncate '" + config.output_path + "': " + ec.message());
        content.resize(keep);
    }
    std::size_t lines = static_cast<std::size_t>(std::count(content.begin(), content.end(), '\n'));
    if (config.format == OutputFormat::csv) {
        if (lines == 0)
            return 0;
        if (content.compare(0, csv_header().size() + 1, csv_header() + "\n") != 0)
            throw IoError("existing file '" + config.output_path + "' does not start with the sweep CSV header");
        --lines;
    }
    if (lines > config.record_count())
        throw IoError("existing file '" + config.output_path + "' has more records than the sweep");
    return lines;
}

} // namespace

std::size_t run_sweep_to_file(const SweepConfig &config, bool resume) {
    config.validate();
    if (config.output_path.empty())
        throw DomainError("sweep needs an output path");

    std::size_t done = resume ? complete_records(config) : 0;
    const bool fresh = !resume || !std::filesystem::exists(config.output_path) ||
                       std::filesystem::file_size(config.output_path) == 0;
    std::ofstream out(config.output_path, fresh ? std::ios::binary | std::ios::trunc
                                                : std::ios::binary | std::ios::app);
    if (!out)
        throw IoError("cannot open '" + config.output_path + "' for writing");
    if (fresh) {
        done = 0;
        if (config.format == OutputFormat::csv)
            out << csv_header() << '\n';
    }

    std::size_t written = 0;
    std::size_t since_flush = 0;
    run_sweep(
        config,
        [&](const SweepRecord &r) {
            out << (config.format == OutputFormat::csv ? format_csv(r) : format_jsonl(r)) << '\n';
            ++written;
            if (++since_flush == 4096) {
                out.flush();
                since_flush = 0;
            }
            if (!out)
                throw IoError("write to '" + config.output_path + "' failed");
        },
        done);
    out.flush();
    if (!out)
        throw IoError("write to '" + config.output_path + "' failed");
    return written;
}

} // namespace pairqfi
