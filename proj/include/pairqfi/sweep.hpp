#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pairqfi/overlap.hpp"
#include "pairqfi/qfi.hpp"
#include "pairqfi/quadrature.hpp"
#include "pairqfi/types.hpp"

namespace pairqfi {

class IoError : public Error {
  public:
    using Error::Error;
};

/// Inclusive arithmetic grid min, min + step, ..., <= max.
struct GridSpec {
    double min = 0.05;
    double step = 0.05;
    double max = 3.0;

    static GridSpec parse(const std::string &text); // "min:step:max"
    void validate() const;
    std::size_t count() const;
    double value(std::size_t i) const { return min + static_cast<double>(i) * step; }
};

enum class OutputFormat { csv, jsonl };

inline constexpr std::size_t max_grid_points = 10'000'000;

struct SweepConfig {
    std::vector<double> dp2{0.0, 0.75, 0.95};
    std::vector<double> lz{0.0, 1.0, 2.0};
    GridSpec grid{};
    CenteringConvention convention = CenteringConvention::intensity_centroid;
    QuadratureSpec<double> quadrature{};
    std::string output_path;
    OutputFormat format = OutputFormat::csv;
    // Optional sampled-grid pupil file; circular clear aperture otherwise.
    std::string pupil_path;
    // 0 selects the hardware concurrency.
    int threads = 0;

    void validate() const;
    std::size_t record_count() const;
};

enum class RecordStatus { ok, singular, small_separation_limit, overlap_null };

const char *to_string(RecordStatus status);

struct SweepRecord {
    double dp2 = 0;
    double lx = 0, ly = 0, lz = 0;
    double delta = 0;
    double phi = 0;
    Matrix3<double> information = Matrix3<double>::Zero();
    Vector3<double> qcrb = Vector3<double>::Zero();
    RecordStatus status = RecordStatus::ok;
};

/// Fraction of the equal-brightness information below which an information
/// matrix is reported as singular (the fainter source has effectively
/// vanished).
inline constexpr double singular_information_fraction = 1e-3;

/// Evaluates single grid points; the pupil moments are computed once.
class PointEvaluator {
  public:
    PointEvaluator(CenteringConvention convention, PupilModel<double> pupil, QuadratureSpec<double> spec);

    SweepRecord operator()(const SeparationVector<double> &l, double dp2) const;

    const PsiMoments<double> &moments() const { return moments_; }

  private:
    CenteringConvention convention_;
    PupilModel<double> pupil_;
    QuadratureSpec<double> spec_;
    PsiMoments<double> moments_;
    double information_floor_;
};

SweepRecord run_point(const SeparationVector<double> &l, double dp2, CenteringConvention convention,
                      const QuadratureSpec<double> &spec,
                      const PupilModel<double> &pupil = PupilModel<double>::circular());

/// Called with consecutive records in sweep order.
using RecordSink = std::function<void(const SweepRecord &)>;

/// Iterate dp2 (outer), l_z, l_y, l_x (inner), all ascending as listed,
/// starting at record `first`. Points are evaluated by a worker pool in
/// chunks; each chunk is handed to the sink in order before the next starts.
void run_sweep(const SweepConfig &config, const RecordSink &sink, std::size_t first = 0,
               std::size_t chunk_size = 4096);

/// run_sweep into config.output_path. With `resume`, complete records
/// already in the file are kept and the sweep continues after them.
/// Returns the number of records written by this call.
std::size_t run_sweep_to_file(const SweepConfig &config, bool resume);

// Serialization: 12 significant digits, '.' decimal point, lowercase 'e'.
std::string format_number(double value);
const std::string &csv_header();
std::string format_csv(const SweepRecord &record);
std::string format_jsonl(const SweepRecord &record);

SweepConfig parse_config_text(const std::string &text);
SweepConfig load_config_file(const std::string &path);
std::vector<double> parse_list(const std::string &text);

/// Sampled-grid pupil file: header `pupil-grid v1 <N> <h>` then N^2
/// non-negative weights in row-major order.
PupilModel<double> read_pupil_grid(std::istream &in);
PupilModel<double> load_pupil_grid(const std::string &path);
void write_pupil_grid(std::ostream &out, int n, double h, const std::vector<double> &weights);

} // namespace pairqfi
