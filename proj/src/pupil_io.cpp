#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "pairqfi/sweep.hpp"

namespace pairqfi {

PupilModel<double> read_pupil_grid(std::istream &in) {
    std::string header;
    if (!std::getline(in, header))
        throw FormatError("pupil file is empty");
    std::istringstream hs(header);
    std::string magic, version;
    long long n = 0;
    double h = 0;
    std::string extra;
    if (!(hs >> magic >> version >> n >> h) || magic != "pupil-grid" || version != "v1" || (hs >> extra))
        throw FormatError("pupil header must read 'pupil-grid v1 <N> <h>'");
    if (n <= 0 || n > 100000 || !(h > 0))
        throw FormatError("pupil header needs N > 0 and h > 0");

    const std::size_t count = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
    std::vector<double> weights;
    weights.reserve(count);
    std::string token;
    while (in >> token) {
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(token, &used);
        } catch (const std::logic_error &) {
            used = 0;
        }
        if (used != token.size())
            throw FormatError("pupil weight '" + token + "' is not a number");
        weights.push_back(v);
    }
    if (weights.size() != count)
        throw FormatError("pupil file has " + std::to_string(weights.size()) + " weights, expected " +
                          std::to_string(count));
    try {
        return PupilModel<double>::sampled(static_cast<int>(n), h, std::move(weights));
    } catch (const DomainError &e) {
        throw FormatError(e.what());
    }
}

PupilModel<double> load_pupil_grid(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open pupil file '" + path + "'");
    return read_pupil_grid(in);
}

void write_pupil_grid(std::ostream &out, int n, double h, const std::vector<double> &weights) {
    if (n <= 0 || weights.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n))
        throw DomainError("pupil grid needs exactly N^2 weights");
    out << "pupil-grid v1 " << n << ' ' << format_number(h) << '\n';
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (j)
                out << ' ';
            out << format_number(weights[static_cast<std::size_t>(i) * n + j]);
        }
        out << '\n';
    }
}

} // namespace pairqfi
