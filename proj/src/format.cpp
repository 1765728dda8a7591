#include <cmath>
#include <cstdio>
#include <string>

#include "pairqfi/sweep.hpp"

namespace pairqfi {

const char *to_string(RecordStatus status) {
    switch (status) {
    case RecordStatus::ok:
        return "ok";
    case RecordStatus::singular:
        return "singular";
    case RecordStatus::small_separation_limit:
        return "small-separation-limit";
    case RecordStatus::overlap_null:
        return "overlap-null";
    }
    return "unknown";
}

std::string format_number(double value) {
    if (std::isnan(value))
        return "nan";
    if (std::isinf(value))
        return value > 0 ? "inf" : "-inf";
    // %g is locale dependent; the library never calls setlocale, so the
    // "C" locale applies.
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", value == 0 ? 0.0 : value);
    return buf;
}

const std::string &csv_header() {
    static const std::string header =
        "dp2,lx,ly,lz,delta,phi,H_xx,H_xy,H_xz,H_yy,H_yz,H_zz,qcrb_x,qcrb_y,qcrb_z,status";
    return header;
}

namespace {

double upper(const SweepRecord &r, int i, int j) { return r.information(i, j); }

} // namespace

std::string format_csv(const SweepRecord &r) {
    std::string line;
    line.reserve(256);
    auto put = [&](double v) {
        line += format_number(v);
        line += ',';
    };
    put(r.dp2);
    put(r.lx);
    put(r.ly);
    put(r.lz);
    put(r.delta);
    put(r.phi);
    put(upper(r, 0, 0));
    put(upper(r, 0, 1));
    put(upper(r, 0, 2));
    put(upper(r, 1, 1));
    put(upper(r, 1, 2));
    put(upper(r, 2, 2));
    put(r.qcrb.x());
    put(r.qcrb.y());
    put(r.qcrb.z());
    line += to_string(r.status);
    return line;
}

std::string format_jsonl(const SweepRecord &r) {
    std::string line = "{";
    bool first = true;
    auto put = [&](const char *key, double v) {
        if (!first)
            line += ',';
        first = false;
        line += '"';
        line += key;
        line += "\":";
        line += std::isfinite(v) ? format_number(v) : std::string("null");
    };
    put("dp2", r.dp2);
    put("lx", r.lx);
    put("ly", r.ly);
    put("lz", r.lz);
    put("delta", r.delta);
    put("phi", r.phi);
    put("H_xx", upper(r, 0, 0));
    put("H_xy", upper(r, 0, 1));
    put("H_xz", upper(r, 0, 2));
    put("H_yy", upper(r, 1, 1));
    put("H_yz", upper(r, 1, 2));
    put("H_zz", upper(r, 2, 2));
    put("qcrb_x", r.qcrb.x());
    put("qcrb_y", r.qcrb.y());
    put("qcrb_z", r.qcrb.z());
    line += ",\"status\":\"";
    line += to_string(r.status);
    line += "\"}";
    return line;
}

} // namespace pairqfi
