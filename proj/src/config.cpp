#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pairqfi/sweep.hpp"

namespace pairqfi {

namespace {

std::string trim(const std::string &s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a])))
        ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1])))
        --b;
    return s.substr(a, b - a);
}

double parse_real(const std::string &text, const std::string &what) {
    const std::string t = trim(text);
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(t, &used);
    } catch (const std::logic_error &) {
        used = 0;
    }
    if (t.empty() || used != t.size())
        throw DomainError("cannot parse " + what + " value '" + text + "'");
    return v;
}

int parse_int(const std::string &text, const std::string &what) {
    const std::string t = trim(text);
    std::size_t used = 0;
    int v = 0;
    try {
        v = std::stoi(t, &used);
    } catch (const std::logic_error &) {
        used = 0;
    }
    if (t.empty() || used != t.size())
        throw DomainError("cannot parse " + what + " value '" + text + "'");
    return v;
}

} // namespace

std::vector<double> parse_list(const std::string &text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(parse_real(item, "list"));
    if (out.empty())
        throw DomainError("empty list");
    return out;
}

SweepConfig parse_config_text(const std::string &text) {
    SweepConfig c;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DomainError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "dp2")
            c.dp2 = parse_list(value);
        else if (key == "lz")
            c.lz = parse_list(value);
        else if (key == "grid")
            c.grid = GridSpec::parse(value);
        else if (key == "l_min")
            c.grid.min = parse_real(value, key);
        else if (key == "l_max")
            c.grid.max = parse_real(value, key);
        else if (key == "step")
            c.grid.step = parse_real(value, key);
        else if (key == "convention")
            c.convention = parse_convention(value);
        else if (key == "radial_nodes")
            c.quadrature.radial_nodes = parse_int(value, key);
        else if (key == "angular_nodes")
            c.quadrature.angular_nodes = parse_int(value, key);
        else if (key == "tolerance")
            c.quadrature.tolerance = parse_real(value, key);
        else if (key == "refinement_cap")
            c.quadrature.refinement_cap = parse_int(value, key);
        else if (key == "out")
            c.output_path = value;
        else if (key == "format") {
            if (value == "csv")
                c.format = OutputFormat::csv;
            else if (value == "jsonl" || value == "json-lines")
                c.format = OutputFormat::jsonl;
            else
                throw DomainError("unknown output format '" + value + "'");
        } else if (key == "pupil")
            c.pupil_path = value;
        else if (key == "threads")
            c.threads = parse_int(value, key);
        else
            throw DomainError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    c.validate();
    return c;
}

SweepConfig load_config_file(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

} // namespace pairqfi
