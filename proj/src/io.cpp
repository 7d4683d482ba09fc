#include "phinv/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "phinv/error.hpp"

namespace phinv::io {

std::string format_double(double x) {
    if (!std::isfinite(x)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace {

void dump(const Json& j, std::string& out, int depth) {
    auto indent = [&](int level) { out.append(static_cast<std::size_t>(2 * level), ' '); };
    switch (j.type()) {
        case Json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ",\n";
                first = false;
                indent(depth + 1);
                out += Json(it.key()).dump();
                out += ": ";
                dump(it.value(), out, depth + 1);
            }
            out += '\n';
            indent(depth);
            out += '}';
            return;
        }
        case Json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            out += "[\n";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out += ",\n";
                indent(depth + 1);
                dump(j[i], out, depth + 1);
            }
            out += '\n';
            indent(depth);
            out += ']';
            return;
        }
        case Json::value_t::number_float: {
            double x = j.get<double>();
            out += std::isfinite(x) ? format_double(x) : "null";
            return;
        }
        default:
            out += j.dump();
    }
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

double parse_number(const std::string& s, const std::string& where) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) ++used;
    if (used != s.size() || s.empty()) throw ConfigError(where + ": cannot parse \"" + s + "\" as a number");
    return v;
}

}  // namespace

std::string dump_json(const Json& j) {
    std::string out;
    dump(j, out, 0);
    out += '\n';
    return out;
}

void write_json(const std::string& path, const Json& j) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path);
    os << dump_json(j);
}

void write_quadruples_csv(std::ostream& os, const QuadrupleSet& qs) {
    os << "i1,i2,i3,i4,energy_residual\n";
    for (const auto& q : qs.quads)
        os << q.i1 << ',' << q.i2 << ',' << q.i3 << ',' << q.i4 << ',' << format_double(q.energy_residual) << '\n';
}

std::vector<CollisionQuadruple> read_quadruples_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "i1,i2,i3,i4,energy_residual")
        throw ConfigError("quadruple CSV must start with header i1,i2,i3,i4,energy_residual");
    std::vector<CollisionQuadruple> out;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cells = split_csv(line);
        std::string where = "line " + std::to_string(lineno);
        if (cells.size() != 5) throw ConfigError(where + ": expected 5 fields");
        auto idx = [&](int c) { return static_cast<PointIndex>(parse_number(cells[static_cast<std::size_t>(c)], where)); };
        out.push_back({idx(0), idx(1), idx(2), idx(3), parse_number(cells[4], where)});
    }
    return out;
}

void write_matrix_market(std::ostream& os, const ConstraintMatrix& m) {
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << m.rows() << ' ' << m.cols() << ' ' << m.nonzeros() << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (const auto& e : m.row(r)) os << r + 1 << ' ' << e.col + 1 << ' ' << format_double(e.value) << '\n';
}

CoordinateMatrix read_matrix_market(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("%%MatrixMarket", 0) != 0)
        throw ConfigError("missing %%MatrixMarket banner");
    std::istringstream banner(line);
    std::string tag, object, format, field, symmetry;
    banner >> tag >> object >> format >> field >> symmetry;
    if (object != "matrix" || format != "coordinate" || field != "real" || symmetry != "general")
        throw ConfigError("only 'matrix coordinate real general' is supported");
    while (std::getline(is, line) && !line.empty() && line[0] == '%') {
    }
    CoordinateMatrix m;
    std::size_t nnz = 0;
    {
        std::istringstream size(line);
        if (!(size >> m.rows >> m.cols >> nnz)) throw ConfigError("bad Matrix Market size line");
    }
    m.entries.reserve(nnz);
    for (std::size_t i = 0; i < nnz; ++i) {
        std::size_t r = 0, c = 0;
        double v = 0.0;
        if (!(is >> r >> c >> v)) throw ConfigError("Matrix Market file ends early");
        if (r < 1 || r > m.rows || c < 1 || c > m.cols) throw ConfigError("Matrix Market index out of range");
        m.entries.push_back({r - 1, c - 1, v});
    }
    return m;
}

void write_basis_csv(std::ostream& os, const InvariantBasis& basis) {
    const Eigen::Index cols = basis.vectors.cols();
    for (Eigen::Index j = 0; j < cols; ++j) os << (j ? "," : "") << 'v' << j;
    os << '\n';
    for (Eigen::Index i = 0; i < basis.vectors.rows(); ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) os << (j ? "," : "") << format_double(basis.vectors(i, j));
        os << '\n';
    }
}

void write_grid_csv(std::ostream& os, const GridFunction& f, const std::string& value_name) {
    const GridSpec& g = f.spec;
    for (int j = 0; j < g.dim(); ++j) os << 'k' << j << ',';
    os << value_name << '\n';
    std::vector<double> k(static_cast<std::size_t>(g.dim()));
    for (std::size_t i = 0; i < f.size(); ++i) {
        g.point(static_cast<PointIndex>(i), k);
        for (double x : k) os << format_double(x) << ',';
        os << format_double(f[i]) << '\n';
    }
}

std::vector<double> read_values_csv(std::istream& is) {
    std::string line;
    std::vector<double> out;
    std::size_t lineno = 0;
    bool header_checked = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_csv(line);
        if (cells.empty()) continue;
        if (!header_checked) {
            header_checked = true;
            try {
                parse_number(cells.back(), "");
            } catch (const ConfigError&) {
                continue;  // header row
            }
        }
        out.push_back(parse_number(cells.back(), "line " + std::to_string(lineno)));
    }
    return out;
}

}  // namespace phinv::io
