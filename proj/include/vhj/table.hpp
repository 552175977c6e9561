#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "vhj/error.hpp"
#include "vhj/format.hpp"

namespace vhj {

/// A point in the plane. One-dimensional problems use only the first entry
/// and keep the second at zero.
using Point = std::array<double, 2>;

/**
 * Tabulated field on a tensor-product node set.
 *
 * 1D tables hold (x, value) pairs with strictly increasing x. 2D tables hold
 * (x, y, value) triples which must cover every combination of the distinct x
 * and y coordinates. Evaluation is (bi)linear; points outside the node range
 * raise an extrapolation error.
 */
struct Table {
    int dim = 1;
    std::vector<double> xs;      ///< distinct x nodes, increasing
    std::vector<double> ys;      ///< distinct y nodes, increasing (2D only)
    std::vector<double> values;  ///< row-major: values[j * xs.size() + i]
    std::string name;            ///< origin, used in messages

    double x_min() const { return xs.front(); }
    double x_max() const { return xs.back(); }
    double y_min() const { return dim == 2 ? ys.front() : 0.0; }
    double y_max() const { return dim == 2 ? ys.back() : 0.0; }

    bool contains(const Point& p) const {
        const double tx = 1e-12 * std::max(1.0, std::abs(x_max() - x_min()));
        if (p[0] < x_min() - tx || p[0] > x_max() + tx) return false;
        if (dim == 2) {
            const double ty = 1e-12 * std::max(1.0, std::abs(y_max() - y_min()));
            if (p[1] < y_min() - ty || p[1] > y_max() + ty) return false;
        }
        return true;
    }

    double min_value() const { return *std::min_element(values.begin(), values.end()); }

    double eval(const Point& p) const {
        if (!contains(p)) {
            std::ostringstream os;
            os << "table '" << name << "' evaluated outside its range at (" << format_double(p[0]);
            if (dim == 2) os << ", " << format_double(p[1]);
            os << "); extrapolation is not supported";
            fail(ErrorKind::contract, os.str());
        }
        auto [i, sx] = locate(xs, p[0]);
        if (dim == 1) return (1.0 - sx) * values[i] + sx * values[i + 1];
        auto [j, sy] = locate(ys, p[1]);
        const std::size_t nx = xs.size();
        const double v00 = values[j * nx + i], v10 = values[j * nx + i + 1];
        const double v01 = values[(j + 1) * nx + i], v11 = values[(j + 1) * nx + i + 1];
        return (1.0 - sy) * ((1.0 - sx) * v00 + sx * v10) + sy * ((1.0 - sx) * v01 + sx * v11);
    }

private:
    static std::pair<std::size_t, double> locate(const std::vector<double>& nodes, double x) {
        if (nodes.size() < 2) return {0, 0.0};
        x = std::clamp(x, nodes.front(), nodes.back());
        auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
        std::size_t i = static_cast<std::size_t>(it - nodes.begin());
        i = (i == 0) ? 0 : i - 1;
        if (i >= nodes.size() - 1) i = nodes.size() - 2;
        const double s = (x - nodes[i]) / (nodes[i + 1] - nodes[i]);
        return {i, s};
    }
};

/// Splits one CSV line on commas. Blank lines and lines starting with '#' are
/// reported as empty.
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') return out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    return out;
}

inline bool looks_numeric(const std::string& s) {
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\r') continue;
        return (c >= '0' && c <= '9') || c == '-' || c == '+' || c == '.';
    }
    return false;
}

/// Parses a table from CSV text. A non-numeric first row is treated as a header.
inline Table parse_table_csv(std::istream& in, int dim, const std::string& name) {
    if (dim != 1 && dim != 2) fail(ErrorKind::config, "table '" + name + "': dim must be 1 or 2");
    const std::size_t ncol = static_cast<std::size_t>(dim) + 1;
    std::vector<std::array<double, 3>> rows;
    std::string line;
    std::size_t lineno = 0;
    bool seen_data = false;
    while (std::getline(in, line)) {
        ++lineno;
        auto cells = split_csv_line(line);
        if (cells.empty()) continue;
        if (!seen_data && !looks_numeric(cells[0])) {
            seen_data = true;  // header row
            continue;
        }
        seen_data = true;
        if (cells.size() != ncol)
            fail(ErrorKind::config, "table '" + name + "' line " + std::to_string(lineno) + ": expected " +
                                        std::to_string(ncol) + " columns, found " +
                                        std::to_string(cells.size()));
        std::array<double, 3> r{0.0, 0.0, 0.0};
        const std::string ctx = "table '" + name + "' line " + std::to_string(lineno);
        for (std::size_t c = 0; c < ncol; ++c) r[c] = parse_double(cells[c], ctx);
        for (std::size_t c = 0; c < ncol; ++c)
            if (!std::isfinite(r[c])) fail(ErrorKind::config, ctx + ": non-finite entry");
        rows.push_back(r);
    }
    Table t;
    t.dim = dim;
    t.name = name;
    if (dim == 1) {
        std::sort(rows.begin(), rows.end(), [](auto& a, auto& b) { return a[0] < b[0]; });
        for (std::size_t k = 0; k < rows.size(); ++k) {
            if (k > 0 && !(rows[k][0] > rows[k - 1][0]))
                fail(ErrorKind::config, "table '" + name + "': duplicate x node " + format_double(rows[k][0]));
            t.xs.push_back(rows[k][0]);
            t.values.push_back(rows[k][1]);
        }
        if (t.xs.size() < 2) fail(ErrorKind::config, "table '" + name + "': need at least two nodes");
        return t;
    }
    std::map<std::pair<double, double>, double> cellmap;
    std::vector<double> xs, ys;
    for (auto& r : rows) {
        if (!cellmap.emplace(std::make_pair(r[1], r[0]), r[2]).second)
            fail(ErrorKind::config, "table '" + name + "': duplicate node (" + format_double(r[0]) + ", " +
                                        format_double(r[1]) + ")");
        xs.push_back(r[0]);
        ys.push_back(r[1]);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    if (xs.size() < 2 || ys.size() < 2) fail(ErrorKind::config, "table '" + name + "': need a 2x2 node set at least");
    if (cellmap.size() != xs.size() * ys.size())
        fail(ErrorKind::config, "table '" + name + "': nodes do not form a complete tensor grid");
    t.xs = xs;
    t.ys = ys;
    t.values.reserve(cellmap.size());
    for (auto& [key, v] : cellmap) t.values.push_back(v);  // map order is (y, x) lexicographic
    return t;
}

inline Table read_table_csv(const std::string& path, int dim) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open table file '" + path + "'");
    return parse_table_csv(in, dim, path);
}

}  // namespace vhj
