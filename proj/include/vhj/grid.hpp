#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "vhj/error.hpp"
#include "vhj/format.hpp"
#include "vhj/problem.hpp"
#include "vhj/table.hpp"

namespace vhj {

enum class GridKind { box, torus };

inline const char* to_string(GridKind k) { return k == GridKind::box ? "box" : "torus"; }

/**
 * Uniform Cartesian grid on [-W, W]^N (box) or on the torus R^N / 2W Z^N.
 *
 * Nodes are indexed i = 0 .. n-1 per axis with coordinate (i - c)·h, where
 * c = (n-1)/2 and h = 2W/(n-1), so the origin is the exact node i = c. On a
 * torus index n-1 is identified with index 0 and only n-1 nodes per axis are
 * stored.
 */
class Grid {
public:
    Grid() = default;

    static Grid box(int dim, double half_width, int nodes_per_axis) {
        return make(GridKind::box, dim, half_width, nodes_per_axis);
    }
    static Grid torus(int dim, double half_width, int nodes_per_axis) {
        return make(GridKind::torus, dim, half_width, nodes_per_axis);
    }

    /// Box sharing spacing h with a parent grid, with `half_count` nodes on each
    /// side of the origin. Coordinates coincide bit-exactly with the parent's.
    static Grid box_from_spacing(int dim, double h, int half_count) {
        Grid g;
        g.kind_ = GridKind::box;
        g.dim_ = dim;
        g.h_ = h;
        g.c_ = half_count;
        g.n_ = 2 * half_count + 1;
        g.half_width_ = half_count * h;
        return g;
    }

    GridKind kind() const { return kind_; }
    int dim() const { return dim_; }
    double half_width() const { return half_width_; }
    int nodes_per_axis() const { return n_; }
    double h() const { return h_; }
    int half_count() const { return c_; }
    /// Stored nodes per axis: n for a box, n-1 for a torus.
    int axis_size() const { return kind_ == GridKind::box ? n_ : n_ - 1; }
    std::size_t size() const {
        const auto a = static_cast<std::size_t>(axis_size());
        return dim_ == 1 ? a : a * a;
    }

    double coord(int i) const { return (i - c_) * h_; }
    std::size_t flat(int i, int j = 0) const {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(axis_size()) + static_cast<std::size_t>(i);
    }
    int ix(std::size_t flat_index) const { return static_cast<int>(flat_index % static_cast<std::size_t>(axis_size())); }
    int iy(std::size_t flat_index) const {
        return dim_ == 1 ? 0 : static_cast<int>(flat_index / static_cast<std::size_t>(axis_size()));
    }
    Point point(std::size_t flat_index) const {
        return {coord(ix(flat_index)), dim_ == 2 ? coord(iy(flat_index)) : 0.0};
    }
    std::size_t origin() const { return flat(c_, dim_ == 2 ? c_ : 0); }

    /// True on the outer ring of a box; never on a torus.
    bool is_boundary(std::size_t flat_index) const {
        if (kind_ == GridKind::torus) return false;
        const int i = ix(flat_index);
        if (i == 0 || i == n_ - 1) return true;
        if (dim_ == 2) {
            const int j = iy(flat_index);
            if (j == 0 || j == n_ - 1) return true;
        }
        return false;
    }

    bool same_as(const Grid& o) const {
        return kind_ == o.kind_ && dim_ == o.dim_ && n_ == o.n_ && h_ == o.h_;
    }

    std::string describe() const {
        std::ostringstream os;
        os << to_string(kind_) << "(dim=" << dim_ << ", half_width=" << format_double(half_width_)
           << ", nodes_per_axis=" << n_ << ", h=" << format_double(h_) << ")";
        return os.str();
    }

private:
    static Grid make(GridKind kind, int dim, double half_width, int n) {
        if (dim != 1 && dim != 2) fail(ErrorKind::config, "grid dim must be 1 or 2");
        if (!(half_width > 0.0) || !std::isfinite(half_width)) fail(ErrorKind::config, "grid half_width must be > 0");
        if (n < 9 || n % 2 == 0)
            fail(ErrorKind::config, "nodes_per_axis must be odd and >= 9, got " + std::to_string(n));
        Grid g;
        g.kind_ = kind;
        g.dim_ = dim;
        g.half_width_ = half_width;
        g.n_ = n;
        g.c_ = (n - 1) / 2;
        g.h_ = 2.0 * half_width / (n - 1);
        return g;
    }

    GridKind kind_ = GridKind::box;
    int dim_ = 1;
    double half_width_ = 1.0;
    int n_ = 9;
    int c_ = 4;
    double h_ = 0.25;
};

/// Nodal values on a grid.
struct GridFunction {
    Grid grid;
    std::vector<double> values;

    GridFunction() = default;
    explicit GridFunction(const Grid& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t k) { return values[k]; }
    double operator[](std::size_t k) const { return values[k]; }
    double at(int i, int j = 0) const { return values[grid.flat(i, j)]; }
    double at_origin() const { return values[grid.origin()]; }

    /// Hard error on the first non-finite value, naming its node.
    void require_finite(const std::string& context) const {
        for (std::size_t k = 0; k < values.size(); ++k) {
            if (!std::isfinite(values[k])) {
                const Point p = grid.point(k);
                std::ostringstream os;
                os << context << ": non-finite value at node (" << format_double(p[0]);
                if (grid.dim() == 2) os << ", " << format_double(p[1]);
                os << ")";
                fail(ErrorKind::numerical_blowup, os.str());
            }
        }
    }
};

inline void require_same_grid(const GridFunction& a, const GridFunction& b, const char* op) {
    if (!a.grid.same_as(b.grid))
        fail(ErrorKind::contract, std::string(op) + ": grid mismatch " + a.grid.describe() + " vs " + b.grid.describe());
}

/// Nodal evaluation of any callable Point -> double. A failure at a node is
/// rethrown with the node coordinates attached.
template <class F>
GridFunction sample(const Grid& grid, F&& fn) {
    GridFunction g(grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const Point p = grid.point(k);
        try {
            g.values[k] = fn(p);
        } catch (const Error& e) {
            std::ostringstream os;
            os << "sampling failed at node (" << format_double(p[0]);
            if (grid.dim() == 2) os << ", " << format_double(p[1]);
            os << "): " << e.what();
            fail(e.kind(), os.str());
        }
    }
    return g;
}

inline GridFunction sample(const SourceSpec& f, const Grid& grid) {
    return sample(grid, [&](const Point& p) { return eval_source(f, p); });
}

inline GridFunction sample(const InitialSpec& u0, const Grid& grid) {
    return sample(grid, [&](const Point& p) { return eval_initial(u0, p); });
}

/// Number of spacings in a window of half-width w, if w is node-aligned.
inline int aligned_half_count(const Grid& grid, double w) {
    const double k = w / grid.h();
    const double kr = std::round(k);
    if (std::abs(k - kr) > 1e-9 * std::max(1.0, k)) {
        std::ostringstream os;
        os << "window half-width " << format_double(w) << " is not aligned to nodes of " << grid.describe()
           << "; nearest aligned widths: " << format_double(std::floor(k) * grid.h()) << ", "
           << format_double(std::ceil(k) * grid.h());
        fail(ErrorKind::contract, os.str());
    }
    return static_cast<int>(kr);
}

/// Copy of the values on the centered window of half-width w (a box grid with
/// the same spacing).
inline GridFunction restrict(const GridFunction& gf, double window_half_width) {
    const Grid& g = gf.grid;
    const int k = aligned_half_count(g, window_half_width);
    const int limit = g.kind() == GridKind::box ? g.half_count() : g.half_count() - 1;
    if (k > g.half_count() || k < 0)
        fail(ErrorKind::contract, "restrict: window half-width " + format_double(window_half_width) +
                                      " exceeds grid half-width " + format_double(g.half_width()));
    if (g.kind() == GridKind::box && k == g.half_count()) return gf;
    if (k > limit)
        fail(ErrorKind::contract, "restrict: torus window must be strictly smaller than the period");
    const Grid sub = Grid::box_from_spacing(g.dim(), g.h(), k);
    GridFunction out(sub);
    const int off = g.half_count() - k;
    if (g.dim() == 1) {
        for (int i = 0; i < sub.axis_size(); ++i) out.values[sub.flat(i)] = gf.values[g.flat(i + off)];
    } else {
        for (int j = 0; j < sub.axis_size(); ++j)
            for (int i = 0; i < sub.axis_size(); ++i) out.values[sub.flat(i, j)] = gf.values[g.flat(i + off, j + off)];
    }
    return out;
}

/// Default compact window: min(2, W/4) rounded down to a node.
inline double default_window(const Grid& g) {
    const double w = std::min(2.0, g.half_width() / 4.0);
    return std::floor(w / g.h() + 1e-9) * g.h();
}

/// Largest node-aligned half-width not exceeding w.
inline double align_down(const Grid& g, double w) { return std::floor(w / g.h() + 1e-9) * g.h(); }

inline double sup_norm_diff(const GridFunction& a, const GridFunction& b) {
    require_same_grid(a, b, "sup_norm_diff");
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.values[k] - b.values[k]));
    return m;
}

inline double mean(const GridFunction& g) {
    // Pairwise-free summation in index order keeps the result reproducible.
    double s = 0.0;
    for (double v : g.values) s += v;
    return s / static_cast<double>(g.size());
}

inline double min_value(const GridFunction& g) { return *std::min_element(g.values.begin(), g.values.end()); }
inline double max_value(const GridFunction& g) { return *std::max_element(g.values.begin(), g.values.end()); }

template <class Op>
GridFunction combine(const GridFunction& a, const GridFunction& b, Op op) {
    require_same_grid(a, b, "combine");
    GridFunction out(a.grid);
    for (std::size_t k = 0; k < a.size(); ++k) out.values[k] = op(a.values[k], b.values[k]);
    return out;
}

template <class Op>
GridFunction transform(const GridFunction& a, Op op) {
    GridFunction out(a.grid);
    for (std::size_t k = 0; k < a.size(); ++k) out.values[k] = op(a.values[k]);
    return out;
}

/// Multilinear interpolation. Torus grids wrap periodically; box grids refuse
/// points outside [-W, W]^N.
inline double interpolate(const GridFunction& gf, const Point& p) {
    const Grid& g = gf.grid;
    auto cell = [&](double x, int& i0, double& s) {
        const double hw = g.half_count() * g.h();
        double q = (x + hw) / g.h();
        if (g.kind() == GridKind::torus) {
            const double period = static_cast<double>(g.axis_size());
            q = std::fmod(q, period);
            if (q < 0) q += period;
            i0 = static_cast<int>(std::floor(q));
            if (i0 >= g.axis_size()) i0 = 0, q = 0.0;
            s = q - i0;
            return;
        }
        const double tol = 1e-9;
        if (q < -tol || q > (g.nodes_per_axis() - 1) + tol)
            fail(ErrorKind::contract, "interpolate: point " + format_double(x) + " outside " + g.describe());
        q = std::clamp(q, 0.0, static_cast<double>(g.nodes_per_axis() - 1));
        i0 = std::min(static_cast<int>(std::floor(q)), g.nodes_per_axis() - 2);
        s = q - i0;
    };
    auto wrap = [&](int i) { return g.kind() == GridKind::torus ? (i % g.axis_size()) : i; };
    int i0;
    double sx;
    cell(p[0], i0, sx);
    const int i1 = wrap(i0 + 1);
    if (g.dim() == 1) {
        const double a = gf.values[g.flat(i0)], b = gf.values[g.flat(i1)];
        return sx == 0.0 ? a : (1.0 - sx) * a + sx * b;
    }
    int j0;
    double sy;
    cell(p[1], j0, sy);
    const int j1 = wrap(j0 + 1);
    const double v00 = gf.values[g.flat(i0, j0)], v10 = gf.values[g.flat(i1, j0)];
    const double v01 = gf.values[g.flat(i0, j1)], v11 = gf.values[g.flat(i1, j1)];
    if (sx == 0.0 && sy == 0.0) return v00;
    return (1.0 - sy) * ((1.0 - sx) * v00 + sx * v10) + sy * ((1.0 - sx) * v01 + sx * v11);
}

/// Values of gf interpolated onto the nodes of `target`.
inline GridFunction resample(const GridFunction& gf, const Grid& target) {
    if (gf.grid.same_as(target)) return gf;
    return sample(target, [&](const Point& p) { return interpolate(gf, p); });
}

// ---------------------------------------------------------------------------
// CSV export / import

/// Writes `# ...` comment lines, a header, then one row per stored node.
inline void write_csv(const GridFunction& gf, std::ostream& os, const std::vector<std::string>& comments = {}) {
    for (const auto& c : comments) os << "# " << c << "\n";
    os << (gf.grid.dim() == 1 ? "x,value\n" : "x,y,value\n");
    for (std::size_t k = 0; k < gf.size(); ++k) {
        const Point p = gf.grid.point(k);
        os << format_double(p[0]) << ",";
        if (gf.grid.dim() == 2) os << format_double(p[1]) << ",";
        os << format_double(gf.values[k]) << "\n";
    }
}

inline void write_csv_file(const GridFunction& gf, const std::string& path, const std::vector<std::string>& comments = {}) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorKind::io, "cannot write '" + path + "'");
    write_csv(gf, os, comments);
}

/// Reads a GridFunction CSV produced by write_csv. The nodes must form an odd,
/// uniformly spaced, origin-centered box.
inline GridFunction read_grid_function_csv(const std::string& path, int dim) {
    const Table t = read_table_csv(path, dim);
    const std::size_t n = t.xs.size();
    if (n % 2 == 0 || n < 3) fail(ErrorKind::io, "'" + path + "': node count per axis must be odd");
    if (dim == 2 && t.ys.size() != n) fail(ErrorKind::io, "'" + path + "': 2D grid must be square");
    const double h = (t.xs.back() - t.xs.front()) / static_cast<double>(n - 1);
    const int c = static_cast<int>((n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        const double expect = (static_cast<int>(i) - c) * h;
        if (std::abs(t.xs[i] - expect) > 1e-9 * std::max(1.0, std::abs(expect)))
            fail(ErrorKind::io, "'" + path + "': nodes are not uniformly spaced about the origin");
    }
    const Grid g = Grid::box_from_spacing(dim, h, c);
    GridFunction gf(g);
    gf.values = t.values;
    gf.require_finite("read '" + path + "'");
    return gf;
}

}  // namespace vhj
