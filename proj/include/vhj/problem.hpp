#pragma once

/// Problem definition for u_t - Δu + |Du|^m = f(x): the exponent m, the
/// source family, the initial datum, and numerical validators for the two
/// structural hypotheses on f (coercivity and the gradient/growth ratio).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "vhj/error.hpp"
#include "vhj/format.hpp"
#include "vhj/table.hpp"

namespace vhj {

enum class SourceFamily { power, power_oscillating, shifted_power, custom_table, closed_form };

inline const char* to_string(SourceFamily f) {
    switch (f) {
        case SourceFamily::power: return "power";
        case SourceFamily::power_oscillating: return "power_oscillating";
        case SourceFamily::shifted_power: return "shifted_power";
        case SourceFamily::custom_table: return "custom_table";
        case SourceFamily::closed_form: return "closed_form";
    }
    return "unknown";
}

/// Source term f. `shift` is added to every family; for `shifted_power` it is
/// the defining parameter. Tables with negative entries receive a
/// normalization offset `table_offset` so that f ≥ 0; reports subtract it again.
struct SourceSpec {
    SourceFamily family = SourceFamily::power;
    double alpha = 2.0;    ///< growth exponent, > 0
    double osc_amp = 0.0;  ///< power_oscillating amplitude, in [0, 2)
    double shift = 0.0;    ///< additive constant, ≥ 0
    std::string table_path;
    std::shared_ptr<const Table> table;
    double table_offset = 0.0;
    std::function<double(const Point&)> fn;         ///< closed_form value
    std::function<double(const Point&)> grad_norm;  ///< closed_form |Df|, optional
    std::string label;                              ///< closed_form description

    static SourceSpec power_law(double alpha, double shift = 0.0) {
        SourceSpec s;
        s.family = shift == 0.0 ? SourceFamily::power : SourceFamily::shifted_power;
        s.alpha = alpha;
        s.shift = shift;
        return s;
    }
    static SourceSpec oscillating(double alpha, double amp) {
        SourceSpec s;
        s.family = SourceFamily::power_oscillating;
        s.alpha = alpha;
        s.osc_amp = amp;
        return s;
    }
    static SourceSpec from_table(std::shared_ptr<const Table> t) {
        SourceSpec s;
        s.family = SourceFamily::custom_table;
        s.table = std::move(t);
        s.table_path = s.table->name;
        s.table_offset = std::max(0.0, -s.table->min_value());
        return s;
    }
    static SourceSpec closed(std::function<double(const Point&)> f, std::string label,
                             std::function<double(const Point&)> grad = {}) {
        SourceSpec s;
        s.family = SourceFamily::closed_form;
        s.fn = std::move(f);
        s.grad_norm = std::move(grad);
        s.label = std::move(label);
        return s;
    }

    /// Constant added to the raw data to make f nonnegative. Constants computed
    /// with this source exceed the ones of the raw data by exactly this amount.
    double normalization_shift() const { return family == SourceFamily::custom_table ? table_offset : 0.0; }
};

inline double radius_of(const Point& x) { return std::hypot(x[0], x[1]); }

/// Evaluates f at x. Pure: identical x gives a bit-identical result.
inline double eval_source(const SourceSpec& f, const Point& x) {
    if (!std::isfinite(x[0]) || !std::isfinite(x[1])) fail(ErrorKind::contract, "eval_source: non-finite point");
    const double r = radius_of(x);
    switch (f.family) {
        case SourceFamily::power:
        case SourceFamily::shifted_power: return std::pow(r, f.alpha) + f.shift;
        case SourceFamily::power_oscillating: return std::pow(r, f.alpha) * (2.0 + f.osc_amp * std::sin(r)) + f.shift;
        case SourceFamily::custom_table: return f.table->eval(x) + f.table_offset + f.shift;
        case SourceFamily::closed_form: return f.fn(x) + f.shift;
    }
    return 0.0;
}

/// |Df(x)|, closed form for the radial families and central differences of
/// the interpolant otherwise. Returns +inf where the closed form is singular.
inline double source_gradient_norm(const SourceSpec& f, const Point& x, int dim) {
    const double r = radius_of(x);
    auto power_part = [&](double a) {
        if (r == 0.0) return a > 1.0 ? 0.0 : (a == 1.0 ? 1.0 : std::numeric_limits<double>::infinity());
        return a * std::pow(r, a - 1.0);
    };
    switch (f.family) {
        case SourceFamily::power:
        case SourceFamily::shifted_power: return power_part(f.alpha);
        case SourceFamily::power_oscillating: {
            if (r == 0.0) return power_part(f.alpha) * (2.0);
            const double d = f.alpha * std::pow(r, f.alpha - 1.0) * (2.0 + f.osc_amp * std::sin(r)) +
                             std::pow(r, f.alpha) * f.osc_amp * std::cos(r);
            return std::abs(d);
        }
        case SourceFamily::closed_form:
            if (f.grad_norm) return f.grad_norm(x);
            [[fallthrough]];
        case SourceFamily::custom_table: {
            double g2 = 0.0;
            for (int k = 0; k < dim; ++k) {
                const double d = 1e-5 * std::max(1.0, std::abs(x[k]));
                Point a = x, b = x;
                a[k] += d;
                b[k] -= d;
                double fa, fb, span;
                if (f.family == SourceFamily::custom_table) {
                    // one-sided near the table edge
                    const bool ia = f.table->contains(a), ib = f.table->contains(b);
                    if (!ia && !ib) fail(ErrorKind::contract, "gradient probe outside table");
                    fa = eval_source(f, ia ? a : x);
                    fb = eval_source(f, ib ? b : x);
                    span = (ia ? d : 0.0) + (ib ? d : 0.0);
                } else {
                    fa = eval_source(f, a);
                    fb = eval_source(f, b);
                    span = 2.0 * d;
                }
                const double g = (fa - fb) / span;
                g2 += g * g;
            }
            return std::sqrt(g2);
        }
    }
    return 0.0;
}

enum class InitialFamily { zero, quadratic_bowl, bump, custom_table, closed_form };

inline const char* to_string(InitialFamily f) {
    switch (f) {
        case InitialFamily::zero: return "zero";
        case InitialFamily::quadratic_bowl: return "quadratic_bowl";
        case InitialFamily::bump: return "bump";
        case InitialFamily::custom_table: return "custom_table";
        case InitialFamily::closed_form: return "closed_form";
    }
    return "unknown";
}

/// Initial datum u0. Every family accepts an additive `offset`.
struct InitialSpec {
    InitialFamily family = InitialFamily::zero;
    double a = 0.5;             ///< quadratic_bowl: u0 = a|x|² + offset
    double offset = 0.0;
    double amp = 1.0;           ///< bump: amp·exp(-|x - center|²/width²) + offset
    Point center{0.0, 0.0};
    double width = 1.0;
    std::string table_path;
    std::shared_ptr<const Table> table;
    std::function<double(const Point&)> fn;
    std::string label;

    static InitialSpec zero() { return {}; }
    static InitialSpec bowl(double a, double offset = 0.0) {
        InitialSpec s;
        s.family = InitialFamily::quadratic_bowl;
        s.a = a;
        s.offset = offset;
        return s;
    }
    static InitialSpec make_bump(double amp, double width, Point center = {0.0, 0.0}) {
        InitialSpec s;
        s.family = InitialFamily::bump;
        s.amp = amp;
        s.width = width;
        s.center = center;
        return s;
    }
    static InitialSpec closed(std::function<double(const Point&)> f, std::string label) {
        InitialSpec s;
        s.family = InitialFamily::closed_form;
        s.fn = std::move(f);
        s.label = std::move(label);
        return s;
    }
};

inline double eval_initial(const InitialSpec& u0, const Point& x) {
    switch (u0.family) {
        case InitialFamily::zero: return u0.offset;
        case InitialFamily::quadratic_bowl: return u0.a * (x[0] * x[0] + x[1] * x[1]) + u0.offset;
        case InitialFamily::bump: {
            const double dx = x[0] - u0.center[0], dy = x[1] - u0.center[1];
            return u0.amp * std::exp(-(dx * dx + dy * dy) / (u0.width * u0.width)) + u0.offset;
        }
        case InitialFamily::custom_table: return u0.table->eval(x) + u0.offset;
        case InitialFamily::closed_form: return u0.fn(x) + u0.offset;
    }
    return 0.0;
}

/// The triple (m, f, u0) in dimension N.
struct ProblemSpec {
    double m = 2.0;
    SourceSpec f;
    InitialSpec u0;
    int dim = 1;

    /// m* = m/(m-1); at least 2 on the admissible range.
    double conjugate_exponent() const { return m / (m - 1.0); }

    void validate() const {
        if (!(m > 1.0 && m <= 2.0))
            fail(ErrorKind::config, "m = " + format_double(m) + " outside (1, 2]; the superquadratic case is not supported");
        if (dim != 1 && dim != 2) fail(ErrorKind::config, "dim must be 1 or 2, got " + std::to_string(dim));
        if (f.shift < 0.0) fail(ErrorKind::config, "source shift must be >= 0");
        switch (f.family) {
            case SourceFamily::power:
            case SourceFamily::shifted_power:
                if (!(f.alpha > 0.0)) fail(ErrorKind::config, "source alpha must be > 0");
                break;
            case SourceFamily::power_oscillating:
                if (!(f.alpha > 0.0)) fail(ErrorKind::config, "source alpha must be > 0");
                if (!(f.osc_amp >= 0.0 && f.osc_amp < 2.0))
                    fail(ErrorKind::config, "power_oscillating requires 0 <= osc_amp < 2");
                break;
            case SourceFamily::custom_table:
                if (!f.table) fail(ErrorKind::config, "custom_table source without table data");
                if (f.table->dim != dim) fail(ErrorKind::config, "source table dimension does not match problem dim");
                break;
            case SourceFamily::closed_form:
                if (!f.fn) fail(ErrorKind::config, "closed_form source without a function");
                break;
        }
        switch (u0.family) {
            case InitialFamily::zero: break;
            case InitialFamily::quadratic_bowl:
                if (u0.a < 0.0) fail(ErrorKind::config, "quadratic_bowl requires a >= 0");
                break;
            case InitialFamily::bump:
                if (u0.amp < 0.0 || !(u0.width > 0.0)) fail(ErrorKind::config, "bump requires amp >= 0 and width > 0");
                break;
            case InitialFamily::custom_table:
                if (!u0.table) fail(ErrorKind::config, "custom_table initial datum without table data");
                if (u0.table->dim != dim) fail(ErrorKind::config, "initial table dimension does not match problem dim");
                if (u0.table->min_value() + u0.offset < 0.0) fail(ErrorKind::config, "initial datum must be >= 0");
                break;
            case InitialFamily::closed_form:
                if (!u0.fn) fail(ErrorKind::config, "closed_form initial datum without a function");
                break;
        }
        if (u0.offset < 0.0 && u0.family != InitialFamily::custom_table)
            fail(ErrorKind::config, "initial offset must be >= 0");
    }
};

// ---------------------------------------------------------------------------
// Hypothesis validators

/// Unit directions used for sampling: ±1 in 1D, `count` equispaced angles in 2D.
inline std::vector<Point> sample_directions(int dim, int count = 64) {
    if (dim == 1) return {Point{1.0, 0.0}, Point{-1.0, 0.0}};
    std::vector<Point> d;
    d.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        const double th = 2.0 * std::numbers::pi * k / count;
        d.push_back({std::cos(th), std::sin(th)});
    }
    return d;
}

struct EnvelopeOptions {
    int directions = 64;       ///< angles per radius in 2D (at least 64)
    int radial_samples = 2048;  ///< samples on [r, reach(r)]
};

/// Smallest value of f on the sphere of radius s, over sampled directions.
/// Points outside a table's range are skipped; returns +inf if none remain.
inline double radial_minimum(const SourceSpec& f, double s, const std::vector<Point>& dirs) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& d : dirs) {
        const Point x{s * d[0], s * d[1]};
        if (f.family == SourceFamily::custom_table && !f.table->contains(x)) continue;
        best = std::min(best, eval_source(f, x));
    }
    return best;
}

/// Outer radius beyond which the built-in families exceed the values they
/// take near radius r, so inf_{|x|≥r} f is attained inside [r, reach].
inline double envelope_reach(const SourceSpec& f, double r) {
    switch (f.family) {
        case SourceFamily::power:
        case SourceFamily::shifted_power: return 2.0 * r + 1.0;
        case SourceFamily::power_oscillating: {
            const double q = std::pow((2.0 + f.osc_amp) / (2.0 - f.osc_amp), 1.0 / f.alpha);
            return q * r + 2.0 * std::numbers::pi + 1.0;
        }
        case SourceFamily::custom_table: {
            const double ex = std::max(std::abs(f.table->x_min()), std::abs(f.table->x_max()));
            const double ey = std::max(std::abs(f.table->y_min()), std::abs(f.table->y_max()));
            return std::hypot(ex, ey);
        }
        case SourceFamily::closed_form: return 4.0 * r + 16.0;
    }
    return 2.0 * r + 1.0;
}

/// Envelope inf over sampled directions and radii ≥ r of f, at one radius.
inline double envelope_at(const SourceSpec& f, int dim, double r, const EnvelopeOptions& opt = {}) {
    const auto dirs = sample_directions(dim, std::max(64, opt.directions));
    const double reach = std::max(envelope_reach(f, r), r);
    double best = radial_minimum(f, r, dirs);
    const int n = std::max(2, opt.radial_samples);
    for (int k = 1; k <= n; ++k) {
        const double s = r + (reach - r) * k / n;
        best = std::min(best, radial_minimum(f, s, dirs));
    }
    if (!std::isfinite(best))
        fail(ErrorKind::contract, "coercivity envelope: radius " + format_double(r) + " lies outside the table range");
    return best;
}

/// φ(r) := inf_{|x| ≥ r} f(x) by direction and radius sampling, for each radius.
inline std::vector<double> coercivity_envelope(const SourceSpec& f, const std::vector<double>& radii, int dim,
                                               const EnvelopeOptions& opt = {}) {
    for (std::size_t k = 0; k < radii.size(); ++k) {
        if (!(radii[k] >= 0.0)) fail(ErrorKind::contract, "coercivity_envelope: radii must be >= 0");
        if (k > 0 && !(radii[k] > radii[k - 1])) fail(ErrorKind::contract, "coercivity_envelope: radii must increase");
    }
    std::vector<double> out;
    out.reserve(radii.size());
    for (double r : radii) out.push_back(envelope_at(f, dim, r, opt));
    // {|x| >= r_k} contains {|x| >= r_{k+1}}, so the samples taken for larger
    // radii also bound the infimum at smaller ones.
    for (std::size_t k = out.size(); k-- > 1;) out[k - 1] = std::min(out[k - 1], out[k]);
    return out;
}

struct H1Report {
    std::vector<double> radii;
    std::vector<double> envelope;
    std::vector<double> radial_min;  ///< min over directions at exactly radius r
    bool envelope_monotone = true;
    bool tail_growing = true;
    bool radial_monotone_tail = true;
    bool plausible = true;
    std::string note;
};

/// Numerical coercivity certificate. The envelope must be nondecreasing and
/// still growing over the last three radii; tabulated sources must
/// additionally have a radial minimum that is nondecreasing over the tail.
inline H1Report certify_h1(const SourceSpec& f, int dim, const std::vector<double>& radii,
                           const EnvelopeOptions& opt = {}) {
    if (radii.size() < 3) fail(ErrorKind::contract, "certify_h1: need at least three radii");
    H1Report rep;
    rep.radii = radii;
    rep.envelope = coercivity_envelope(f, radii, dim, opt);
    const auto dirs = sample_directions(dim, std::max(64, opt.directions));
    for (double r : radii) rep.radial_min.push_back(radial_minimum(f, r, dirs));
    const std::size_t n = radii.size();
    for (std::size_t k = 1; k < n; ++k)
        if (rep.envelope[k] < rep.envelope[k - 1]) rep.envelope_monotone = false;
    for (std::size_t k = n - 2; k < n; ++k) {
        const double tol = 1e-9 * (1.0 + std::abs(rep.envelope[k - 1]));
        if (!(rep.envelope[k] > rep.envelope[k - 1] + tol)) rep.tail_growing = false;
    }
    if (f.family == SourceFamily::custom_table) {
        for (std::size_t k = n / 2 + 1; k < n; ++k)
            if (rep.radial_min[k] < rep.radial_min[k - 1]) rep.radial_monotone_tail = false;
    }
    rep.plausible = rep.envelope_monotone && rep.tail_growing && rep.radial_monotone_tail;
    if (!rep.envelope_monotone) rep.note = "envelope decreases between sampled radii";
    else if (!rep.tail_growing) rep.note = "envelope stops growing over the sampled tail (bounded tail)";
    else if (!rep.radial_monotone_tail) rep.note = "radial minimum of the table is non-monotone over the tail";
    return rep;
}

struct H2Report {
    std::vector<double> radii;
    std::vector<double> ratios;       ///< NaN where skipped
    std::vector<std::size_t> skipped;  ///< indices with f = 0 at a sample
    double median = 0.0;
    bool plausible = false;
};

inline double median_of(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Ratio |Df|^{1/(2m-1)} / |f|^{1/m}, maximized over sampled directions at
/// each radius. "Plausible" means the second half of the sequence stays below
/// twice the median of all evaluated ratios.
inline H2Report check_h2_ratio(const SourceSpec& f, double m, const std::vector<double>& radii, int dim,
                               int directions = 64) {
    if (!(m > 1.0 && m <= 2.0)) fail(ErrorKind::contract, "check_h2_ratio: m outside (1, 2]");
    H2Report rep;
    rep.radii = radii;
    const auto dirs = sample_directions(dim, std::max(64, directions));
    const double ge = 1.0 / (2.0 * m - 1.0), fe = 1.0 / m;
    std::vector<double> valid;
    for (std::size_t k = 0; k < radii.size(); ++k) {
        double best = -1.0;
        bool skip = false;
        for (const auto& d : dirs) {
            const Point x{radii[k] * d[0], radii[k] * d[1]};
            if (f.family == SourceFamily::custom_table && !f.table->contains(x)) continue;
            const double fv = eval_source(f, x);
            if (fv == 0.0) {
                skip = true;
                break;
            }
            const double g = source_gradient_norm(f, x, dim);
            best = std::max(best, std::pow(g, ge) / std::pow(std::abs(fv), fe));
        }
        if (skip || best < 0.0 || !std::isfinite(best)) {
            rep.skipped.push_back(k);
            rep.ratios.push_back(std::nan(""));
        } else {
            rep.ratios.push_back(best);
            valid.push_back(best);
        }
    }
    if (valid.size() >= 2) {
        rep.median = median_of(valid);
        double tail = 0.0;
        for (std::size_t k = valid.size() / 2; k < valid.size(); ++k) tail = std::max(tail, valid[k]);
        rep.plausible = tail <= 2.0 * rep.median;
    }
    return rep;
}

}  // namespace vhj
