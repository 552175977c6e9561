#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "vhj/error.hpp"
#include "vhj/format.hpp"
#include "vhj/grid.hpp"
#include "vhj/parabolic.hpp"
#include "vhj/problem.hpp"
#include "vhj/scheme.hpp"

namespace vhj {

enum class ApproxKind { state_constraint, periodic };

inline const char* to_string(ApproxKind k) { return k == ApproxKind::state_constraint ? "state_constraint" : "periodic"; }

/// Slope-stabilization rule and its outcome for one run.
struct StoppingInfo {
    bool converged = false;
    double slope_tol = 1e-3;
    int consecutive = 5;
    double delta_T = 1.0;
    double max_time = 50.0;
    double final_time = 0.0;
    std::size_t steps = 0;
    std::vector<double> times;   ///< sample times carrying a slope
    std::vector<double> slopes;  ///< λ(t) at those times

    std::string describe() const {
        std::ostringstream os;
        os << "|lambda(t) - lambda(t - " << format_double(delta_T) << ")| < " << format_double(slope_tol) << " for "
           << consecutive << " consecutive samples, max_time " << format_double(max_time) << "; "
           << (converged ? "converged" : "NOT converged") << " at t = " << format_double(final_time) << " after "
           << steps << " steps";
        return os.str();
    }
};

/// One ergodic pair (constant, profile) on a box or torus.
struct ErgodicApprox {
    ApproxKind kind = ApproxKind::state_constraint;
    double half_width = 0.0;  ///< R for a box, S_R for a torus
    double cutoff = std::numeric_limits<double>::quiet_NaN();  ///< R in min(f, R); periodic runs only
    double constant = 0.0;    ///< λ_R or ν_R
    GridFunction profile;     ///< vanishes at the origin
    GridFunction source;      ///< sampled f (or min(f, R)) on the same grid
    GridFunction full_source; ///< unclipped f on the same grid
    double residual_norm = 0.0;
    double residual_window = 0.0;
    double m = 2.0;
    HamiltonianKind hamiltonian = HamiltonianKind::hybrid;
    StoppingInfo stopping;
};

struct ErgodicConfig {
    SchemeConfig scheme;
    int nodes_per_axis = 321;  ///< h = 2R/(n-1), i.e. h = R/160 by default
    double max_h = 0.0;        ///< > 0 raises n until h <= max_h
    double slope_tol = 1e-3;
    int consecutive = 5;
    double delta_T = 1.0;
    double max_time = 50.0;
    double window = -1.0;  ///< averaging window K for the slope; negative is min(2, W/4)

    void validate() const {
        scheme.validate();
        if (nodes_per_axis < 9 || nodes_per_axis % 2 == 0) fail(ErrorKind::config, "nodes_per_axis must be odd and >= 9");
        if (max_h < 0.0) fail(ErrorKind::config, "max_h must be >= 0");
        if (!(slope_tol > 0.0)) fail(ErrorKind::config, "slope_tol must be > 0");
        if (consecutive < 1) fail(ErrorKind::config, "consecutive must be >= 1");
        if (!(delta_T > 0.0)) fail(ErrorKind::config, "delta_T must be > 0");
        if (!(max_time >= 2.0 * delta_T)) fail(ErrorKind::config, "max_time must be at least 2 delta_T");
    }

    /// Nodes per axis for half-width W under this resolution policy.
    int nodes_for(double half_width) const {
        int n = nodes_per_axis;
        if (max_h > 0.0) {
            const int need = static_cast<int>(std::ceil(2.0 * half_width / max_h - 1e-9)) + 1;
            n = std::max(n, need % 2 ? need : need + 1);
        }
        return n;
    }
};

inline Stencil evolution_stencil(HamiltonianKind k) {
    return k == HamiltonianKind::rouy_tourin ? Stencil::upwind : Stencil::hybrid;
}

/// Long-time solve of λ - Δφ + |Dφ|^m = f on a given grid from u0 = 0. The
/// boundary rule follows the grid kind.
inline ErgodicApprox solve_ergodic_on(const Grid& grid, const GridFunction& f, double m, const ErgodicConfig& cfg) {
    cfg.validate();
    require_same_grid(GridFunction(grid), f, "solve_ergodic_on");
    f.require_finite("ergodic source");
    const EvolutionOperator op(grid, f.values, m, cfg.scheme);

    EvolveOptions opt;
    opt.sample_interval = cfg.delta_T;
    opt.slope_lag = cfg.delta_T;
    opt.window = cfg.window;
    opt.keep_snapshots = false;
    opt.holder_max_gap = cfg.delta_T;
    StoppingInfo info;
    info.slope_tol = cfg.slope_tol;
    info.consecutive = cfg.consecutive;
    info.delta_T = cfg.delta_T;
    info.max_time = cfg.max_time;
    int good = 0;
    opt.stop = [&](const EvolutionState& s) {
        const double sl = s.trace.records.back().slope;
        if (std::isnan(sl)) return false;
        const bool small = !info.slopes.empty() && std::abs(sl - info.slopes.back()) < cfg.slope_tol;
        good = small ? good + 1 : 0;
        info.times.push_back(s.t);
        info.slopes.push_back(sl);
        return good >= cfg.consecutive;
    };
    const EvolutionState st = evolve(op, GridFunction(grid), cfg.max_time, cfg.scheme, opt);
    st.u.require_finite("ergodic solve");
    info.converged = good >= cfg.consecutive;
    info.final_time = st.t;
    info.steps = st.steps;

    ErgodicApprox out;
    out.kind = grid.kind() == GridKind::box ? ApproxKind::state_constraint : ApproxKind::periodic;
    out.half_width = grid.half_width();
    out.constant = info.slopes.empty() ? std::numeric_limits<double>::quiet_NaN() : info.slopes.back();
    const double u0 = st.u.at_origin();
    out.profile = transform(st.u, [u0](double v) { return v - u0; });
    out.source = f;
    out.full_source = f;
    out.m = m;
    out.hamiltonian = op.kind();
    out.stopping = info;

    // Residual on the inner half-window, with the stencil used for evolution.
    const Grid inner = interior_grid(grid);
    out.residual_window = std::min(align_down(grid, 0.5 * grid.half_width()), inner.half_count() * grid.h());
    const GridFunction r =
        restrict(residual_ergodic(out.constant, out.profile, f, m, evolution_stencil(op.kind())), out.residual_window);
    double rn = 0.0;
    for (double v : r.values) rn = std::max(rn, std::abs(v));
    out.residual_norm = rn;
    return out;
}

/// (λ_R, φ_R) on the box B_R = [-R, R]^N with the state-constraint rule.
inline ErgodicApprox solve_state_constraint(const ProblemSpec& problem, double R, const ErgodicConfig& cfg = {}) {
    problem.validate();
    if (!(R > 0.0)) fail(ErrorKind::contract, "solve_state_constraint: R must be > 0");
    const Grid g = Grid::box(problem.dim, R, cfg.nodes_for(R));
    return solve_ergodic_on(g, sample(problem.f, g), problem.m, cfg);
}

/// Smallest radius S with inf_{|x| >= S} f >= cutoff, found by doubling and
/// bisection on the sampled envelope and rounded up to a multiple of 1/8.
inline double compute_S_R(const SourceSpec& f, double cutoff, int dim = 1, const EnvelopeOptions& env = {}) {
    if (!std::isfinite(cutoff)) fail(ErrorKind::contract, "compute_S_R: cutoff must be finite");
    auto env_at = [&](double r) { return envelope_at(f, dim, r, env); };
    if (env_at(0.0) >= cutoff)
        fail(ErrorKind::contract, "compute_S_R: cutoff " + format_double(cutoff) + " does not exceed min f");
    double lo = 0.0, hi = 1.0;
    const double search_max = f.family == SourceFamily::custom_table ? envelope_reach(f, 0.0) : 1.0e6;
    while (env_at(hi) < cutoff) {
        lo = hi;
        hi *= 2.0;
        if (hi > search_max) {
            if (f.family == SourceFamily::custom_table && env_at(search_max) >= cutoff) {
                hi = search_max;
                break;
            }
            fail(ErrorKind::config, "coercivity failure: envelope stays below cutoff " + format_double(cutoff) +
                                        " up to radius " + format_double(std::min(hi, search_max)));
        }
    }
    for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (env_at(mid) >= cutoff ? hi : lo) = mid;
    }
    const double eighths = hi * 8.0;
    return std::ceil(eighths - 1e-9 * std::max(1.0, eighths)) / 8.0;
}

/// (ν_R, ψ_R) on the torus of half-width S_R with source min(f, cutoff).
inline ErgodicApprox solve_periodic(const ProblemSpec& problem, double cutoff, const ErgodicConfig& cfg = {}) {
    problem.validate();
    const double S = compute_S_R(problem.f, cutoff, problem.dim);
    const Grid g = Grid::torus(problem.dim, S, cfg.nodes_for(S));
    const GridFunction f = sample(problem.f, g);
    const GridFunction fR = transform(f, [cutoff](double v) { return std::min(v, cutoff); });
    ErgodicApprox a = solve_ergodic_on(g, fR, problem.m, cfg);
    a.cutoff = cutoff;
    a.full_source = f;
    return a;
}

// ---------------------------------------------------------------------------
// λ* from both routes

struct LambdaSource {
    ApproxKind kind;
    double half_width;
    double cutoff;
    double constant;
};

struct LambdaStarEstimate {
    double value = 0.0;
    double upper_bracket = 0.0;  ///< min λ_R
    double lower_bracket = -std::numeric_limits<double>::infinity();  ///< max ν_R (heuristic)
    double gap = std::numeric_limits<double>::infinity();
    bool lower_heuristic = true;
    std::string method;  ///< richardson, midpoint, upper_only or single
    std::vector<LambdaSource> sources;
};

/**
 * Combines state-constraint and periodic runs. With three or more box runs
 * the value is the quadratic extrapolation of λ_R in 1/R to 1/R = 0 from the
 * three largest R, clamped into the bracket; otherwise the bracket midpoint,
 * or the single λ_R when no periodic run is given. A lower bracket above the
 * upper one by more than `bracket_tol` is an inconsistency.
 */
inline LambdaStarEstimate estimate_lambda_star(std::vector<ErgodicApprox> state_runs,
                                               const std::vector<ErgodicApprox>& periodic_runs,
                                               double bracket_tol = 1e-2) {
    if (state_runs.empty()) fail(ErrorKind::contract, "estimate_lambda_star: at least one state-constraint run required");
    for (const auto& a : state_runs)
        if (a.kind != ApproxKind::state_constraint) fail(ErrorKind::contract, "estimate_lambda_star: wrong run kind");
    for (const auto& a : periodic_runs)
        if (a.kind != ApproxKind::periodic) fail(ErrorKind::contract, "estimate_lambda_star: wrong run kind");
    std::sort(state_runs.begin(), state_runs.end(),
              [](const ErgodicApprox& a, const ErgodicApprox& b) { return a.half_width < b.half_width; });

    LambdaStarEstimate e;
    e.upper_bracket = std::numeric_limits<double>::infinity();
    for (const auto& a : state_runs) {
        e.upper_bracket = std::min(e.upper_bracket, a.constant);
        e.sources.push_back({a.kind, a.half_width, a.cutoff, a.constant});
    }
    for (const auto& a : periodic_runs) {
        e.lower_bracket = std::max(e.lower_bracket, a.constant);
        e.sources.push_back({a.kind, a.half_width, a.cutoff, a.constant});
    }
    if (periodic_runs.empty()) {
        e.value = e.upper_bracket;
        e.method = state_runs.size() == 1 ? "single" : "upper_only";
        return e;
    }
    if (e.lower_bracket > e.upper_bracket + bracket_tol) {
        std::ostringstream os;
        os << "lambda* brackets cross: periodic lower side " << format_double(e.lower_bracket)
           << " exceeds state-constraint upper side " << format_double(e.upper_bracket)
           << " (under-resolution suspected)";
        fail(ErrorKind::inconsistency, os.str());
    }
    e.gap = e.upper_bracket - e.lower_bracket;
    const double lo = std::min(e.lower_bracket, e.upper_bracket), hi = std::max(e.lower_bracket, e.upper_bracket);
    if (state_runs.size() >= 3) {
        const std::size_t n = state_runs.size();
        double z[3], y[3];
        for (int k = 0; k < 3; ++k) {
            z[k] = 1.0 / state_runs[n - 3 + k].half_width;
            y[k] = state_runs[n - 3 + k].constant;
        }
        // Lagrange polynomial through (z_k, y_k) evaluated at z = 0.
        double v = 0.0;
        for (int a = 0; a < 3; ++a) {
            double w = 1.0;
            for (int b = 0; b < 3; ++b)
                if (b != a) w *= (0.0 - z[b]) / (z[a] - z[b]);
            v += w * y[a];
        }
        e.value = std::clamp(v, lo, hi);
        e.method = "richardson";
    } else {
        e.value = 0.5 * (lo + hi);
        e.method = "midpoint";
    }
    return e;
}

// ---------------------------------------------------------------------------
// Simplicity checks

struct ScalingReport {
    double mu = 1.0;
    bool mu_clamped = false;
    double residual = 0.0;   ///< min of the scaled supersolution residual
    double window = 0.0;
    double threshold = 0.0;  ///< -C·h²
    bool pass = false;
};

/// μ_R = 1 + λ_R - λ* and the scaled supersolution residual on the inner
/// half-window, with verdict residual >= -C·h². A μ_R below 1 by more than
/// `tol` contradicts λ_R >= λ*.
inline ScalingReport scaling_check_super(const ErgodicApprox& approx, double lambda_star, const GridFunction& f,
                                         double m, double C, double tol = 1e-2, double mu_override = -1.0) {
    if (approx.kind != ApproxKind::state_constraint)
        fail(ErrorKind::contract, "scaling_check_super: state-constraint run required");
    ScalingReport rep;
    double mu = mu_override > 0.0 ? mu_override : 1.0 + approx.constant - lambda_star;
    if (mu < 1.0 - tol) {
        fail(ErrorKind::inconsistency, "scaling_check_super: mu_R = " + format_double(mu) +
                                           " < 1, i.e. lambda_R below lambda* (bracketing inconsistency)");
    }
    if (mu < 1.0) {
        mu = 1.0;
        rep.mu_clamped = true;
    }
    rep.mu = mu;
    const Grid& g = approx.profile.grid;
    rep.window = std::min(align_down(g, 0.5 * g.half_width()), (g.half_count() - 1) * g.h());
    rep.residual = residual_scaled_super(mu, approx.constant, approx.profile, f, m, rep.window);
    rep.threshold = -C * g.h() * g.h();
    rep.pass = rep.residual >= rep.threshold;
    return rep;
}

struct ArgmaxReport {
    std::size_t node = 0;
    Point x{0.0, 0.0};
    double radius = 0.0;
    double value = 0.0;  ///< max of v - μ_R φ_R
    double f_at = 0.0;
    double bound = 0.0;  ///< 1 + λ_1 + tol
    double mu = 1.0;
    std::size_t ties = 1;
    bool on_boundary = false;
    bool pass = false;
};

/// x_R = argmax(v - μ_R φ_R) with ties within tie_tol grouped (origin first,
/// then the smallest node index), and the verdict f(x_R) <= 1 + λ_1 + tol.
/// mu_override > 0 replaces μ_R = max(1, 1 + λ_R - λ*).
inline ArgmaxReport argmax_confinement(const GridFunction& v, const ErgodicApprox& approx, double lambda_star,
                                       double lambda_1, const GridFunction& f, double tol = 0.05,
                                       double tie_tol = 1e-12, double mu_override = -1.0) {
    if (!(tie_tol >= 0.0)) fail(ErrorKind::contract, "argmax_confinement: tie tolerance must be >= 0");
    require_same_grid(v, approx.profile, "argmax_confinement");
    require_same_grid(f, approx.profile, "argmax_confinement");
    ArgmaxReport rep;
    rep.mu = mu_override > 0.0 ? mu_override : std::max(1.0, 1.0 + approx.constant - lambda_star);
    std::vector<double> w(v.size());
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < v.size(); ++k) {
        w[k] = v.values[k] - rep.mu * approx.profile.values[k];
        best = std::max(best, w[k]);
    }
    const std::size_t origin = v.grid.origin();
    std::size_t pick = v.size();
    rep.ties = 0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (w[k] < best - tie_tol) continue;
        ++rep.ties;
        if (pick == v.size()) pick = k;
    }
    if (w[origin] >= best - tie_tol) pick = origin;
    rep.node = pick;
    rep.x = v.grid.point(pick);
    rep.radius = std::hypot(rep.x[0], rep.x[1]);
    rep.value = w[pick];
    rep.f_at = f.values[pick];
    rep.bound = 1.0 + lambda_1 + tol;
    rep.on_boundary = v.grid.is_boundary(pick);
    rep.pass = rep.f_at <= rep.bound && !rep.on_boundary;
    return rep;
}

}  // namespace vhj
