#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "vhj/error.hpp"
#include "vhj/format.hpp"
#include "vhj/grid.hpp"
#include "vhj/problem.hpp"
#include "vhj/scheme.hpp"

namespace vhj {

enum class BoundaryKind { state_constraint, periodic };

inline BoundaryKind boundary_of(const Grid& g) {
    return g.kind() == GridKind::box ? BoundaryKind::state_constraint : BoundaryKind::periodic;
}

/// One sampled diagnostic record.
struct TraceRecord {
    double t = 0.0;
    double slope = std::numeric_limits<double>::quiet_NaN();  ///< [mean_K u(t) - mean_K u(t-ΔT)]/ΔT
    double max_grad = 0.0;                                    ///< max one-sided difference on K
    double holder_q = std::numeric_limits<double>::quiet_NaN();
    double dt = 0.0;  ///< last accepted time step
};

struct Snapshot {
    double t = 0.0;
    GridFunction u;  ///< restricted to the trace window (or the full grid for full snapshots)
};

struct DiagnosticsTrace {
    double window = 0.0;    ///< half-width of K
    double delta_T = 1.0;   ///< slope lag
    double holder_tau = 0.1;
    double holder_max_gap = 1.0;
    std::vector<TraceRecord> records;
    std::vector<double> window_means;
    std::vector<Snapshot> snapshots;       ///< u restricted to K at each sample
    std::vector<Snapshot> full_snapshots;  ///< full-grid u, when requested
};

struct EvolutionState {
    double t = 0.0;
    GridFunction u;
    DiagnosticsTrace trace;
    std::size_t steps = 0;
};

struct EvolveOptions {
    double sample_interval = 1.0;
    double slope_lag = 1.0;   ///< ΔT, a multiple of the sampling interval
    double window = -1.0;     ///< K half-width; negative selects min(2, W/4)
    bool keep_snapshots = true;
    bool keep_full_snapshots = false;
    double holder_tau = 0.1;
    double holder_max_gap = 1.0;
    double fixed_dt = 0.0;     ///< > 0 disables the adaptive rule
    std::function<bool(const EvolutionState&)> stop;  ///< checked after every sample
};

// ---------------------------------------------------------------------------
// Diagnostics

/// Max one-sided difference magnitude over the centered window, using only
/// differences between nodes of the window. Per node the axis-wise maxima are
/// combined in the Euclidean norm.
inline double gradient_monitor(const GridFunction& u, double inner_window) {
    const Grid& g = u.grid;
    const int k = aligned_half_count(g, inner_window);
    if (g.kind() == GridKind::box && k >= g.half_count())
        fail(ErrorKind::contract, "gradient_monitor: window touches the box boundary");
    const GridFunction w = restrict(u, inner_window);
    const Grid& s = w.grid;
    const int a = s.axis_size();
    const double ih = 1.0 / g.h();
    double best = 0.0;
    for (std::size_t node = 0; node < s.size(); ++node) {
        double sq = 0.0;
        for (int ax = 0; ax < s.dim(); ++ax) {
            const int i = ax == 0 ? s.ix(node) : s.iy(node);
            const std::size_t stride = ax == 0 ? 1 : static_cast<std::size_t>(a);
            double d = 0.0;
            if (i > 0) d = std::max(d, std::abs(w.values[node] - w.values[node - stride]) * ih);
            if (i < a - 1) d = std::max(d, std::abs(w.values[node + stride] - w.values[node]) * ih);
            sq += d * d;
        }
        best = std::max(best, std::sqrt(sq));
    }
    return best;
}

struct GradientBoundReport {
    double max_grad = 0.0;
    double window = 0.0;
    double enclosing_window = 0.0;
    double rhs = 0.0;  ///< 1 + sup f^{1/m} + sup |D_h f|^{1/(2m-1)} on the enclosing window
    double ratio = 0.0;
};

/// Gradient monitor plus the ratio against the interior gradient bound, with
/// the unknown constant left out. The enclosing window is one unit wider.
inline GradientBoundReport gradient_bound_ratio(const GridFunction& u, const GridFunction& f, double m,
                                                double inner_window) {
    require_same_grid(u, f, "gradient_bound_ratio");
    GradientBoundReport rep;
    rep.window = inner_window;
    rep.max_grad = gradient_monitor(u, inner_window);
    const Grid& g = u.grid;
    const double enc = std::min(align_down(g, inner_window + 1.0), g.half_count() * g.h());
    rep.enclosing_window = enc;
    const GridFunction fw = restrict(f, enc);
    double fsup = 0.0;
    for (double v : fw.values) fsup = std::max(fsup, std::pow(std::max(v, 0.0), 1.0 / m));
    const Grid& s = fw.grid;
    const int a = s.axis_size();
    const double ih = 1.0 / g.h();
    double dsup = 0.0;
    for (std::size_t node = 0; node < s.size(); ++node) {
        double sq = 0.0;
        for (int ax = 0; ax < s.dim(); ++ax) {
            const int i = ax == 0 ? s.ix(node) : s.iy(node);
            const std::size_t stride = ax == 0 ? 1 : static_cast<std::size_t>(a);
            double d = 0.0;
            if (i > 0) d = std::max(d, std::abs(fw.values[node] - fw.values[node - stride]) * ih);
            if (i < a - 1) d = std::max(d, std::abs(fw.values[node + stride] - fw.values[node]) * ih);
            sq += d * d;
        }
        dsup = std::max(dsup, std::sqrt(sq));
    }
    rep.rhs = 1.0 + fsup + std::pow(dsup, 1.0 / (2.0 * m - 1.0));
    rep.ratio = rep.max_grad / rep.rhs;
    return rep;
}

/// Quotient sup_K |u(t) - u(s)| / |t - s|^{1/2} between one snapshot and the
/// earlier ones with s ≥ τ and t - s ≤ max_gap.
inline double holder_against_history(const Snapshot& now, const std::vector<Snapshot>& earlier, double tau,
                                     double max_gap) {
    double q = std::numeric_limits<double>::quiet_NaN();
    if (now.t < tau) return q;
    for (const auto& s : earlier) {
        const double gap = now.t - s.t;
        if (s.t < tau || !(gap > 0.0) || gap > max_gap * (1.0 + 1e-12)) continue;
        const double d = sup_norm_diff(now.u, s.u) / std::sqrt(gap);
        q = std::isnan(q) ? d : std::max(q, d);
    }
    return q;
}

/// Max over sample pairs (t, s), t ≠ s, both ≥ τ and at most `max_gap` apart,
/// of sup_K |u(t) - u(s)| / |t - s|^{1/2}. A negative window uses the trace
/// window; a smaller one restricts the snapshots first.
inline double holder_quotient(const DiagnosticsTrace& trace, double window = -1.0, double tau = -1.0,
                              double max_gap = -1.0) {
    if (tau < 0.0) tau = trace.holder_tau;
    if (max_gap < 0.0) max_gap = trace.holder_max_gap;
    std::vector<Snapshot> snaps;
    for (const auto& s : trace.snapshots) {
        if (s.t < tau) continue;
        snaps.push_back(window < 0.0 ? s : Snapshot{s.t, restrict(s.u, window)});
    }
    if (snaps.size() < 2) fail(ErrorKind::contract, "holder_quotient: fewer than 2 samples at times >= tau");
    double q = 0.0;
    bool any = false;
    for (std::size_t a = 1; a < snaps.size(); ++a) {
        for (std::size_t b = 0; b < a; ++b) {
            const double gap = snaps[a].t - snaps[b].t;
            if (!(gap > 0.0) || gap > max_gap * (1.0 + 1e-12)) continue;
            q = std::max(q, sup_norm_diff(snaps[a].u, snaps[b].u) / std::sqrt(gap));
            any = true;
        }
    }
    if (!any) fail(ErrorKind::contract, "holder_quotient: no sample pair within the maximal gap");
    return q;
}

inline void write_trace_csv(const DiagnosticsTrace& trace, std::ostream& os,
                            const std::vector<std::string>& comments = {}) {
    for (const auto& c : comments) os << "# " << c << "\n";
    os << "t,slope,max_grad,holder_q,dt\n";
    for (const auto& r : trace.records)
        os << format_double(r.t) << "," << format_double(r.slope) << "," << format_double(r.max_grad) << ","
           << format_double(r.holder_q) << "," << format_double(r.dt) << "\n";
}

// ---------------------------------------------------------------------------
// Time stepping

namespace detail {

inline void blowup(const Grid& g, std::size_t node, double grad, const std::string& why) {
    const Point p = g.point(node);
    std::ostringstream os;
    os << why << " at node (" << format_double(p[0]);
    if (g.dim() == 2) os << ", " << format_double(p[1]);
    os << "), measured gradient " << format_double(grad);
    fail(ErrorKind::numerical_blowup, os.str());
}

/// Adaptive Δt from the measured diagonal coefficients of the update.
inline double adaptive_dt(const SweepStats& st, const Grid& g, double m, const SchemeConfig& cfg) {
    SchemeConfig c = cfg;
    c.grad_cap = std::max(cfg.grad_cap, cfg.cap_headroom * effective_gradient_cap(st.max_diag, g, m));
    return cfl_timestep(g, c, m);
}

}  // namespace detail

/// One explicit step u' = u + dt·(Δ_h u - H_h(u) + f) with the boundary rule of
/// the grid kind. dt must satisfy dt·max_diag ≤ 1 for the measured state.
inline EvolutionState step(const EvolutionState& state, const EvolutionOperator& op, double dt) {
    if (!state.u.grid.same_as(op.grid())) fail(ErrorKind::contract, "step: state grid differs from operator grid");
    if (!(dt > 0.0)) fail(ErrorKind::contract, "step: dt must be > 0");
    std::vector<double> r;
    const SweepStats st = op.rate(state.u.values, r);
    if (dt * st.max_diag > 1.0 + 1e-12)
        detail::blowup(op.grid(), st.grad_node, st.max_grad, "step: dt exceeds the monotonicity bound");
    EvolutionState next = state;
    for (std::size_t k = 0; k < r.size(); ++k) {
        next.u.values[k] += dt * r[k];
        if (!std::isfinite(next.u.values[k])) detail::blowup(op.grid(), k, st.max_grad, "step: CFL violation");
    }
    next.t = state.t + dt;
    next.steps = state.steps + 1;
    return next;
}

/// Convenience overload building the operator from its ingredients.
inline EvolutionState step(const EvolutionState& state, const GridFunction& f, double m, BoundaryKind bc, double dt,
                           const SchemeConfig& cfg = {}) {
    if (bc != boundary_of(state.u.grid)) fail(ErrorKind::contract, "step: boundary kind does not match grid kind");
    require_same_grid(state.u, f, "step");
    const EvolutionOperator op(state.u.grid, f.values, m, cfg);
    return step(state, op, dt);
}

/// Largest admissible Δt for the current state (adaptive rule).
inline double admissible_dt(const GridFunction& u, const EvolutionOperator& op, const SchemeConfig& cfg) {
    std::vector<double> r;
    const SweepStats st = op.rate(u.values, r);
    return detail::adaptive_dt(st, op.grid(), op.m(), cfg);
}

/**
 * Integrates from u0 to time T (or until `opt.stop` returns true at a sample).
 * The step size follows the CFL rule with L refreshed from the measured
 * diagonal every step; steps are shortened to land exactly on sample times.
 */
inline EvolutionState evolve(const EvolutionOperator& op, const GridFunction& u0, double T, const SchemeConfig& cfg,
                             const EvolveOptions& opt = {}) {
    cfg.validate();
    if (!(T >= 0.0)) fail(ErrorKind::contract, "evolve: T must be >= 0");
    if (!u0.grid.same_as(op.grid())) fail(ErrorKind::contract, "evolve: initial datum grid differs from operator grid");
    if (!(opt.sample_interval > 0.0)) fail(ErrorKind::contract, "evolve: sample_interval must be > 0");
    const double lag_ratio = opt.slope_lag / opt.sample_interval;
    const long lag = std::lround(lag_ratio);
    if (lag < 1 || std::abs(lag_ratio - static_cast<double>(lag)) > 1e-9)
        fail(ErrorKind::contract, "evolve: slope lag must be a positive multiple of the sampling interval");
    u0.require_finite("evolve: initial datum");

    const Grid& g = op.grid();
    EvolutionState st;
    st.u = u0;
    st.trace.window = opt.window < 0.0 ? default_window(g) : opt.window;
    st.trace.delta_T = opt.slope_lag;
    st.trace.holder_tau = opt.holder_tau;
    st.trace.holder_max_gap = opt.holder_max_gap;
    const double K = st.trace.window;
    double last_dt = 0.0;

    auto record = [&]() {
        Snapshot snap{st.t, restrict(st.u, K)};
        TraceRecord rec;
        rec.t = st.t;
        rec.dt = last_dt;
        const double mk = mean(snap.u);
        st.trace.window_means.push_back(mk);
        const std::size_t idx = st.trace.window_means.size() - 1;
        if (idx >= static_cast<std::size_t>(lag)) {
            const std::size_t back = idx - static_cast<std::size_t>(lag);
            rec.slope = (mk - st.trace.window_means[back]) / (st.t - st.trace.records[back].t);
        }
        rec.max_grad = (g.kind() == GridKind::box && aligned_half_count(g, K) >= g.half_count())
                           ? std::numeric_limits<double>::quiet_NaN()
                           : gradient_monitor(st.u, K);
        rec.holder_q = holder_against_history(snap, st.trace.snapshots, opt.holder_tau, opt.holder_max_gap);
        st.trace.records.push_back(rec);
        if (opt.keep_full_snapshots) st.trace.full_snapshots.push_back({st.t, st.u});
        st.trace.snapshots.push_back(std::move(snap));
        if (!opt.keep_snapshots) {
            auto& v = st.trace.snapshots;
            while (v.size() > 1 && st.t - v.front().t > opt.holder_max_gap * (1.0 + 1e-12)) v.erase(v.begin());
        }
    };

    record();
    if (opt.stop && opt.stop(st)) return st;

    std::vector<double> r;
    long next_sample = 1;
    const double eps_t = 1e-12 * std::max(1.0, T);
    while (st.t < T - eps_t) {
        const SweepStats sw = op.rate(st.u.values, r);
        if (sw.max_grad > cfg.grad_hard_limit)
            detail::blowup(g, sw.grad_node, sw.max_grad, "evolve: gradient exceeds the hard cap");
        double dt = opt.fixed_dt > 0.0 ? opt.fixed_dt : detail::adaptive_dt(sw, g, op.m(), cfg);
        if (opt.fixed_dt > 0.0 && dt * sw.max_diag > 1.0 + 1e-12)
            detail::blowup(g, sw.grad_node, sw.max_grad, "evolve: fixed dt exceeds the monotonicity bound");
        const double t_sample = std::min(static_cast<double>(next_sample) * opt.sample_interval, T);
        bool land = false;
        if (st.t + dt >= t_sample - eps_t) {
            dt = t_sample - st.t;
            land = true;
        }
        double* u = st.u.values.data();
        for (std::size_t k = 0; k < r.size(); ++k) {
            u[k] += dt * r[k];
            if (!std::isfinite(u[k])) detail::blowup(g, k, sw.max_grad, "evolve: CFL violation");
        }
        ++st.steps;
        last_dt = dt;
        if (land) {
            st.t = t_sample;
            if (t_sample == static_cast<double>(next_sample) * opt.sample_interval) ++next_sample;
            record();
            if (opt.stop && opt.stop(st)) break;
        } else {
            st.t += dt;
        }
    }
    return st;
}

/// Evolves the problem's own initial datum on a grid; the boundary rule
/// follows the grid kind.
inline EvolutionState evolve(const ProblemSpec& problem, const Grid& grid, double T, const SchemeConfig& cfg,
                             const EvolveOptions& opt = {}) {
    problem.validate();
    if (grid.dim() != problem.dim) fail(ErrorKind::contract, "evolve: grid dimension differs from problem dimension");
    const GridFunction f = sample(problem.f, grid);
    const EvolutionOperator op(grid, f.values, problem.m, cfg);
    return evolve(op, sample(problem.u0, grid), T, cfg, opt);
}

}  // namespace vhj
