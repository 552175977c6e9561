#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "vhj/ergodic.hpp"
#include "vhj/error.hpp"
#include "vhj/format.hpp"
#include "vhj/grid.hpp"
#include "vhj/parabolic.hpp"
#include "vhj/problem.hpp"
#include "vhj/scheme.hpp"

namespace vhj {

/// Pointwise profile used as the limit φ. Closed forms and gridded profiles
/// (through interpolation) are both accepted.
using Field = std::function<double(const Point&)>;

inline Field field_of(const GridFunction& g) {
    return [g](const Point& p) { return interpolate(g, p); };
}

struct CHat {
    double value = 0.0;     ///< mean over K of v - φ
    double flatness = 0.0;  ///< max - min over K of v - φ
};

/// ĉ as the K-mean of v_T - φ, with the oscillation of v_T - φ on K.
inline CHat estimate_c_hat(const GridFunction& v_T, const GridFunction& phi, double window) {
    const GridFunction d = combine(restrict(v_T, window), restrict(phi, window), std::minus<>());
    return {mean(d), max_value(d) - min_value(d)};
}

struct LargeTimeConfig {
    SchemeConfig scheme;
    double half_width = 8.0;      ///< evolution box; at least 4 K
    int nodes_per_axis = 321;
    double window = 2.0;          ///< K half-width
    double T = 20.0;
    double sample_interval = 0.5;
    double tol = 0.05;            ///< sup-norm tolerance at T
    double flatness_tol = 0.1;    ///< flatness certificate at T
    double epsilon = 0.1;         ///< barrier margin; t_n uses flatness < ε/2
    double trusted_fraction = 0.5;  ///< barrier domination domain, as a fraction of the box
    double decrease_slack = 1e-6;

    void validate() const {
        scheme.validate();
        if (!(window > 0.0)) fail(ErrorKind::config, "large-time window must be > 0");
        if (half_width < 4.0 * window - 1e-12)
            fail(ErrorKind::config, "large-time box half-width " + format_double(half_width) +
                                        " is below 4x the window half-width " + format_double(window));
        if (!(T > 0.0) || !(sample_interval > 0.0)) fail(ErrorKind::config, "large-time run needs T > 0 and sample_interval > 0 (T = 0 leaves an empty history)");
        if (!(tol > 0.0) || !(flatness_tol > 0.0) || !(epsilon > 0.0))
            fail(ErrorKind::config, "tolerances and epsilon must be > 0");
        if (!(trusted_fraction > 0.0 && trusted_fraction <= 1.0))
            fail(ErrorKind::config, "trusted_fraction must lie in (0, 1]");
    }
};

struct HistoryRow {
    double t = 0.0;
    double c_hat = 0.0;           ///< ĉ(t)
    double flatness = 0.0;
    double profile_error = 0.0;   ///< sup_K |v - φ - ĉ(t)|
    double slope_error = std::numeric_limits<double>::quiet_NaN();       ///< sup_K |u/t - λ*|
    double mean_slope_error = std::numeric_limits<double>::quiet_NaN();  ///< |mean_K u/t - λ*|
};

struct LargeTimeReport {
    double lambda_star_used = 0.0;
    double c_hat = 0.0;
    double flatness = 0.0;
    double final_error = 0.0;
    double window = 0.0;
    double T = 0.0;
    double phi_offset = 0.0;  ///< subtracted from φ so that min_K φ = 0
    bool converged = false;
    bool eventually_decreasing = false;
    double t_n = std::numeric_limits<double>::quiet_NaN();
    std::vector<HistoryRow> history;
    Grid grid;
    std::vector<Snapshot> v_snapshots;  ///< v = u - λ* t on the full box
    DiagnosticsTrace trace;

    /// φ as used by this report (normalized on K).
    double phi_at(const Field& phi, const Point& x) const { return phi(x) - phi_offset; }
    double trusted_half_width(double fraction) const { return align_down(grid, fraction * grid.half_width()); }
};

/// True when the sequence does not increase (beyond `slack`) over its last
/// quarter.
inline bool eventually_decreasing(const std::vector<double>& seq, double slack) {
    if (seq.size() < 4) return false;
    const std::size_t start = seq.size() - std::max<std::size_t>(2, seq.size() / 4);
    for (std::size_t k = start + 1; k < seq.size(); ++k)
        if (seq[k] > seq[k - 1] + slack) return false;
    return true;
}

/// First sample time with flatness < ε/2; NaN when none.
inline double select_tn(const LargeTimeReport& rep, double epsilon) {
    for (const auto& h : rep.history)
        if (h.t > 0.0 && h.flatness < 0.5 * epsilon) return h.t;
    return std::numeric_limits<double>::quiet_NaN();
}

/**
 * Evolves the problem on a large state-constraint box and tracks
 * v = u - λ*t against φ + ĉ(t) on the window K. The run is converged when
 * the final sup-norm error and flatness are within tolerance and the error
 * does not grow over the last quarter of the samples.
 */
inline LargeTimeReport run_large_time(const ProblemSpec& problem, double lambda_star, const Field& phi,
                                      const LargeTimeConfig& cfg = {}) {
    problem.validate();
    cfg.validate();
    const Grid g = Grid::box(problem.dim, cfg.half_width, cfg.nodes_per_axis);
    const double K = align_down(g, cfg.window);
    const GridFunction f = sample(problem.f, g);
    const EvolutionOperator op(g, f.values, problem.m, cfg.scheme);

    LargeTimeReport rep;
    rep.lambda_star_used = lambda_star;
    rep.window = K;
    rep.T = cfg.T;
    rep.grid = g;
    GridFunction phiK = sample(restrict(GridFunction(g), K).grid, phi);
    rep.phi_offset = min_value(phiK);
    phiK = transform(phiK, [&](double v) { return v - rep.phi_offset; });

    EvolveOptions opt;
    opt.sample_interval = cfg.sample_interval;
    opt.slope_lag = cfg.sample_interval;
    opt.window = K;
    opt.keep_snapshots = true;
    opt.holder_max_gap = 1.0;
    opt.stop = [&](const EvolutionState& s) {
        GridFunction v = transform(s.u, [&](double x) { return x - lambda_star * s.t; });
        const GridFunction vK = restrict(v, K);
        const GridFunction d = combine(vK, phiK, std::minus<>());
        HistoryRow row;
        row.t = s.t;
        row.c_hat = mean(d);
        row.flatness = max_value(d) - min_value(d);
        for (double x : d.values) row.profile_error = std::max(row.profile_error, std::abs(x - row.c_hat));
        if (s.t > 0.0) {
            const GridFunction uK = restrict(s.u, K);
            double se = 0.0;
            for (double x : uK.values) se = std::max(se, std::abs(x / s.t - lambda_star));
            row.slope_error = se;
            row.mean_slope_error = std::abs(mean(uK) / s.t - lambda_star);
        }
        rep.history.push_back(row);
        rep.v_snapshots.push_back({s.t, std::move(v)});
        return false;
    };
    EvolutionState st = evolve(op, sample(problem.u0, g), cfg.T, cfg.scheme, opt);
    rep.trace = std::move(st.trace);

    const HistoryRow& last = rep.history.back();
    rep.c_hat = last.c_hat;
    rep.flatness = last.flatness;
    rep.final_error = last.profile_error;
    std::vector<double> errs;
    for (const auto& h : rep.history) errs.push_back(h.profile_error);
    rep.eventually_decreasing = eventually_decreasing(errs, cfg.decrease_slack);
    rep.converged = rep.final_error <= cfg.tol && rep.flatness <= cfg.flatness_tol && rep.eventually_decreasing;
    rep.t_n = select_tn(rep, cfg.epsilon);
    return rep;
}

inline void write_history_csv(const LargeTimeReport& rep, std::ostream& os, const std::vector<std::string>& comments = {}) {
    for (const auto& c : comments) os << "# " << c << "\n";
    os << "t,c_hat,flatness,profile_error,slope_error,mean_slope_error\n";
    for (const auto& h : rep.history)
        os << format_double(h.t) << "," << format_double(h.c_hat) << "," << format_double(h.flatness) << ","
           << format_double(h.profile_error) << "," << format_double(h.slope_error) << ","
           << format_double(h.mean_slope_error) << "\n";
}

// ---------------------------------------------------------------------------
// Barrier checks

struct BarrierConfig {
    double epsilon = 0.1;
    double C = 10.0;             ///< residual threshold C·h²
    double domination_tol = 1e-9;
    double trusted_fraction = 0.5;
    double bracket_tol = 1e-2;
};

struct BarrierReport {
    bool upper = true;
    double half_width = 0.0;   ///< R or S_R of the run
    double cutoff = std::numeric_limits<double>::quiet_NaN();
    double epsilon = 0.0;
    double t_n = 0.0;
    double scale = 1.0;        ///< μ_R or γ_R
    double m_value = 0.0;      ///< m_R or m̃_R
    double shift = 0.0;        ///< M_R for the upper barrier, m̃_R for the lower one
    double residual = 0.0;     ///< min (upper) or max (lower) discrete residual
    double threshold = 0.0;    ///< C·h²
    bool residual_pass = false;
    double initial_margin = 0.0;  ///< min over the domain of the signed gap at t = 0
    bool initial_pass = false;
    double later_margin = 0.0;    ///< min over later snapshots on K
    std::size_t later_snapshots = 0;
    bool later_pass = false;
    double domain_half_width = 0.0;
    bool pass = false;
};

namespace detail {

inline const Snapshot& snapshot_at(const LargeTimeReport& lt, double t) {
    for (const auto& s : lt.v_snapshots)
        if (std::abs(s.t - t) <= 1e-9 * std::max(1.0, t)) return s;
    fail(ErrorKind::contract, "barrier check: no snapshot at t_n = " + format_double(t));
}

inline void require_tn(const LargeTimeReport& lt, double eps) {
    if (!(eps > 0.0)) fail(ErrorKind::contract, "barrier check: epsilon must be > 0");
    if (std::isnan(lt.t_n))
        fail(ErrorKind::contract, "barrier check: the large-time run never reached flatness < epsilon/2");
}

/// Visits nodes of `g` lying in [-w, w]^N.
template <class Fn>
void for_nodes_within(const Grid& g, double w, Fn&& fn) {
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Point p = g.point(k);
        if (std::abs(p[0]) <= w + 1e-12 && std::abs(p[1]) <= w + 1e-12) fn(k, p);
    }
}

}  // namespace detail

/**
 * Upper barrier V_R = μ_R(φ_R + φ(0)) + ĉ + ε + (μ_Rλ_R - λ*)t + M_R.
 * (a) the central residual of V_R against f - λ* on the interior of B_R is
 * at least -C·h²; (b) V_R(·,0) ≥ v(·,t_n) on B_R within the trusted part of
 * the evolution box; (c) V_R(·,t) ≥ v(·,t_n + t) on K for every later sample.
 */
inline BarrierReport barrier_check_upper(const ErgodicApprox& run, const Field& phi, double lambda_star,
                                         const LargeTimeReport& lt, const BarrierConfig& cfg = {}) {
    if (run.kind != ApproxKind::state_constraint) fail(ErrorKind::contract, "barrier_check_upper: box run required");
    detail::require_tn(lt, cfg.epsilon);
    BarrierReport rep;
    rep.upper = true;
    rep.half_width = run.half_width;
    rep.epsilon = cfg.epsilon;
    rep.t_n = lt.t_n;
    double mu = 1.0 + run.constant - lambda_star;
    if (mu < 1.0 - cfg.bracket_tol)
        fail(ErrorKind::inconsistency, "barrier_check_upper: mu_R = " + format_double(mu) + " < 1");
    mu = std::max(mu, 1.0);
    rep.scale = mu;
    const Grid& gr = run.profile.grid;
    auto phihat = [&](const Point& x) { return lt.phi_at(phi, x); };
    const double phi0 = phihat({0.0, 0.0});

    // m_R over B_R, restricted to where φ is available (the evolution box).
    const double reach = std::min(run.half_width, lt.grid.half_width());
    double mR = std::numeric_limits<double>::infinity();
    detail::for_nodes_within(gr, reach, [&](std::size_t k, const Point& p) {
        mR = std::min(mR, mu * (run.profile.values[k] + phi0) - phihat(p));
    });
    rep.m_value = mR;
    rep.shift = std::max(-mR, 0.0);

    // (a) residual on interior nodes of B_R.
    const Grid inner = interior_grid(gr);
    double res = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < inner.size(); ++k) {
        const std::size_t node = interior_to_parent(gr, inner, k);
        const double r = scaled_residual_at(mu, run.constant, run.profile, run.source, run.m, node) +
                         (mu - 1.0) * run.source.values[node];
        res = std::min(res, r);
    }
    rep.residual = res;
    rep.threshold = cfg.C * gr.h() * gr.h();
    rep.residual_pass = res >= -rep.threshold;

    const GridFunction phiR = run.profile;
    auto V = [&](const Point& x, double t) {
        return mu * (interpolate(phiR, x) + phi0) + lt.c_hat + cfg.epsilon + (mu * run.constant - lambda_star) * t +
               rep.shift;
    };
    // (b)
    const Snapshot& s0 = detail::snapshot_at(lt, lt.t_n);
    rep.domain_half_width = std::min(run.half_width, lt.trusted_half_width(cfg.trusted_fraction));
    double m0 = std::numeric_limits<double>::infinity();
    detail::for_nodes_within(lt.grid, rep.domain_half_width, [&](std::size_t k, const Point& p) {
        m0 = std::min(m0, V(p, 0.0) - s0.u.values[k]);
    });
    rep.initial_margin = m0;
    rep.initial_pass = m0 >= -cfg.domination_tol;
    // (c)
    double ml = std::numeric_limits<double>::infinity();
    for (const auto& s : lt.v_snapshots) {
        if (s.t < lt.t_n - 1e-12) continue;
        ++rep.later_snapshots;
        detail::for_nodes_within(lt.grid, lt.window, [&](std::size_t k, const Point& p) {
            ml = std::min(ml, V(p, s.t - lt.t_n) - s.u.values[k]);
        });
    }
    rep.later_margin = ml;
    rep.later_pass = ml >= -cfg.domination_tol;
    rep.pass = rep.residual_pass && rep.initial_pass && rep.later_pass;
    return rep;
}

/**
 * Lower barrier Ũ_R = γ_R(ψ_R + φ(0)) + ĉ - ε + (γ_Rν_R - λ*)t + m̃_R with
 * γ_R = 1 + ν_R - λ* and m̃_R = min(φ - γ_R(ψ_R + φ(0))) over the torus
 * cell. Checks mirror the upper barrier with reversed inequalities; the
 * residual uses the unclipped f.
 */
inline BarrierReport barrier_check_lower(const ErgodicApprox& run, const Field& phi, double lambda_star,
                                         const LargeTimeReport& lt, const BarrierConfig& cfg = {}) {
    if (run.kind != ApproxKind::periodic) fail(ErrorKind::contract, "barrier_check_lower: periodic run required");
    detail::require_tn(lt, cfg.epsilon);
    BarrierReport rep;
    rep.upper = false;
    rep.half_width = run.half_width;
    rep.cutoff = run.cutoff;
    rep.epsilon = cfg.epsilon;
    rep.t_n = lt.t_n;
    double gamma = 1.0 + run.constant - lambda_star;
    if (gamma > 1.0 + cfg.bracket_tol)
        fail(ErrorKind::inconsistency, "barrier_check_lower: gamma_R = " + format_double(gamma) +
                                           " > 1, i.e. nu_R above lambda* (bracketing inconsistency)");
    gamma = std::min(gamma, 1.0);
    rep.scale = gamma;
    const Grid& gt = run.profile.grid;
    auto phihat = [&](const Point& x) { return lt.phi_at(phi, x); };
    const double phi0 = phihat({0.0, 0.0});

    double mt = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < gt.size(); ++k) {
        const Point p = gt.point(k);
        if (std::abs(p[0]) > lt.grid.half_width() || std::abs(p[1]) > lt.grid.half_width()) continue;
        mt = std::min(mt, phihat(p) - gamma * (run.profile.values[k] + phi0));
    }
    rep.m_value = mt;
    rep.shift = mt;

    double res = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < gt.size(); ++k) {
        const double r = scaled_residual_at(gamma, run.constant, run.profile, run.full_source, run.m, k) +
                         (gamma - 1.0) * run.full_source.values[k];
        res = std::max(res, r);
    }
    rep.residual = res;
    rep.threshold = cfg.C * gt.h() * gt.h();
    rep.residual_pass = res <= rep.threshold;

    const GridFunction psi = run.profile;
    auto U = [&](const Point& x, double t) {
        return gamma * (interpolate(psi, x) + phi0) + lt.c_hat - cfg.epsilon + (gamma * run.constant - lambda_star) * t +
               mt;
    };
    const Snapshot& s0 = detail::snapshot_at(lt, lt.t_n);
    rep.domain_half_width = lt.trusted_half_width(cfg.trusted_fraction);
    double m0 = std::numeric_limits<double>::infinity();
    detail::for_nodes_within(lt.grid, rep.domain_half_width, [&](std::size_t k, const Point& p) {
        m0 = std::min(m0, s0.u.values[k] - U(p, 0.0));
    });
    rep.initial_margin = m0;
    rep.initial_pass = m0 >= -cfg.domination_tol;
    double ml = std::numeric_limits<double>::infinity();
    for (const auto& s : lt.v_snapshots) {
        if (s.t < lt.t_n - 1e-12) continue;
        ++rep.later_snapshots;
        detail::for_nodes_within(lt.grid, lt.window, [&](std::size_t k, const Point& p) {
            ml = std::min(ml, s.u.values[k] - U(p, s.t - lt.t_n));
        });
    }
    rep.later_margin = ml;
    rep.later_pass = ml >= -cfg.domination_tol;
    rep.pass = rep.residual_pass && rep.initial_pass && rep.later_pass;
    return rep;
}

struct SandwichReport {
    double min_gap = 0.0;  ///< min over later snapshots of v - φ - ĉ on K
    double max_gap = 0.0;
    bool pass = false;
};

/// φ + ĉ - ε - tol ≤ v(·,t) ≤ φ + ĉ + ε + tol on K for every snapshot t ≥ t_n.
inline SandwichReport sandwich_check(const LargeTimeReport& lt, const Field& phi, double epsilon, double tol) {
    detail::require_tn(lt, epsilon);
    SandwichReport rep;
    rep.min_gap = std::numeric_limits<double>::infinity();
    rep.max_gap = -std::numeric_limits<double>::infinity();
    for (const auto& s : lt.v_snapshots) {
        if (s.t < lt.t_n - 1e-12) continue;
        detail::for_nodes_within(lt.grid, lt.window, [&](std::size_t k, const Point& p) {
            const double d = s.u.values[k] - lt.phi_at(phi, p) - lt.c_hat;
            rep.min_gap = std::min(rep.min_gap, d);
            rep.max_gap = std::max(rep.max_gap, d);
        });
    }
    rep.pass = rep.min_gap >= -epsilon - tol && rep.max_gap <= epsilon + tol;
    return rep;
}

/// |m| nonincreasing along the ladder (within tol) and the last entry at most tol.
inline bool decreasing_to_zero(const std::vector<double>& m_values, double tol) {
    if (m_values.empty()) return false;
    for (std::size_t k = 1; k < m_values.size(); ++k)
        if (std::abs(m_values[k]) > std::abs(m_values[k - 1]) + tol) return false;
    return std::abs(m_values.back()) <= tol;
}

}  // namespace vhj
