#pragma once

/**
 * @file scheme.hpp
 * @brief Discrete operators for -Δu + |Du|^m: stencils, residuals, time-step rule.
 *
 * Two monotone discretizations of the gradient term are provided.
 *
 * Rouy–Tourin: H_h = (Σ_i max(D⁻_i u, 0)² + max(-D⁺_i u, 0)²)^{m/2}. Positively
 * homogeneous of degree m and first-order accurate.
 *
 * Hybrid (per axis, A = 2/h):
 *     G(p⁻, p⁺) = sup_a [ ℓ_a(p⁻, p⁺) - L(a) ],   L(a) = (m-1)(|a|/m)^{m/(m-1)},
 * with ℓ_a = a·(p⁻+p⁺)/2 for |a| ≤ A and the upwind-corrected forms
 * ℓ_a = a·p⁻ + A(p⁺-p⁻)/2 (a ≥ A), ℓ_a = a·p⁺ + A(p⁺-p⁻)/2 (a ≤ -A) beyond.
 * Each ℓ_a combined with the 3-point Laplacian has nonnegative neighbor
 * weights, so Δ_h - G is monotone. Where |H'(p̄)| ≤ A it reduces to the central
 * value |p̄|^m, which makes the scheme second-order on smooth solutions with
 * moderate gradients. The per-axis form is consistent with |Du|^m only when
 * N = 1 or m = 2 (additive Lagrangian); the automatic choice falls back to
 * Rouy–Tourin elsewhere.
 *
 * State-constraint boundary, hybrid: a boundary node keeps only controls that
 * point into the box with |a| ≥ A on the cut axis, which removes the outward
 * neighbor and the Laplacian weight on that axis:
 *     F_axis = -sup_{a ≥ A} (a·p⁻ - L(a))   (upper face),
 *     F_axis = -sup_{a ≤ -A}(a·p⁺ - L(a))   (lower face).
 * Rouy–Tourin boundary: the outward pair is dropped from H_h and the Laplacian
 * on the cut axis uses the single inward neighbor.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "vhj/error.hpp"
#include "vhj/grid.hpp"

namespace vhj {

enum class Stencil { upwind, central, hybrid };
enum class HamiltonianKind { automatic, hybrid, rouy_tourin };

inline const char* to_string(Stencil s) {
    switch (s) {
        case Stencil::upwind: return "upwind";
        case Stencil::central: return "central";
        case Stencil::hybrid: return "hybrid";
    }
    return "unknown";
}

inline const char* to_string(HamiltonianKind k) {
    switch (k) {
        case HamiltonianKind::automatic: return "auto";
        case HamiltonianKind::hybrid: return "hybrid";
        case HamiltonianKind::rouy_tourin: return "rouy_tourin";
    }
    return "unknown";
}

struct SchemeConfig {
    double cfl_safety = 0.9;             ///< in (0, 1]
    double grad_cap = 1.0;               ///< floor for the Lipschitz cap L in the CFL bound
    double cap_headroom = 1.5;           ///< factor applied to the measured cap
    double grad_hard_limit = 1e3;        ///< blow-up guard on one-sided differences
    double guard_window_fraction = 0.5;  ///< box guard region, as a fraction of the half-width
    Stencil residual_stencil = Stencil::central;
    HamiltonianKind hamiltonian = HamiltonianKind::automatic;

    void validate() const {
        if (!(cfl_safety > 0.0 && cfl_safety <= 1.0)) fail(ErrorKind::config, "cfl_safety must lie in (0, 1]");
        if (!(grad_cap > 0.0)) fail(ErrorKind::config, "grad_cap must be > 0");
        if (!(cap_headroom >= 1.0)) fail(ErrorKind::config, "cap_headroom must be >= 1");
        if (!(grad_hard_limit > 0.0)) fail(ErrorKind::config, "grad_hard_limit must be > 0");
        if (!(guard_window_fraction > 0.0 && guard_window_fraction <= 1.0))
            fail(ErrorKind::config, "guard_window_fraction must lie in (0, 1]");
    }
};

/// Resolves `automatic` and rejects the hybrid form where it is inconsistent.
inline HamiltonianKind resolve_hamiltonian(HamiltonianKind k, int dim, double m) {
    const bool hybrid_ok = dim == 1 || m == 2.0;
    if (k == HamiltonianKind::automatic) return hybrid_ok ? HamiltonianKind::hybrid : HamiltonianKind::rouy_tourin;
    if (k == HamiltonianKind::hybrid && !hybrid_ok)
        fail(ErrorKind::config, "hybrid Hamiltonian requires dim = 1 or m = 2");
    return k;
}

/// Δt = safety / (2N/h² + m·L^{m-1}/h).
inline double cfl_timestep(const Grid& grid, const SchemeConfig& cfg, double m) {
    if (!(cfg.grad_cap > 0.0)) fail(ErrorKind::contract, "cfl_timestep: L must be > 0");
    const double h = grid.h();
    return cfg.cfl_safety / (2.0 * grid.dim() / (h * h) + m * std::pow(cfg.grad_cap, m - 1.0) / h);
}

/// Gradient cap L for which the CFL denominator equals a measured maximal
/// diagonal coefficient of the explicit update.
inline double effective_gradient_cap(double max_diag, const Grid& grid, double m) {
    const double h = grid.h();
    const double excess = max_diag - 2.0 * grid.dim() / (h * h);
    if (!(excess > 0.0)) return 0.0;
    return std::pow(excess * h / m, 1.0 / (m - 1.0));
}

// ---------------------------------------------------------------------------
// Per-node stencil access

/// Values along one axis around a node; `has_minus`/`has_plus` are false at
/// a box face.
struct AxisValues {
    double um = 0.0, u0 = 0.0, up = 0.0;
    bool has_minus = true, has_plus = true;
};

inline AxisValues axis_values(const GridFunction& u, std::size_t node, int axis) {
    const Grid& g = u.grid;
    const int a = g.axis_size();
    int i = axis == 0 ? g.ix(node) : g.iy(node);
    auto at = [&](int ii) {
        return axis == 0 ? u.values[g.flat(ii, g.iy(node))] : u.values[g.flat(g.ix(node), ii)];
    };
    AxisValues v;
    v.u0 = u.values[node];
    if (g.kind() == GridKind::torus) {
        v.um = at((i - 1 + a) % a);
        v.up = at((i + 1) % a);
        return v;
    }
    v.has_minus = i > 0;
    v.has_plus = i < a - 1;
    if (v.has_minus) v.um = at(i - 1);
    if (v.has_plus) v.up = at(i + 1);
    return v;
}

inline void require_interior(const GridFunction& u, std::size_t node, const char* op) {
    if (u.grid.is_boundary(node))
        fail(ErrorKind::contract, std::string(op) + ": node " + std::to_string(node) +
                                      " is on the box boundary; use the boundary handler");
}

/// Rouy–Tourin value (Σ_i max(D⁻_i u,0)² + max(-D⁺_i u,0)²)^{m/2} at an
/// interior (box) or any (torus) node.
inline double numerical_hamiltonian(const GridFunction& u, std::size_t node, double m) {
    require_interior(u, node, "numerical_hamiltonian");
    const double ih = 1.0 / u.grid.h();
    double s = 0.0;
    for (int ax = 0; ax < u.grid.dim(); ++ax) {
        const AxisValues v = axis_values(u, node, ax);
        const double a = std::max((v.u0 - v.um) * ih, 0.0);
        const double b = std::max(-(v.up - v.u0) * ih, 0.0);
        s += a * a + b * b;
    }
    return m == 2.0 ? s : std::pow(s, 0.5 * m);
}

/// Σ_i (u(node+e_i) - 2u(node) + u(node-e_i))/h².
inline double discrete_laplacian(const GridFunction& u, std::size_t node) {
    require_interior(u, node, "discrete_laplacian");
    const double ih2 = 1.0 / (u.grid.h() * u.grid.h());
    double s = 0.0;
    for (int ax = 0; ax < u.grid.dim(); ++ax) {
        const AxisValues v = axis_values(u, node, ax);
        s += (v.up - 2.0 * v.u0 + v.um) * ih2;
    }
    return s;
}

/// |D_c u|^m with central differences.
inline double central_gradient_power(const GridFunction& u, std::size_t node, double m) {
    require_interior(u, node, "central_gradient_power");
    const double i2h = 0.5 / u.grid.h();
    double s = 0.0;
    for (int ax = 0; ax < u.grid.dim(); ++ax) {
        const AxisValues v = axis_values(u, node, ax);
        const double g = (v.up - v.um) * i2h;
        s += g * g;
    }
    return m == 2.0 ? s : std::pow(s, 0.5 * m);
}

// ---------------------------------------------------------------------------
// Hybrid per-axis Hamiltonian

/// |p|^m with its derivative and Legendre conjugate, specialised for m = 2.
template <bool Quadratic>
struct PowerLaw {
    double m = 2.0;

    double value(double p) const {
        if constexpr (Quadratic) return p * p;
        else return std::pow(std::abs(p), m);
    }
    double slope(double p) const {  // H'(p)
        if constexpr (Quadratic) return 2.0 * p;
        else {
            const double a = m * std::pow(std::abs(p), m - 1.0);
            return p < 0.0 ? -a : a;
        }
    }
    double conjugate(double a) const {  // L(a)
        if constexpr (Quadratic) return 0.25 * a * a;
        else return (m - 1.0) * std::pow(std::abs(a) / m, m / (m - 1.0));
    }
};

/// Value of a supremum over controls together with the maximizing control.
struct ControlSup {
    double value;
    double control;
};

template <bool Q>
inline ControlSup hybrid_axis(const PowerLaw<Q>& H, double A, double LA, double pm, double pp) {
    const double pb = 0.5 * (pm + pp);
    const double half_jump = 0.5 * A * (pp - pm);
    ControlSup best;
    const double a0 = H.slope(pb);
    if (std::abs(a0) <= A) best = {H.value(pb), a0};
    else best = {A * std::abs(pb) - LA, pb < 0.0 ? -A : A};
    const double ap = H.slope(pm);
    const ControlSup tp = ap >= A ? ControlSup{H.value(pm) + half_jump, ap} : ControlSup{A * pm - LA + half_jump, A};
    if (tp.value > best.value) best = tp;
    const double am = H.slope(pp);
    const ControlSup tm = am <= -A ? ControlSup{H.value(pp) + half_jump, am} : ControlSup{-A * pp - LA + half_jump, -A};
    if (tm.value > best.value) best = tm;
    return best;
}

/// sup_{a ≥ A} (a·p - L(a)).
template <bool Q>
inline ControlSup drift_sup_upper(const PowerLaw<Q>& H, double A, double LA, double p) {
    const double a = H.slope(p);
    return a >= A ? ControlSup{H.value(p), a} : ControlSup{A * p - LA, A};
}

/// sup_{a ≤ -A} (a·p - L(a)).
template <bool Q>
inline ControlSup drift_sup_lower(const PowerLaw<Q>& H, double A, double LA, double p) {
    const double a = H.slope(p);
    return a <= -A ? ControlSup{H.value(p), a} : ControlSup{-A * p - LA, -A};
}

/// Hybrid G-value at an interior or torus node (sum over axes).
inline double hybrid_hamiltonian(const GridFunction& u, std::size_t node, double m) {
    require_interior(u, node, "hybrid_hamiltonian");
    if (u.grid.dim() == 2 && m != 2.0) fail(ErrorKind::contract, "hybrid Hamiltonian in 2D requires m = 2");
    const double h = u.grid.h(), A = 2.0 / h;
    double s = 0.0;
    for (int ax = 0; ax < u.grid.dim(); ++ax) {
        const AxisValues v = axis_values(u, node, ax);
        const double pm = (v.u0 - v.um) / h, pp = (v.up - v.u0) / h;
        if (m == 2.0) {
            PowerLaw<true> H{2.0};
            s += hybrid_axis(H, A, H.conjugate(A), pm, pp).value;
        } else {
            PowerLaw<false> H{m};
            s += hybrid_axis(H, A, H.conjugate(A), pm, pp).value;
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Explicit-update operator

/// Summary of one operator sweep.
struct SweepStats {
    double max_diag = 0.0;     ///< max over nodes of -∂F/∂u_node
    double max_grad = 0.0;     ///< max one-sided difference magnitude inside the guard region
    std::size_t grad_node = 0;  ///< node attaining max_grad
};

/**
 * Evaluates r = Δ_h u - H_h(u) + f at every node, including the boundary rule
 * for boxes, and the diagonal coefficients needed for the time-step bound.
 *
 * Gradients are monitored only on a central guard region of a box: the
 * state-constraint layer next to the faces is singular by construction (its
 * one-sided differences grow like (2/h)^{1/(m-1)}) and says nothing about
 * instability.
 */
class EvolutionOperator {
public:
    EvolutionOperator(const Grid& grid, std::vector<double> f, double m, HamiltonianKind kind,
                      double guard_window_fraction = 0.5)
        : grid_(grid), f_(std::move(f)), m_(m), kind_(resolve_hamiltonian(kind, grid.dim(), m)) {
        if (f_.size() != grid_.size()) fail(ErrorKind::contract, "EvolutionOperator: source size mismatch");
        guard_lo_ = 0;
        guard_hi_ = grid_.axis_size() - 1;
        if (grid_.kind() == GridKind::box) {
            const int gc = static_cast<int>(std::floor(guard_window_fraction * grid_.half_count() + 1e-9));
            guard_lo_ = grid_.half_count() - gc;
            guard_hi_ = grid_.half_count() + gc;
        }
    }

    EvolutionOperator(const Grid& grid, std::vector<double> f, double m, const SchemeConfig& cfg)
        : EvolutionOperator(grid, std::move(f), m, cfg.hamiltonian, cfg.guard_window_fraction) {}

    const Grid& grid() const { return grid_; }
    double m() const { return m_; }
    HamiltonianKind kind() const { return kind_; }
    const std::vector<double>& source() const { return f_; }

    SweepStats rate(const std::vector<double>& u, std::vector<double>& out) const {
        out.resize(u.size());
        if (kind_ == HamiltonianKind::hybrid) {
            if (m_ == 2.0) return sweep(HybridKernel<true>(grid_, m_), u, out);
            return sweep(HybridKernel<false>(grid_, m_), u, out);
        }
        return sweep(RTKernel(grid_, m_), u, out);
    }

private:
    template <bool Q>
    struct HybridKernel {
        PowerLaw<Q> H;
        double h, ih, ih2, A, LA, lapdiag;
        HybridKernel(const Grid& g, double m) : H{m}, h(g.h()), ih(1.0 / g.h()), ih2(ih * ih), A(2.0 / g.h()) {
            LA = H.conjugate(A);
            lapdiag = 2.0 * ih2;
        }
        struct Acc {
            double F = 0.0, D = 0.0;
        };
        void interior(Acc& acc, double um, double u0, double up) const {
            const double pm = (u0 - um) * ih, pp = (up - u0) * ih;
            const ControlSup s = hybrid_axis(H, A, LA, pm, pp);
            acc.F += (up - 2.0 * u0 + um) * ih2 - s.value;
            acc.D += std::max(lapdiag, std::abs(s.control) * ih);
        }
        void upper_face(Acc& acc, double um, double u0) const {
            const ControlSup s = drift_sup_upper(H, A, LA, (u0 - um) * ih);
            acc.F -= s.value;
            acc.D += std::abs(s.control) * ih;
        }
        void lower_face(Acc& acc, double u0, double up) const {
            const ControlSup s = drift_sup_lower(H, A, LA, (up - u0) * ih);
            acc.F -= s.value;
            acc.D += std::abs(s.control) * ih;
        }
        void finish(const Acc& acc, double& F, double& D) const {
            F = acc.F;
            D = acc.D;
        }
    };

    struct RTKernel {
        double m, ih, ih2;
        RTKernel(const Grid& g, double mm) : m(mm), ih(1.0 / g.h()), ih2(ih * ih) {}
        struct Acc {
            double lap = 0.0, lapdiag = 0.0, s = 0.0, ab = 0.0;
        };
        void interior(Acc& acc, double um, double u0, double up) const {
            const double a = std::max((u0 - um) * ih, 0.0), b = std::max((u0 - up) * ih, 0.0);
            acc.lap += (up - 2.0 * u0 + um) * ih2;
            acc.lapdiag += 2.0 * ih2;
            acc.s += a * a + b * b;
            acc.ab += a + b;
        }
        void upper_face(Acc& acc, double um, double u0) const {
            const double a = std::max((u0 - um) * ih, 0.0);
            acc.lap += (um - u0) * ih2;
            acc.lapdiag += ih2;
            acc.s += a * a;
            acc.ab += a;
        }
        void lower_face(Acc& acc, double u0, double up) const {
            const double b = std::max((u0 - up) * ih, 0.0);
            acc.lap += (up - u0) * ih2;
            acc.lapdiag += ih2;
            acc.s += b * b;
            acc.ab += b;
        }
        void finish(const Acc& acc, double& F, double& D) const {
            if (acc.s == 0.0) {
                F = acc.lap;
                D = acc.lapdiag;
                return;
            }
            const double hs = m == 2.0 ? acc.s : std::pow(acc.s, 0.5 * m);
            F = acc.lap - hs;
            D = acc.lapdiag + m * (hs / acc.s) * acc.ab * ih;
        }
    };

    template <class K>
    SweepStats sweep(const K& k, const std::vector<double>& u, std::vector<double>& out) const {
        SweepStats st;
        const int a = grid_.axis_size();
        const bool torus = grid_.kind() == GridKind::torus;
        const double ih = 1.0 / grid_.h();
        bool guarded = false;
        auto track = [&](double d, std::size_t node) {
            if (!guarded) return;
            d = std::abs(d) * ih;
            if (d > st.max_grad) {
                st.max_grad = d;
                st.grad_node = node;
            }
        };
        auto axis = [&](typename K::Acc& acc, int i, std::size_t node, std::size_t stride, std::size_t row0) {
            const double u0 = u[node];
            if (torus) {
                const std::size_t im = row0 + static_cast<std::size_t>((i - 1 + a) % a) * stride;
                const std::size_t ip = row0 + static_cast<std::size_t>((i + 1) % a) * stride;
                k.interior(acc, u[im], u0, u[ip]);
                track(u0 - u[im], node);
                return;
            }
            if (i == 0) {
                k.lower_face(acc, u0, u[node + stride]);
                track(u[node + stride] - u0, node);
            } else if (i == a - 1) {
                k.upper_face(acc, u[node - stride], u0);
                track(u0 - u[node - stride], node);
            } else {
                k.interior(acc, u[node - stride], u0, u[node + stride]);
                track(u0 - u[node - stride], node);
            }
        };
        const std::size_t sa = static_cast<std::size_t>(a);
        const int rows = grid_.dim() == 2 ? a : 1;
        for (int j = 0; j < rows; ++j) {
            for (int i = 0; i < a; ++i) {
                const std::size_t node = static_cast<std::size_t>(j) * sa + static_cast<std::size_t>(i);
                guarded = i >= guard_lo_ && i <= guard_hi_ &&
                          (grid_.dim() == 1 || (j >= guard_lo_ && j <= guard_hi_));
                typename K::Acc acc;
                axis(acc, i, node, 1, static_cast<std::size_t>(j) * sa);
                if (grid_.dim() == 2) axis(acc, j, node, sa, static_cast<std::size_t>(i));
                double F, D;
                k.finish(acc, F, D);
                out[node] = F + f_[node];
                st.max_diag = std::max(st.max_diag, D);
            }
        }
        return st;
    }

    Grid grid_;
    std::vector<double> f_;
    double m_;
    HamiltonianKind kind_;
    int guard_lo_ = 0, guard_hi_ = 0;
};

// ---------------------------------------------------------------------------
// Residuals

/// Interior sub-grid of a box (one node in from every face); a torus is returned as is.
inline Grid interior_grid(const Grid& g) {
    if (g.kind() == GridKind::torus) return g;
    if (g.half_count() < 1) fail(ErrorKind::contract, "grid has no interior nodes");
    return Grid::box_from_spacing(g.dim(), g.h(), g.half_count() - 1);
}

/// Maps node k of the interior grid to the corresponding node of g.
inline std::size_t interior_to_parent(const Grid& g, const Grid& inner, std::size_t k) {
    if (g.kind() == GridKind::torus) return k;
    const int off = g.half_count() - inner.half_count();
    return g.flat(inner.ix(k) + off, g.dim() == 2 ? inner.iy(k) + off : 0);
}

/// Gradient term at an interior node for the chosen stencil.
inline double stencil_gradient_term(const GridFunction& phi, std::size_t node, double m, Stencil s) {
    switch (s) {
        case Stencil::central: return central_gradient_power(phi, node, m);
        case Stencil::upwind: return numerical_hamiltonian(phi, node, m);
        case Stencil::hybrid: return hybrid_hamiltonian(phi, node, m);
    }
    return 0.0;
}

/// λ - Δ_h φ + |D_h φ|^m - f on the interior nodes (box) or all nodes (torus).
inline GridFunction residual_ergodic(double lambda, const GridFunction& phi, const GridFunction& f, double m,
                                     Stencil stencil) {
    require_same_grid(phi, f, "residual_ergodic");
    const Grid inner = interior_grid(phi.grid);
    GridFunction r(inner);
    for (std::size_t k = 0; k < inner.size(); ++k) {
        const std::size_t node = interior_to_parent(phi.grid, inner, k);
        r.values[k] = lambda - discrete_laplacian(phi, node) + stencil_gradient_term(phi, node, m, stencil) - f.values[node];
    }
    return r;
}

/// Scaled residual -Δ_h(sφ) + |D_h(sφ)|^m - s·(f - c) at one node, central stencil.
inline double scaled_residual_at(double s, double c, const GridFunction& phi, const GridFunction& f, double m,
                                 std::size_t node) {
    const double lap = discrete_laplacian(phi, node);
    const double g = central_gradient_power(phi, node, m);
    const double gs = m == 2.0 ? s * s * g : std::pow(s, m) * g;
    return -s * lap + gs - s * (f.values[node] - c);
}

/// min over interior nodes (optionally within a centered window) of
/// -Δ_h(μφ) + |D_h(μφ)|^m - μ(f - λ_R). Requires μ ≥ 1.
inline double residual_scaled_super(double mu, double lambda_R, const GridFunction& phi, const GridFunction& f,
                                    double m, double window_half_width = -1.0) {
    if (mu < 1.0) fail(ErrorKind::contract, "residual_scaled_super: mu < 1 flips the inequality; use residual_scaled_sub");
    require_same_grid(phi, f, "residual_scaled_super");
    const Grid inner = interior_grid(phi.grid);
    const int lim = window_half_width < 0.0 ? inner.half_count()
                                            : std::min(inner.half_count(), aligned_half_count(phi.grid, window_half_width));
    double best = INFINITY;
    for (std::size_t k = 0; k < inner.size(); ++k) {
        const int oi = inner.ix(k) - inner.half_count(), oj = inner.dim() == 2 ? inner.iy(k) - inner.half_count() : 0;
        if (std::abs(oi) > lim || std::abs(oj) > lim) continue;
        best = std::min(best, scaled_residual_at(mu, lambda_R, phi, f, m, interior_to_parent(phi.grid, inner, k)));
    }
    return best;
}

/// max over torus nodes of -Δ_h(γψ) + |D_h(γψ)|^m - γ(f_R - ν_R). Requires γ ≤ 1.
inline double residual_scaled_sub(double gamma, double nu_R, const GridFunction& psi, const GridFunction& f_R,
                                  double m) {
    if (gamma > 1.0) fail(ErrorKind::contract, "residual_scaled_sub: gamma > 1 flips the inequality");
    if (psi.grid.kind() != GridKind::torus) fail(ErrorKind::contract, "residual_scaled_sub: torus grid required");
    require_same_grid(psi, f_R, "residual_scaled_sub");
    double best = -INFINITY;
    for (std::size_t k = 0; k < psi.size(); ++k)
        best = std::max(best, scaled_residual_at(gamma, nu_R, psi, f_R, m, k));
    return best;
}

}  // namespace vhj
