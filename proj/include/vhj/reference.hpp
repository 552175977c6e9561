#pragma once

// Independent oracles: closed-form manufactured pairs for any m in (1, 2], and
// the Hopf–Cole linearization w = exp(-u) for m = 2.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "vhj/error.hpp"
#include "vhj/format.hpp"
#include "vhj/grid.hpp"
#include "vhj/problem.hpp"
#include "vhj/scheme.hpp"

namespace vhj {

enum class Provenance { hopf_cole, manufactured };

inline const char* to_string(Provenance p) { return p == Provenance::hopf_cole ? "hopf_cole" : "manufactured"; }

/// An exact ergodic pair (λ, φ) for the source f.
struct OracleSolution {
    double lambda_exact = 0.0;
    std::function<double(const Point&)> phi_exact;
    SourceSpec f;
    double m = 2.0;
    int dim = 1;
    Provenance provenance = Provenance::manufactured;
};

inline void check_oracle_args(double m, int dim) {
    if (!(m > 1.0 && m <= 2.0)) fail(ErrorKind::contract, "oracle: m = " + format_double(m) + " outside (1, 2]");
    if (dim != 1 && dim != 2) fail(ErrorKind::contract, "oracle: dim must be 1 or 2");
}

inline double half_square(const Point& x) { return 0.5 * (x[0] * x[0] + x[1] * x[1]); }

/// φ = |x|²/2, λ = N, f = |x|^m.
inline OracleSolution manufactured(double m, int dim) {
    check_oracle_args(m, dim);
    OracleSolution o;
    o.lambda_exact = dim;
    o.phi_exact = half_square;
    o.f = SourceSpec::power_law(m);
    o.m = m;
    o.dim = dim;
    return o;
}

/// The harmonic oscillator f = |x|² with m = 2: λ = N, φ = |x|²/2 from the
/// Gaussian ground state.
inline OracleSolution hopf_cole_oscillator(int dim) {
    OracleSolution o = manufactured(2.0, dim);
    o.provenance = Provenance::hopf_cole;
    return o;
}

/// φ = |x|²/2 + β Σ cos x_i with λ = N(1 + |β|) and f = λ - Δφ + |Dφ|^m,
/// which is nonnegative and coercive. Unlike β = 0, the sampled pair is not an
/// exact discrete solution, so it exposes the truncation order.
inline OracleSolution manufactured_perturbed(double m, int dim, double beta) {
    check_oracle_args(m, dim);
    OracleSolution o;
    o.m = m;
    o.dim = dim;
    o.lambda_exact = dim * (1.0 + std::abs(beta));
    o.phi_exact = [beta, dim](const Point& x) {
        double s = std::cos(x[0]);
        if (dim == 2) s += std::cos(x[1]);
        return half_square(x) + beta * s;
    };
    const double lam = o.lambda_exact;
    auto f = [m, dim, beta, lam](const Point& x) {
        double g2 = 0.0, lap = 0.0;
        for (int i = 0; i < dim; ++i) {
            const double gi = x[i] - beta * std::sin(x[i]);
            g2 += gi * gi;
            lap += 1.0 - beta * std::cos(x[i]);
        }
        return lam - lap + std::pow(g2, 0.5 * m);
    };
    o.f = SourceSpec::closed(f, "manufactured_perturbed(beta=" + format_double(beta) + ")");
    return o;
}

// ---------------------------------------------------------------------------
// Hopf–Cole eigenvalue

struct EigenResult {
    double lambda = 0.0;
    double residual = 0.0;  ///< ||A w - λ w|| / ||w||
    int iterations = 0;
    GridFunction ground_state;  ///< w on the full box, zero on the faces, max 1
    GridFunction profile() const {
        GridFunction p(ground_state.grid, std::numeric_limits<double>::infinity());
        const double w0 = ground_state.at_origin();
        for (std::size_t k = 0; k < p.size(); ++k)
            if (ground_state.values[k] > 0.0) p.values[k] = -std::log(ground_state.values[k] / w0);
        return p;
    }
};

/**
 * Principal eigenvalue of -Δ_h + diag(f) on the interior nodes of a box with
 * zero Dirichlet closure. Inverse iteration with the fixed shift min f (the
 * shifted operator stays positive definite), a sparse LDLᵀ factorization and
 * the Rayleigh quotient as estimate; stops at residual < tol.
 */
inline EigenResult hopf_cole_eigenvalue(const GridFunction& f, double tol = 1e-8, int max_iter = 2000) {
    const Grid& g = f.grid;
    if (g.kind() != GridKind::box) fail(ErrorKind::contract, "hopf_cole_eigenvalue: box grid required");
    const Grid inner = interior_grid(g);
    const int n = static_cast<int>(inner.size());
    const double ih2 = 1.0 / (g.h() * g.h());
    const int a = inner.axis_size();
    const double sigma = min_value(f);

    using SpMat = Eigen::SparseMatrix<double>;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) * (1 + 2 * g.dim()));
    for (int k = 0; k < n; ++k) {
        const std::size_t parent = interior_to_parent(g, inner, static_cast<std::size_t>(k));
        trip.emplace_back(k, k, 2.0 * g.dim() * ih2 + f.values[parent]);
        const int i = inner.ix(static_cast<std::size_t>(k));
        const int j = inner.iy(static_cast<std::size_t>(k));
        if (i > 0) trip.emplace_back(k, k - 1, -ih2);
        if (i < a - 1) trip.emplace_back(k, k + 1, -ih2);
        if (g.dim() == 2) {
            if (j > 0) trip.emplace_back(k, k - a, -ih2);
            if (j < a - 1) trip.emplace_back(k, k + a, -ih2);
        }
    }
    SpMat A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    SpMat S = A;
    for (int k = 0; k < n; ++k) S.coeffRef(k, k) -= sigma;
    Eigen::SimplicialLDLT<SpMat> solver(S);
    if (solver.info() != Eigen::Success) fail(ErrorKind::numerical_blowup, "hopf_cole_eigenvalue: factorization failed");

    Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
    x.normalize();
    EigenResult res;
    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;
    for (int it = 1; it <= max_iter; ++it) {
        Eigen::VectorXd y = solver.solve(x);
        y.normalize();
        const Eigen::VectorXd Ay = A * y;
        const double rho = y.dot(Ay);
        const double r = (Ay - rho * y).norm();
        x = y;
        res.lambda = rho;
        res.residual = r;
        res.iterations = it;
        if (r < tol) break;
        if (r < best * 0.999) {
            best = r;
            since_best = 0;
        } else if (++since_best > 50) {
            fail(ErrorKind::convergence, "hopf_cole_eigenvalue: inverse iteration stagnates at residual " +
                                             format_double(r));
        }
        if (it == max_iter)
            fail(ErrorKind::convergence, "hopf_cole_eigenvalue: no convergence in " + std::to_string(max_iter) +
                                             " iterations, residual " + format_double(r));
    }
    GridFunction w(g, 0.0);
    const double sgn = x.sum() < 0.0 ? -1.0 : 1.0;
    const double xmax = x.cwiseAbs().maxCoeff();
    for (int k = 0; k < n; ++k) w.values[interior_to_parent(g, inner, static_cast<std::size_t>(k))] = sgn * x[k] / xmax;
    res.ground_state = std::move(w);
    return res;
}

// ---------------------------------------------------------------------------
// Hopf–Cole parabolic

struct HopfColeOptions {
    double safety = 0.9;
    bool rescale = true;  ///< renormalize w by a power of two every step
};

/**
 * u(·,T) for u_t - Δu + |Du|² = f through w = exp(-u), w_t = Δ_h w - f w,
 * integrated explicitly with Δt = safety/(2N/h² + max f). Box faces are
 * reflecting (mirror ghost node), a torus wraps. Rescaling by 2^k keeps w
 * in range without rounding, and the exponent is carried back into u.
 */
inline GridFunction hopf_cole_parabolic(const GridFunction& f, const GridFunction& u0, double T,
                                        const HopfColeOptions& opt = {}) {
    require_same_grid(f, u0, "hopf_cole_parabolic");
    if (!(T >= 0.0)) fail(ErrorKind::contract, "hopf_cole_parabolic: T must be >= 0");
    u0.require_finite("hopf_cole_parabolic: initial datum");
    const Grid& g = f.grid;
    const double base = min_value(u0);
    std::vector<double> w(g.size()), r(g.size());
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::exp(-(u0.values[k] - base));
    const double ih2 = 1.0 / (g.h() * g.h());
    const double dt_max = opt.safety / (2.0 * g.dim() * ih2 + std::max(0.0, max_value(f)));
    const int a = g.axis_size();
    const bool torus = g.kind() == GridKind::torus;
    auto nb = [&](int i, int d) {
        const int q = i + d;
        if (torus) return (q + a) % a;
        if (q < 0) return 1;
        if (q >= a) return a - 2;
        return q;
    };
    long exponent = 0;
    double t = 0.0;
    while (t < T - 1e-12 * std::max(1.0, T)) {
        const double dt = std::min(dt_max, T - t);
        for (std::size_t k = 0; k < w.size(); ++k) {
            const int i = g.ix(k), j = g.iy(k);
            double lap = w[g.flat(nb(i, -1), j)] + w[g.flat(nb(i, 1), j)] - 2.0 * w[k];
            if (g.dim() == 2) lap += w[g.flat(i, nb(j, -1))] + w[g.flat(i, nb(j, 1))] - 2.0 * w[k];
            r[k] = lap * ih2 - f.values[k] * w[k];
        }
        double wmax = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) {
            w[k] += dt * r[k];
            if (!(w[k] > 0.0)) fail(ErrorKind::numerical_blowup, "hopf_cole_parabolic: w lost positivity");
            wmax = std::max(wmax, w[k]);
        }
        if (opt.rescale) {
            int e = 0;
            std::frexp(wmax, &e);
            if (e != 0) {
                for (double& v : w) v = std::ldexp(v, -e);
                exponent += e;
            }
        }
        t += dt;
    }
    GridFunction u(g);
    const double ln2 = std::log(2.0);
    for (std::size_t k = 0; k < w.size(); ++k) u.values[k] = -std::log(w[k]) - static_cast<double>(exponent) * ln2 + base;
    return u;
}

}  // namespace vhj
