#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "vhj/parabolic.hpp"
#include "vhj/reference.hpp"

using namespace vhj;

namespace {

ProblemSpec power_problem(double m, int dim, double alpha = 2.0) {
    ProblemSpec p;
    p.m = m;
    p.dim = dim;
    p.f = SourceSpec::power_law(alpha);
    return p;
}

bool ordered(const GridFunction& a, const GridFunction& b, double tol = 1e-12) {
    for (std::size_t k = 0; k < a.size(); ++k)
        if (a[k] > b[k] + tol) return false;
    return true;
}

// A hand-built trace of u(t) = φ + λt sampled every `dt` on [0, T].
DiagnosticsTrace linear_in_time_trace(double lambda, double dt, double T) {
    const Grid g = Grid::box(1, 2.0, 41);
    const GridFunction phi = sample(g, half_square);
    DiagnosticsTrace tr;
    tr.window = 2.0;
    for (int k = 0; k * dt <= T + 1e-12; ++k)
        tr.snapshots.push_back({k * dt, transform(phi, [&](double v) { return v + lambda * k * dt; })});
    return tr;
}

}  // namespace

TEST(Step, ConstantsAreStationaryWithoutSource) {
    for (const Grid& g : {Grid::box(1, 2.0, 41), Grid::box(2, 2.0, 21), Grid::torus(2, 2.0, 21)}) {
        EvolutionState s;
        s.u = GridFunction(g, 1.75);
        for (double m : {1.3, 2.0}) {
            const EvolutionState n = step(s, GridFunction(g, 0.0), m, boundary_of(g), 1e-3);
            for (std::size_t k = 0; k < g.size(); ++k) {
                if (g.is_boundary(k)) continue;
                EXPECT_EQ(n.u[k], 1.75);
            }
            EXPECT_DOUBLE_EQ(n.t, 1e-3);
        }
    }
}

TEST(Step, HybridFacesPushUpwardOnConstants) {
    // Face nodes only admit inward drifts of speed >= 2/h, whose running cost
    // lifts a flat profile; the Rouy-Tourin face rule leaves it alone.
    const Grid g = Grid::box(1, 2.0, 41);
    EvolutionState s;
    s.u = GridFunction(g, 1.75);
    const GridFunction f(g, 0.0);
    const EvolutionState hyb = step(s, f, 2.0, BoundaryKind::state_constraint, 1e-4);
    EXPECT_GT(hyb.u.values.front(), 1.75);
    EXPECT_EQ(hyb.u.values.front(), hyb.u.values.back());
    SchemeConfig rt;
    rt.hamiltonian = HamiltonianKind::rouy_tourin;
    const EvolutionState r = step(s, f, 2.0, BoundaryKind::state_constraint, 1e-4, rt);
    for (double v : r.u.values) EXPECT_EQ(v, 1.75);
}

TEST(Step, UnitSourceIntegratesExactly) {
    const Grid g = Grid::box(1, 2.0, 41);
    EvolutionState s;
    s.u = GridFunction(g, 0.0);
    const EvolutionState n = step(s, GridFunction(g, 1.0), 2.0, BoundaryKind::state_constraint, 2e-3);
    for (std::size_t k = 1; k + 1 < g.size(); ++k) EXPECT_DOUBLE_EQ(n.u[k], 2e-3);
}

TEST(Step, ManufacturedProfileAdvancesAtLambda) {
    for (const auto& [m, dim] : {std::pair{2.0, 1}, std::pair{1.5, 1}, std::pair{2.0, 2}}) {
        const OracleSolution o = manufactured(m, dim);
        const Grid g = Grid::box(dim, 3.0, dim == 1 ? 121 : 61);
        EvolutionState s;
        s.u = sample(g, o.phi_exact);
        const double dt = 1e-4;
        const EvolutionState n = step(s, sample(o.f, g), m, BoundaryKind::state_constraint, dt);
        const GridFunction inc = restrict(combine(n.u, s.u, [](double a, double b) { return a - b; }), 2.0);
        for (double v : inc.values) EXPECT_NEAR(v, o.lambda_exact * dt, 4.0 * g.h() * dt) << "m=" << m;
    }
}

TEST(Step, ContractErrors) {
    const Grid g = Grid::box(1, 2.0, 41);
    EvolutionState s;
    s.u = GridFunction(g, 0.0);
    EXPECT_THROW(step(s, GridFunction(g, 0.0), 2.0, BoundaryKind::periodic, 1e-3), Error);
    EXPECT_THROW(step(s, GridFunction(g, 0.0), 2.0, BoundaryKind::state_constraint, -1.0), Error);
    try {
        step(s, GridFunction(g, 0.0), 2.0, BoundaryKind::state_constraint, 1.0);
        FAIL() << "oversized step accepted";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::numerical_blowup);
    }
}

TEST(Evolve, ZeroHorizonLeavesStateUnchanged) {
    ProblemSpec p = power_problem(1.5, 1);
    p.u0 = InitialSpec::bowl(0.3, 1.0);
    const Grid g = Grid::box(1, 2.0, 41);
    const EvolutionState s = evolve(p, g, 0.0, SchemeConfig{});
    EXPECT_EQ(s.t, 0.0);
    EXPECT_EQ(s.u.values, sample(p.u0, g).values);
    EXPECT_THROW(evolve(p, g, -1.0, SchemeConfig{}), Error);
}

TEST(Evolve, OscillatorSlopeApproachesGroundEnergy) {
    const EvolutionState s = evolve(power_problem(2.0, 1), Grid::box(1, 8.0, 321), 20.0, SchemeConfig{});
    ASSERT_FALSE(s.trace.records.empty());
    EXPECT_NEAR(s.trace.records.back().slope, 1.0, 0.05);
    EXPECT_DOUBLE_EQ(s.t, 20.0);
}

TEST(Evolve, StationaryProfileStartAdvancesUniformly) {
    ProblemSpec p = power_problem(1.5, 1, 1.5);
    p.u0 = InitialSpec::closed(half_square, "phi");
    EvolveOptions opt;
    opt.window = 2.0;
    const EvolutionState s = evolve(p, Grid::box(1, 6.0, 241), 10.0, SchemeConfig{}, opt);
    const auto& snaps = s.trace.snapshots;
    ASSERT_GE(snaps.size(), 2u);
    const GridFunction d = combine(snaps.back().u, snaps[snaps.size() - 2].u, [](double a, double b) { return a - b; });
    EXPECT_DOUBLE_EQ(snaps.back().t - snaps[snaps.size() - 2].t, 1.0);
    for (double v : d.values) EXPECT_NEAR(v, 1.0, 0.02);
}

TEST(Evolve, ComparisonOnRandomOrderedPairs) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int dim : {1, 2}) {
        const ProblemSpec p = power_problem(dim == 1 ? 1.5 : 2.0, dim);
        const Grid g = Grid::box(dim, 2.0, dim == 1 ? 41 : 21);
        const EvolutionOperator op(g, sample(p.f, g).values, p.m, SchemeConfig{});
        EvolveOptions opt;
        opt.sample_interval = 0.25;
        opt.slope_lag = 0.25;
        opt.keep_full_snapshots = true;
        opt.fixed_dt = 1e-3;
        for (int k = 0; k < 5; ++k) {
            GridFunction u0(g), w0(g);
            for (std::size_t i = 0; i < g.size(); ++i) {
                u0.values[i] = 0.2 * u01(rng);
                w0.values[i] = u0.values[i] + 0.2 * u01(rng);
            }
            const EvolutionState a = evolve(op, u0, 1.0, SchemeConfig{}, opt);
            const EvolutionState b = evolve(op, w0, 1.0, SchemeConfig{}, opt);
            ASSERT_EQ(a.trace.full_snapshots.size(), b.trace.full_snapshots.size());
            for (std::size_t j = 0; j < a.trace.full_snapshots.size(); ++j)
                EXPECT_TRUE(ordered(a.trace.full_snapshots[j].u, b.trace.full_snapshots[j].u)) << "sample " << j;
        }
    }
}

TEST(Evolve, LargerBoxGivesSmallerSolution) {
    const ProblemSpec p = power_problem(2.0, 1);
    const EvolutionState small = evolve(p, Grid::box(1, 2.0, 81), 2.0, SchemeConfig{});
    const EvolutionState large = evolve(p, Grid::box(1, 4.0, 161), 2.0, SchemeConfig{});
    const GridFunction a = restrict(small.u, 1.5), b = restrict(large.u, 1.5);
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_LE(b[k], a[k] + 1e-9);
}

TEST(Evolve, NonnegativityIsPreserved) {
    ProblemSpec p = power_problem(1.5, 2, 1.5);
    p.u0 = InitialSpec::make_bump(1.0, 0.5, {0.5, -0.5});
    EvolveOptions opt;
    opt.sample_interval = 0.1;
    opt.slope_lag = 0.1;
    opt.keep_full_snapshots = true;
    const EvolutionState s = evolve(p, Grid::box(2, 2.0, 41), 1.0, SchemeConfig{}, opt);
    for (const auto& snap : s.trace.full_snapshots) EXPECT_GE(min_value(snap.u), 0.0);
}

TEST(Evolve, SuperlinearGrowthInSpace) {
    const EvolutionState s = evolve(power_problem(1.5, 1), Grid::box(1, 8.0, 321), 1.0, SchemeConfig{});
    double prev = -INFINITY;
    for (double r : {1.0, 2.0, 4.0}) {
        const double q = interpolate(s.u, {r, 0.0}) / r;
        EXPECT_GT(q, prev) << "r=" << r;
        prev = q;
    }
}

TEST(Evolve, BlowUpGuardAborts) {
    ProblemSpec p = power_problem(2.0, 1);
    p.u0 = InitialSpec::bowl(1.0);
    SchemeConfig cfg;
    cfg.grad_hard_limit = 0.5;
    try {
        evolve(p, Grid::box(1, 4.0, 81), 1.0, cfg);
        FAIL() << "guard did not trigger";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::numerical_blowup);
        EXPECT_NE(std::string(e.what()).find("measured gradient"), std::string::npos) << e.what();
    }
}

TEST(Evolve, TraceTimesIncrease) {
    EvolveOptions opt;
    opt.sample_interval = 0.5;
    opt.slope_lag = 1.0;
    const EvolutionState s = evolve(power_problem(2.0, 1), Grid::box(1, 4.0, 81), 3.0, SchemeConfig{}, opt);
    ASSERT_EQ(s.trace.records.size(), 7u);
    EXPECT_EQ(s.trace.records.front().t, 0.0);
    for (std::size_t k = 1; k < s.trace.records.size(); ++k)
        EXPECT_GT(s.trace.records[k].t, s.trace.records[k - 1].t);
    EXPECT_TRUE(std::isnan(s.trace.records[1].slope));
    EXPECT_FALSE(std::isnan(s.trace.records[2].slope));
}

TEST(HolderQuotient, LinearInTimeProfile) {
    const DiagnosticsTrace tr = linear_in_time_trace(1.5, 0.25, 3.0);
    EXPECT_NEAR(holder_quotient(tr, -1.0, 0.0, 1.0), 1.5, 1e-12);
    EXPECT_NEAR(holder_quotient(tr, -1.0, 0.0, 0.5), 1.5 * std::sqrt(0.5), 1e-12);
}

TEST(HolderQuotient, ConstantInTimeIsZero) {
    const DiagnosticsTrace tr = linear_in_time_trace(0.0, 0.5, 2.0);
    EXPECT_EQ(holder_quotient(tr, -1.0, 0.0, 1.0), 0.0);
}

TEST(HolderQuotient, NeedsTwoSamples) {
    const DiagnosticsTrace tr = linear_in_time_trace(1.0, 1.0, 0.0);
    EXPECT_THROW(holder_quotient(tr, -1.0, 0.0, 1.0), Error);
}

TEST(HolderQuotient, StableUnderSamplingRefinement) {
    const ProblemSpec p = power_problem(2.0, 1);
    const Grid g = Grid::box(1, 4.0, 81);
    double q[2];
    for (int k = 0; k < 2; ++k) {
        EvolveOptions opt;
        opt.sample_interval = k == 0 ? 0.1 : 0.05;
        opt.slope_lag = 1.0;
        q[k] = holder_quotient(evolve(p, g, 3.0, SchemeConfig{}, opt).trace);
    }
    EXPECT_LT(std::abs(q[1] - q[0]) / q[0], 0.1);
}

TEST(GradientMonitor, Examples) {
    const Grid g = Grid::box(1, 4.0, 81);
    const GridFunction phi = sample(g, half_square);
    EXPECT_NEAR(gradient_monitor(phi, 2.0), 2.0, g.h());
    EXPECT_EQ(gradient_monitor(GridFunction(g, 3.0), 2.0), 0.0);
    EXPECT_THROW(gradient_monitor(phi, 4.0), Error);
}

TEST(GradientMonitor, ManufacturedRatioIsAtMostOne) {
    for (double m : {1.2, 1.5, 2.0})
        for (int dim : {1, 2}) {
            const OracleSolution o = manufactured(m, dim);
            const Grid g = Grid::box(dim, 4.0, dim == 1 ? 161 : 41);
            for (double w : {1.0, 2.0}) {
                const GradientBoundReport r = gradient_bound_ratio(sample(g, o.phi_exact), sample(o.f, g), m, w);
                EXPECT_LE(r.ratio, 1.0) << "m=" << m << " dim=" << dim << " w=" << w;
                EXPECT_GT(r.ratio, 0.0);
            }
        }
}

TEST(TraceCsv, Header) {
    DiagnosticsTrace tr;
    tr.records.push_back({1.0, 0.5, 2.0, 0.25, 1e-3});
    std::ostringstream os;
    write_trace_csv(tr, os);
    EXPECT_EQ(os.str(), "t,slope,max_grad,holder_q,dt\n1,0.5,2,0.25,0.001\n");
}
