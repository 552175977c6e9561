#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "vhj/asymptotics.hpp"
#include "vhj/reference.hpp"

using namespace vhj;

namespace {

ProblemSpec power_problem(double m, double alpha) {
    ProblemSpec p;
    p.m = m;
    p.dim = 1;
    p.f = SourceSpec::power_law(alpha);
    return p;
}

LargeTimeConfig short_run(double T) {
    LargeTimeConfig c;
    c.half_width = 8.0;
    c.nodes_per_axis = 321;
    c.T = T;
    return c;
}

// Oscillator from u0 = 0 up to T = 20, shared by the barrier tests.
const LargeTimeReport& oscillator_history() {
    static const LargeTimeReport rep = run_large_time(power_problem(2.0, 2.0), 1.0, half_square, short_run(20.0));
    return rep;
}

}  // namespace

TEST(CHatEstimate, Examples) {
    const Grid g = Grid::box(1, 4.0, 81);
    const GridFunction phi = sample(g, half_square);
    const CHat a = estimate_c_hat(phi, phi, 2.0);
    EXPECT_EQ(a.value, 0.0);
    EXPECT_EQ(a.flatness, 0.0);
    const CHat b = estimate_c_hat(transform(phi, [](double v) { return v + 3.0; }), phi, 2.0);
    EXPECT_NEAR(b.value, 3.0, 1e-14);
    EXPECT_NEAR(b.flatness, 0.0, 1e-14);
}

TEST(CHatEstimate, InjectedNoiseStaysWithinAmplitude) {
    std::mt19937_64 rng(17);
    const Grid g = Grid::box(2, 3.0, 31);
    const GridFunction phi = sample(g, half_square);
    for (double eps : {1e-3, 0.1}) {
        std::uniform_real_distribution<double> noise(-eps, eps);
        for (int k = 0; k < 50; ++k) {
            const GridFunction v = transform(phi, [&](double x) { return x + 3.0 + noise(rng); });
            const CHat c = estimate_c_hat(v, phi, 1.6);
            EXPECT_NEAR(c.value, 3.0, eps);
            EXPECT_LE(c.flatness, 2.0 * eps);
        }
    }
}

TEST(LargeTime, StationaryStart) {
    for (double m : {1.5, 2.0}) {
        ProblemSpec p = power_problem(m, m);
        p.u0 = InitialSpec::closed(half_square, "phi");
        const LargeTimeReport r = run_large_time(p, 1.0, half_square, short_run(5.0));
        EXPECT_NEAR(r.c_hat, 0.0, 1e-3) << "m=" << m;
        for (const auto& row : r.history) EXPECT_LT(row.profile_error, 0.05) << "t=" << row.t;
        EXPECT_EQ(r.phi_offset, 0.0);
    }
}

TEST(LargeTime, ShiftedStartPropagatesTheShift) {
    ProblemSpec p = power_problem(1.5, 1.5);
    p.u0 = InitialSpec::closed(half_square, "phi");
    p.u0.offset = 5.0;
    const LargeTimeReport r = run_large_time(p, 1.0, half_square, short_run(5.0));
    EXPECT_NEAR(r.c_hat, 5.0, 1e-3);
    EXPECT_LT(r.final_error, 0.05);
}

TEST(LargeTime, OscillatorFromZeroConverges) {
    const LargeTimeReport& r = oscillator_history();
    EXPECT_LT(r.final_error, 0.05);
    EXPECT_TRUE(r.converged);
    EXPECT_TRUE(r.eventually_decreasing);
    EXPECT_FALSE(std::isnan(r.t_n));
    EXPECT_LT(r.history.back().mean_slope_error, 0.05);
    for (std::size_t k = 1; k < r.history.size(); ++k) EXPECT_GT(r.history[k].t, r.history[k - 1].t);
    for (const auto& row : r.history) EXPECT_GE(row.profile_error, 0.0);
}

TEST(LargeTime, ConfigErrors) {
    LargeTimeConfig c = short_run(0.0);
    try {
        run_large_time(power_problem(2.0, 2.0), 1.0, half_square, c);
        FAIL() << "T = 0 accepted";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config);
    }
    c = short_run(1.0);
    c.half_width = 4.0;
    c.window = 2.0;
    EXPECT_THROW(run_large_time(power_problem(2.0, 2.0), 1.0, half_square, c), Error);
}

TEST(Barrier, UpperWithExactDataHasMarginEpsilon) {
    ProblemSpec p = power_problem(2.0, 2.0);
    p.u0 = InitialSpec::closed(half_square, "phi");
    const LargeTimeReport lt = run_large_time(p, 1.0, half_square, short_run(3.0));
    const OracleSolution o = manufactured(2.0, 1);
    const Grid g = Grid::box(1, 4.0, 161);
    ErgodicApprox run;
    run.half_width = 4.0;
    run.constant = 1.0;
    run.profile = sample(g, o.phi_exact);
    run.source = sample(o.f, g);
    run.full_source = run.source;
    run.m = 2.0;
    BarrierConfig bc;
    const BarrierReport r = barrier_check_upper(run, half_square, 1.0, lt, bc);
    EXPECT_EQ(r.scale, 1.0);
    EXPECT_NEAR(r.m_value, 0.0, 1e-12);
    EXPECT_NEAR(r.initial_margin, bc.epsilon, 1e-6);
    EXPECT_TRUE(r.pass);
}

TEST(Barrier, ZeroEpsilonIsRejected) {
    const LargeTimeReport& lt = oscillator_history();
    BarrierConfig bc;
    bc.epsilon = 0.0;
    ErgodicApprox run;
    EXPECT_THROW(barrier_check_upper(run, half_square, 1.0, lt, bc), Error);
}

TEST(Barrier, OscillatorLadders) {
    const LargeTimeReport& lt = oscillator_history();
    const ProblemSpec p = power_problem(2.0, 2.0);
    std::vector<double> m_up, m_lo;
    for (double R : {4.0, 8.0}) {
        const BarrierReport r = barrier_check_upper(solve_state_constraint(p, R), half_square, 1.0, lt);
        EXPECT_TRUE(r.pass) << "R=" << R;
        m_up.push_back(r.m_value);
    }
    for (double cutoff : {16.0, 64.0}) {
        const BarrierReport r = barrier_check_lower(solve_periodic(p, cutoff), half_square, 1.0, lt);
        EXPECT_TRUE(r.pass) << "cutoff=" << cutoff;
        EXPECT_LE(r.scale, 1.0);
        m_lo.push_back(r.m_value);
    }
    EXPECT_TRUE(decreasing_to_zero(m_up, 0.05));
    EXPECT_TRUE(decreasing_to_zero(m_lo, 0.05));
}

TEST(Barrier, WrongRunKindIsRejected) {
    const ErgodicApprox periodic = [] {
        ErgodicApprox a;
        a.kind = ApproxKind::periodic;
        return a;
    }();
    EXPECT_THROW(barrier_check_upper(periodic, half_square, 1.0, oscillator_history()), Error);
    EXPECT_THROW(barrier_check_lower(ErgodicApprox{}, half_square, 1.0, oscillator_history()), Error);
}

TEST(Sandwich, HoldsAfterTn) {
    const SandwichReport s = sandwich_check(oscillator_history(), half_square, 0.1, 0.0);
    EXPECT_TRUE(s.pass);
    EXPECT_LE(s.min_gap, s.max_gap);
}

TEST(EventuallyDecreasing, Cases) {
    EXPECT_TRUE(eventually_decreasing({5, 4, 6, 3, 2, 1, 0.5, 0.4}, 0.0));
    EXPECT_FALSE(eventually_decreasing({5, 4, 3, 2, 1, 2, 3, 4}, 0.0));
    EXPECT_FALSE(eventually_decreasing({1, 0.5}, 0.0));
    EXPECT_TRUE(eventually_decreasing({1, 1, 1, 1}, 0.0));
}

TEST(DecreasingToZero, Cases) {
    EXPECT_TRUE(decreasing_to_zero({0.3, 0.1, 0.01}, 0.02));
    EXPECT_FALSE(decreasing_to_zero({0.3, 0.1, 0.05}, 0.02));
    EXPECT_FALSE(decreasing_to_zero({0.01, 0.3, 0.01}, 0.02));
    EXPECT_FALSE(decreasing_to_zero({}, 0.1));
}

TEST(HistoryCsv, Header) {
    LargeTimeReport r;
    r.history.push_back({1.0, 0.5, 0.1, 0.05, 0.2, 0.1});
    std::ostringstream os;
    write_history_csv(r, os);
    EXPECT_EQ(os.str(), "t,c_hat,flatness,profile_error,slope_error,mean_slope_error\n1,0.5,0.1,0.05,0.2,0.1\n");
}
