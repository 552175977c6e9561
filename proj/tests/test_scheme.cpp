#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "vhj/reference.hpp"
#include "vhj/scheme.hpp"

using namespace vhj;

namespace {

constexpr double kPi = std::numbers::pi;

double max_abs(const GridFunction& g) {
    double m = 0.0;
    for (double v : g.values) m = std::max(m, std::abs(v));
    return m;
}

std::size_t node_at(const Grid& g, int offset_x, int offset_y = 0) {
    return g.flat(g.half_count() + offset_x, g.dim() == 2 ? g.half_count() + offset_y : 0);
}

// Periodic manufactured data on [-π, π]^N: ψ = β Σ cos x_i and
// f = λ - Δψ + |Dψ|^m, so (λ, ψ) solves the ergodic problem on the torus.
struct TorusData {
    GridFunction psi, f;
};

TorusData torus_data(int dim, int n, double m, double lambda, double beta) {
    const Grid t = Grid::torus(dim, kPi, n);
    TorusData d{sample(t, [&](const Point& x) {
                    double s = 0.0;
                    for (int i = 0; i < dim; ++i) s += beta * std::cos(x[i]);
                    return s;
                }),
                sample(t, [&](const Point& x) {
                    double c = 0.0, g2 = 0.0;
                    for (int i = 0; i < dim; ++i) {
                        c += beta * std::cos(x[i]);
                        g2 += beta * beta * std::sin(x[i]) * std::sin(x[i]);
                    }
                    return lambda + c + std::pow(g2, 0.5 * m);
                })};
    return d;
}

}  // namespace

TEST(NumericalHamiltonian, ConstantIsZero) {
    const Grid g = Grid::box(2, 1.0, 11);
    const GridFunction u(g, 3.0);
    for (double m : {1.2, 2.0}) EXPECT_EQ(numerical_hamiltonian(u, node_at(g, 1, -2), m), 0.0);
}

TEST(NumericalHamiltonian, LinearFunction) {
    const Grid g = Grid::box(1, 1.0, 21);
    const GridFunction u = sample(g, [](const Point& x) { return x[0]; });
    EXPECT_NEAR(numerical_hamiltonian(u, node_at(g, 3), 2.0), 1.0, 1e-12);
    EXPECT_NEAR(hybrid_hamiltonian(u, node_at(g, 3), 2.0), 1.0, 1e-12);
}

TEST(NumericalHamiltonian, VShapeMinimumIsZero) {
    const Grid g = Grid::box(1, 1.0, 21);
    const GridFunction u = sample(g, [](const Point& x) { return std::abs(x[0]); });
    EXPECT_EQ(numerical_hamiltonian(u, g.origin(), 2.0), 0.0);
    EXPECT_EQ(numerical_hamiltonian(u, g.origin(), 1.5), 0.0);
}

TEST(NumericalHamiltonian, BoundaryNodeIsRejected) {
    const Grid g = Grid::box(1, 1.0, 21);
    EXPECT_THROW(numerical_hamiltonian(GridFunction(g), 0, 2.0), Error);
    EXPECT_THROW(discrete_laplacian(GridFunction(g), 20), Error);
    const Grid t = Grid::torus(1, 1.0, 21);
    EXPECT_NO_THROW(numerical_hamiltonian(GridFunction(t), 0, 2.0));
}

TEST(NumericalHamiltonian, PositivelyHomogeneous) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const Grid g = Grid::box(2, 1.0, 11);
    for (int k = 0; k < 200; ++k) {
        GridFunction u(g);
        for (double& v : u.values) v = u01(rng);
        const double c = 3.0 * u01(rng);
        const double m = 1.0 + u01(rng);
        const GridFunction cu = transform(u, [c](double v) { return c * v; });
        const std::size_t node = node_at(g, 1, 2);
        const double lhs = numerical_hamiltonian(cu, node, m);
        const double rhs = std::pow(c, m) * numerical_hamiltonian(u, node, m);
        EXPECT_NEAR(lhs, rhs, 1e-12 * (1.0 + std::abs(rhs)));
    }
}

TEST(NumericalHamiltonian, HomogeneityIsBitExactForPowersOfTwoWhenQuadratic) {
    const Grid g = Grid::box(1, 1.0, 21);
    const GridFunction u = sample(g, [](const Point& x) { return std::sin(3.0 * x[0]); });
    const GridFunction u4 = transform(u, [](double v) { return 4.0 * v; });
    for (std::size_t node = 1; node + 1 < g.size(); ++node)
        EXPECT_EQ(numerical_hamiltonian(u4, node, 2.0), 16.0 * numerical_hamiltonian(u, node, 2.0));
}

TEST(DiscreteLaplacian, Examples) {
    const Grid g1 = Grid::box(1, 1.0, 21);
    EXPECT_NEAR(discrete_laplacian(sample(g1, [](const Point& x) { return 3.0 * x[0] - 1.0; }), node_at(g1, 4)), 0.0,
                1e-11);
    const GridFunction q1 = sample(g1, [](const Point& x) { return x[0] * x[0]; });
    for (int i = -9; i <= 9; ++i) EXPECT_NEAR(discrete_laplacian(q1, node_at(g1, i)), 2.0, 1e-11);
    const Grid g2 = Grid::box(2, 2.0, 17);
    const GridFunction q2 = sample(g2, [](const Point& x) { return x[0] * x[0] + x[1] * x[1]; });
    EXPECT_NEAR(discrete_laplacian(q2, node_at(g2, 3, -5)), 4.0, 1e-12);
    EXPECT_EQ(discrete_laplacian(q2, g2.origin()), 4.0);
}

TEST(ResidualErgodic, ManufacturedPairIsSecondOrderOrBetter) {
    for (const auto& [m, dim] : {std::pair{1.5, 1}, std::pair{2.0, 2}}) {
        const OracleSolution o = manufactured(m, dim);
        const Grid g = Grid::box(dim, 3.0, dim == 1 ? 61 : 31);
        const GridFunction r =
            residual_ergodic(o.lambda_exact, sample(g, o.phi_exact), sample(o.f, g), m, Stencil::central);
        EXPECT_LT(max_abs(r), g.h() * g.h());
    }
}

TEST(ResidualErgodic, LambdaShiftIsExact) {
    const OracleSolution o = manufactured_perturbed(1.5, 1, 0.2);
    const Grid g = Grid::box(1, 3.0, 61);
    const GridFunction phi = sample(g, o.phi_exact), f = sample(o.f, g);
    const GridFunction r0 = residual_ergodic(1.0, phi, f, 1.5, Stencil::central);
    const GridFunction r1 = residual_ergodic(1.25, phi, f, 1.5, Stencil::central);
    for (std::size_t k = 0; k < r0.size(); ++k) EXPECT_NEAR(r1[k] - r0[k], 0.25, 1e-13);
}

TEST(ResidualErgodic, GridMismatchIsAnError) {
    EXPECT_THROW(residual_ergodic(1.0, GridFunction(Grid::box(1, 1.0, 9)), GridFunction(Grid::box(1, 1.0, 11)), 2.0,
                                  Stencil::central),
                 Error);
}

TEST(ResidualErgodic, CentralStencilRefinesAtSecondOrder) {
    for (int dim : {1, 2}) {
        const OracleSolution o = manufactured_perturbed(1.5, dim, 0.3);
        std::vector<double> hs, rs;
        for (int n : dim == 1 ? std::vector<int>{41, 81, 161, 321} : std::vector<int>{21, 41, 81, 161}) {
            const Grid g = Grid::box(dim, 4.0, n);
            hs.push_back(g.h());
            rs.push_back(max_abs(
                residual_ergodic(o.lambda_exact, sample(g, o.phi_exact), sample(o.f, g), o.m, Stencil::central)));
        }
        for (std::size_t k = 1; k < hs.size(); ++k) {
            const double slope = std::log(rs[k - 1] / rs[k]) / std::log(hs[k - 1] / hs[k]);
            EXPECT_NEAR(slope, 2.0, 0.2) << "dim=" << dim << " refinement " << k;
        }
    }
}

TEST(ResidualErgodic, PeriodicDataOnTheTorus) {
    const TorusData d = torus_data(2, 41, 1.5, 0.7, 0.4);
    const GridFunction r = residual_ergodic(0.7, d.psi, d.f, 1.5, Stencil::central);
    EXPECT_EQ(r.size(), d.psi.size());
    EXPECT_LT(max_abs(r), d.psi.grid.h() * d.psi.grid.h());
}

TEST(ResidualScaledSuper, Examples) {
    const OracleSolution o = manufactured(2.0, 1);
    const Grid g = Grid::box(1, 4.0, 81);
    const GridFunction phi = sample(g, o.phi_exact), f = sample(o.f, g);
    EXPECT_NEAR(residual_scaled_super(1.0, o.lambda_exact, phi, f, 2.0), 0.0, 1e-12);
    EXPECT_GE(residual_scaled_super(1.2, o.lambda_exact, phi, f, 2.0), -1e-12);
    EXPECT_EQ(residual_scaled_super(2.0, 3.0, GridFunction(g, 0.0), GridFunction(g, 3.0), 2.0), 0.0);
}

TEST(ResidualScaledSuper, RejectsMuBelowOne) {
    const Grid g = Grid::box(1, 1.0, 11);
    EXPECT_THROW(residual_scaled_super(0.9, 1.0, GridFunction(g), GridFunction(g), 2.0), Error);
}

TEST(ResidualScaledSuper, LowerBoundIsUniformInMu) {
    // The defect of the perturbed pair is O(h²); scaling by μ ≥ 1 only adds
    // the nonnegative surplus (μ^m - μ)|Dφ|^m, so one constant serves all μ.
    const OracleSolution o = manufactured_perturbed(1.5, 1, 0.3);
    for (int n : {81, 161, 321}) {
        const Grid g = Grid::box(1, 4.0, n);
        const GridFunction phi = sample(g, o.phi_exact), f = sample(o.f, g);
        const double h2 = g.h() * g.h();
        for (double mu : {1.0, 1.25, 1.5, 2.0})
            EXPECT_GE(residual_scaled_super(mu, o.lambda_exact, phi, f, o.m), -0.5 * h2) << "n=" << n << " mu=" << mu;
    }
}

TEST(ResidualScaledSub, Examples) {
    const TorusData d = torus_data(1, 81, 2.0, 1.0, 0.5);
    const double h2 = d.psi.grid.h() * d.psi.grid.h();
    EXPECT_NEAR(residual_scaled_sub(1.0, 1.0, d.psi, d.f, 2.0), 0.0, h2);
    EXPECT_EQ(residual_scaled_sub(0.0, 1.0, d.psi, d.f, 2.0), 0.0);
    EXPECT_LE(residual_scaled_sub(0.8, 1.0, d.psi, d.f, 2.0), h2);
}

TEST(ResidualScaledSub, ContractErrors) {
    const TorusData d = torus_data(1, 41, 2.0, 1.0, 0.5);
    EXPECT_THROW(residual_scaled_sub(1.1, 1.0, d.psi, d.f, 2.0), Error);
    const Grid b = Grid::box(1, 1.0, 11);
    EXPECT_THROW(residual_scaled_sub(0.5, 1.0, GridFunction(b), GridFunction(b), 2.0), Error);
}

TEST(CflTimestep, WorkedExample) {
    SchemeConfig cfg;
    cfg.cfl_safety = 1.0;
    cfg.grad_cap = 1.0;
    const Grid g = Grid::box(1, 1.0, 21);
    EXPECT_NEAR(cfl_timestep(g, cfg, 2.0), 1.0 / 220.0, 1e-15);
}

TEST(CflTimestep, LinearInSafety) {
    SchemeConfig cfg;
    cfg.cfl_safety = 0.8;
    const Grid g = Grid::box(2, 3.0, 61);
    const double a = cfl_timestep(g, cfg, 1.5);
    cfg.cfl_safety = 0.4;
    EXPECT_DOUBLE_EQ(cfl_timestep(g, cfg, 1.5), 0.5 * a);
}

TEST(CflTimestep, RefinementShrinksByTwoToFour) {
    SchemeConfig cfg;
    cfg.grad_cap = 4.0;
    for (double m : {1.2, 1.5, 2.0}) {
        const double a = cfl_timestep(Grid::box(1, 1.0, 21), cfg, m);
        const double b = cfl_timestep(Grid::box(1, 1.0, 41), cfg, m);
        EXPECT_GT(a / b, 2.0);
        EXPECT_LT(a / b, 4.0);
    }
}

TEST(CflTimestep, RejectsNonpositiveCap) {
    SchemeConfig cfg;
    cfg.grad_cap = 0.0;
    EXPECT_THROW(cfl_timestep(Grid::box(1, 1.0, 21), cfg, 2.0), Error);
}

TEST(SchemeConfig, Validation) {
    SchemeConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.cfl_safety = 1.5;
    EXPECT_THROW(cfg.validate(), Error);
    cfg = SchemeConfig{};
    cfg.grad_cap = -1.0;
    EXPECT_THROW(cfg.validate(), Error);
}

TEST(Hamiltonian, HybridFormIsRestrictedToOneDimensionOrQuadratic) {
    EXPECT_EQ(resolve_hamiltonian(HamiltonianKind::automatic, 1, 1.5), HamiltonianKind::hybrid);
    EXPECT_EQ(resolve_hamiltonian(HamiltonianKind::automatic, 2, 2.0), HamiltonianKind::hybrid);
    EXPECT_EQ(resolve_hamiltonian(HamiltonianKind::automatic, 2, 1.5), HamiltonianKind::rouy_tourin);
    EXPECT_THROW(resolve_hamiltonian(HamiltonianKind::hybrid, 2, 1.5), Error);
}

TEST(EvolutionOperator, UpdateIsMonotoneInNeighbourValues) {
    // u ≤ w with equal centre value: the explicit update at that node is
    // u0 + dt·rate, so monotonicity reduces to rate(u) ≤ rate(w) there.
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    struct Case {
        int dim;
        double m;
        HamiltonianKind kind;
        GridKind grid;
    };
    const Case cases[] = {{1, 2.0, HamiltonianKind::hybrid, GridKind::box},
                          {1, 1.5, HamiltonianKind::hybrid, GridKind::box},
                          {1, 1.2, HamiltonianKind::rouy_tourin, GridKind::box},
                          {2, 2.0, HamiltonianKind::hybrid, GridKind::box},
                          {2, 1.5, HamiltonianKind::rouy_tourin, GridKind::box},
                          {2, 1.5, HamiltonianKind::rouy_tourin, GridKind::torus}};
    std::size_t checked = 0;
    for (const Case& c : cases) {
        const Grid g = c.grid == GridKind::box ? Grid::box(c.dim, 2.0, c.dim == 1 ? 21 : 11)
                                               : Grid::torus(c.dim, 2.0, 11);
        const EvolutionOperator op(g, sample(SourceSpec::power_law(2.0), g).values, c.m, c.kind, 1.0);
        std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
        std::vector<double> ru, rw;
        for (int k = 0; k < 250; ++k) {
            GridFunction u(g);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const Point x = g.point(i);
                u.values[i] = 0.5 * (x[0] * x[0] + x[1] * x[1]) + 0.5 * (u01(rng) - 0.5);
            }
            GridFunction w = u;
            for (double& v : w.values) v += 0.3 * u01(rng);
            const std::size_t node = pick(rng);
            w.values[node] = u.values[node];
            op.rate(u.values, ru);
            op.rate(w.values, rw);
            EXPECT_LE(ru[node], rw[node] + 1e-9 * (1.0 + std::abs(rw[node])));
            ++checked;
        }
    }
    EXPECT_GE(checked, 1000u);
}
