#include "helpers.hpp"
#include "mflq/tracking.hpp"

#include <doctest.h>

using namespace mflq;

namespace {

IntegratorOptions tight() {
    IntegratorOptions o;
    o.rtol = 1e-10;
    o.atol = 1e-12;
    return o;
}

}  // namespace

TEST_CASE("tracking blocks reproduce the limit solution on example 1") {
    GameParams p = ex1_params();
    p.eta0 = Eigen::VectorXd::Constant(1, 0.2);
    p.eta = Eigen::VectorXd::Constant(1, -0.4);
    TimeGrid grid = TimeGrid::uniform(p.T, 601);
    auto res = solve_limit_riccati(p, grid);
    REQUIRE(res.verdict.solvable);
    auto a = solve_limit_offsets(p, *res.riccati);
    auto bt = solve_tracking(p, grid);
    auto report = verify_consistency(*res.riccati, a, bt);
    CHECK(report.pass);
    CHECK(report.max_residual < 1e-6);
    CHECK(report.residuals.size() == 14);
}

TEST_CASE("blockwise and monolithic tracking solvers agree") {
    GameParams p = ex1_params();
    p.eta = Eigen::VectorXd::Constant(1, 0.3);
    TimeGrid grid = TimeGrid::uniform(p.T, 601);
    auto mono = solve_tracking(p, grid, tight(), false);
    auto block = solve_tracking(p, grid, tight(), true);
    CHECK(sup_traj_diff(mono.PP0, block.PP0) < 1e-8);
    CHECK(sup_traj_diff(mono.SS0, block.SS0) < 1e-8);
    CHECK(sup_traj_diff(mono.PP, block.PP) < 1e-8);
    CHECK(sup_traj_diff(mono.SS, block.SS) < 1e-8);
}

TEST_CASE("an injected perturbation fails the consistency check") {
    GameParams p = ex1_params();
    TimeGrid grid = TimeGrid::uniform(p.T, 301);
    auto res = solve_limit_riccati(p, grid);
    REQUIRE(res.verdict.solvable);
    auto a = solve_limit_offsets(p, *res.riccati);
    auto bt = solve_tracking(p, grid);
    LimitRiccati bad = *res.riccati;
    for (auto& m : bad.L1) m.array() += 1e-3;
    auto report = verify_consistency(bad, a, bt);
    CHECK_FALSE(report.pass);
    CHECK(report.max_residual >= 1e-4);
}

TEST_CASE("major player's tracking riccati stays positive semidefinite") {
    std::mt19937_64 rng(13);
    GameParams p = random_params(rng, 2);
    TimeGrid grid = TimeGrid::uniform(p.T, 201);
    auto sol = solve_p0(p, grid);
    for (int k = 0; k < 201; k += 25) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sol.PP0[k]);
        CHECK(es.eigenvalues().minCoeff() > -1e-8);
    }
}

TEST_CASE("zero weights give identically zero residuals") {
    GameParams p = GameParams::zeros(1, 1, 1);
    p.R0 = s1(1.0);
    p.R = s1(1.0);
    TimeGrid grid = TimeGrid::uniform(1.0, 101);
    auto res = solve_limit_riccati(p, grid);
    auto a = solve_limit_offsets(p, *res.riccati);
    auto bt = solve_tracking(p, grid);
    auto report = verify_consistency(*res.riccati, a, bt);
    CHECK(report.pass);
    CHECK(report.max_residual < 1e-12);
}

TEST_CASE("grid mismatch is rejected") {
    GameParams p = ex1_params();
    TimeGrid g1 = TimeGrid::uniform(p.T, 301);
    TimeGrid g2 = TimeGrid::uniform(p.T, 201);
    auto res = solve_limit_riccati(p, g1);
    auto a = solve_limit_offsets(p, *res.riccati);
    auto bt = solve_tracking(p, g2);
    CHECK_THROWS_AS(verify_consistency(*res.riccati, a, bt), std::invalid_argument);
}
