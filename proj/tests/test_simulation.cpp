#include "helpers.hpp"
#include "mflq/simulation.hpp"

#include <doctest.h>

using namespace mflq;

namespace {

GameParams short_ex1() {
    GameParams p = ex1_params();
    p.T = 1.0;
    return p;
}

NashGains solved_nash_gains(const GameParams& p, int N, double dt) {
    const int points = int(std::llround(p.T / dt)) + 1;
    auto dense = solve_dense_oracle(p, N, TimeGrid::uniform(p.T, points));
    return nash_gains(dense, p);
}

}  // namespace

TEST_CASE("counter-based normals are deterministic with sane moments") {
    double a0, a1, b0, b1;
    detail::normal_pair(42, 7, 3, 1, a0, a1);
    detail::normal_pair(42, 7, 3, 1, b0, b1);
    CHECK(a0 == b0);
    CHECK(a1 == b1);
    detail::normal_pair(42, 7, 3, 2, b0, b1);
    CHECK(a0 != b0);

    double sum = 0.0, sq = 0.0;
    const int m = 100000;
    for (int i = 0; i < m / 2; ++i) {
        double z0, z1;
        detail::normal_pair(1, i, 1, 0, z0, z1);
        sum += z0 + z1;
        sq += z0 * z0 + z1 * z1;
    }
    CHECK(std::abs(sum / m) < 0.02);
    CHECK(std::abs(sq / m - 1.0) < 0.02);
}

TEST_CASE("same seed gives bitwise-identical estimates") {
    GameParams p = short_ex1();
    auto gains = solved_nash_gains(p, 2, 1e-2);
    SimConfig cfg;
    cfg.N = 2;
    cfg.num_paths = 64;
    cfg.dt = 1e-2;
    cfg.seed = 99;
    cfg.law = InitialLaw::zeros(1);
    cfg.law.Sigma0 = s1(1.0);
    cfg.law.Sigma = s1(1.0);
    auto r1 = simulate(p, gains, cfg);
    auto r2 = simulate(p, gains, cfg);
    CHECK(r1.J0.mean == r2.J0.mean);
    CHECK(r1.J1.mean == r2.J1.mean);
    CHECK(r1.J0.std_error == r2.J0.std_error);
    cfg.seed = 100;
    auto r3 = simulate(p, gains, cfg);
    CHECK(r1.J0.mean != r3.J0.mean);
}

TEST_CASE("zero data gives exactly zero costs") {
    GameParams p = short_ex1();
    p.D0 = p.D = s1(0.0);
    auto gains = solved_nash_gains(p, 2, 1e-2);
    SimConfig cfg;
    cfg.N = 2;
    cfg.num_paths = 8;
    cfg.dt = 1e-2;
    cfg.law = InitialLaw::zeros(1);
    auto r = simulate(p, gains, cfg);
    CHECK(r.J0.mean == 0.0);
    CHECK(r.J1.mean == 0.0);
    CHECK(r.deviation.mean_sq_sup == 0.0);
}

TEST_CASE("zero noise reduces to the deterministic closed loop") {
    GameParams p = short_ex1();
    p.D0 = p.D = s1(0.0);
    p.eta0 = Eigen::VectorXd::Constant(1, 0.1);
    const int N = 2;
    const double dt = 1e-4;
    auto gains = solved_nash_gains(p, N, dt);

    SimConfig cfg;
    cfg.N = N;
    cfg.num_paths = 2;
    cfg.dt = dt;
    cfg.law = InitialLaw::zeros(1);
    cfg.law.mu0 = Eigen::VectorXd::Constant(1, 0.5);
    cfg.law.mu = Eigen::VectorXd::Constant(1, -0.3);
    auto r = simulate(p, gains, cfg);

    // Independent scalar Euler loop over the same feedback.
    const int steps = int(std::llround(p.T / dt));
    Eigen::Vector3d X(0.5, -0.3, -0.3);
    Eigen::Matrix3d Ahat;
    Ahat << p.A0(0, 0), p.F0(0, 0) / N, p.F0(0, 0) / N,
            p.G(0, 0), p.A(0, 0) + p.F(0, 0) / N, p.F(0, 0) / N,
            p.G(0, 0), p.F(0, 0) / N, p.A(0, 0) + p.F(0, 0) / N;
    double j0 = 0.0, j1 = 0.0;
    for (int k = 0; k < steps; ++k) {
        const double xbar = 0.5 * (X[1] + X[2]);
        const double u0 = -(gains.K0[k] * X)(0) - gains.k0[k][0];
        const double u1 = -(gains.Ki[0][k] * X)(0) - gains.ki[0][k][0];
        const double u2 = -(gains.Ki[1][k] * X)(0) - gains.ki[1][k][0];
        const double e0 = X[0] - p.Gamma0(0, 0) * xbar - p.eta0[0];
        const double e1 = X[1] - p.Gamma1(0, 0) * X[0] - p.Gamma2(0, 0) * xbar;
        j0 += dt * (p.Q0(0, 0) * e0 * e0 + p.R0(0, 0) * u0 * u0);
        j1 += dt * (p.Q(0, 0) * e1 * e1 + p.R(0, 0) * u1 * u1);
        Eigen::Vector3d u(u0, u1, u2);
        Eigen::Vector3d Bu(p.B0(0, 0) * u0, p.B(0, 0) * u1, p.B(0, 0) * u2);
        X = X + dt * (Ahat * X + Bu);
    }
    CHECK(std::abs(r.J0.mean - j0) < 1e-6);
    CHECK(std::abs(r.J1.mean - j1) < 1e-6);
    CHECK(r.J0.std_error == 0.0);  // all paths identical
}

TEST_CASE("realized nash cost matches the value-function prediction") {
    GameParams p = short_ex1();
    const int N = 2;
    const double dt = 5e-3;
    const int points = int(std::llround(p.T / dt)) + 1;
    auto dense = solve_dense_oracle(p, N, TimeGrid::uniform(p.T, points));
    auto gains = nash_gains(dense, p);

    SimConfig cfg;
    cfg.N = N;
    cfg.num_paths = 4000;
    cfg.dt = dt;
    cfg.seed = 4;
    cfg.law = InitialLaw::zeros(1);
    cfg.law.Sigma0 = s1(1.0);
    cfg.law.Sigma = s1(1.0);
    auto r = simulate(p, gains, cfg);
    const double v0 = predicted_value(dense, p, cfg.law, 0);
    const double v1 = predicted_value(dense, p, cfg.law, 1);
    CHECK(std::abs(r.J0.mean - v0) < 3.0 * r.J0.std_error + 0.05);
    CHECK(std::abs(r.J1.mean - v1) < 3.0 * r.J1.std_error + 0.05);
}

TEST_CASE("mean-field deviation scales like 1/N") {
    GameParams p = short_ex1();
    TimeGrid grid = TimeGrid::uniform(p.T, 101);
    auto res = solve_limit_riccati(p, grid);
    REQUIRE(res.verdict.solvable);
    auto a = solve_limit_offsets(p, *res.riccati);
    auto gains = limit_strategy_gains(p, *res.riccati, a);

    SimConfig cfg;
    cfg.num_paths = 400;
    cfg.dt = 1e-2;
    cfg.seed = 11;
    cfg.law = InitialLaw::zeros(1);
    cfg.law.Sigma0 = s1(1.0);
    cfg.law.Sigma = s1(1.0);
    auto table = deviation_sweep(p, gains, {25, 100, 400}, cfg);
    REQUIRE(table.size() == 3);
    const double r1 = table[0].second.mean_sq_sup / table[1].second.mean_sq_sup;
    const double r2 = table[1].second.mean_sq_sup / table[2].second.mean_sq_sup;
    CHECK(r1 > 2.5);
    CHECK(r1 < 6.0);
    CHECK(r2 > 2.5);
    CHECK(r2 < 6.0);
}

TEST_CASE("configuration errors are rejected") {
    GameParams p = short_ex1();
    auto gains = solved_nash_gains(p, 2, 1e-2);
    SimConfig cfg;
    cfg.N = 2;
    cfg.dt = 1e-2;
    cfg.law = InitialLaw::zeros(1);

    cfg.num_paths = 1;
    CHECK_THROWS_AS(simulate(p, gains, cfg), std::invalid_argument);
    cfg.num_paths = 4;
    cfg.dt = 0.3;  // does not divide T = 1
    CHECK_THROWS_AS(simulate(p, gains, cfg), std::invalid_argument);
    cfg.dt = 1e-3;  // finer than the solved gain grid
    CHECK_THROWS_AS(simulate(p, gains, cfg), std::invalid_argument);
}

TEST_CASE("predicted value reduces to r at the zero law") {
    GameParams p = short_ex1();
    auto dense = solve_dense_oracle(p, 2, TimeGrid::uniform(p.T, 101));
    const double v = predicted_value(dense, p, InitialLaw::zeros(1), 0);
    CHECK(v == doctest::Approx(dense.r[0][0]).epsilon(1e-12));
}
