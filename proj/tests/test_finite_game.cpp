#include "helpers.hpp"
#include "mflq/finite_game.hpp"

#include <doctest.h>

using namespace mflq;

namespace {

IntegratorOptions tight() {
    IntegratorOptions o;
    o.rtol = 1e-10;
    o.atol = 1e-12;
    return o;
}

// Permutation of the stacked state exchanging minor players i and j (1-based).
Eigen::MatrixXd swap_minors(int n, int N, int i, int j) {
    const int dim = (N + 1) * n;
    Eigen::MatrixXd J = Eigen::MatrixXd::Identity(dim, dim);
    J.block(i * n, i * n, n, n).setZero();
    J.block(j * n, j * n, n, n).setZero();
    J.block(i * n, j * n, n, n).setIdentity();
    J.block(j * n, i * n, n, n).setIdentity();
    return J;
}

}  // namespace

TEST_CASE("assembled structured solution matches the dense oracle") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 4; ++trial) {
        const int n = 1 + trial % 2;
        const int N = 2 + trial;
        GameParams p = random_params(rng, n);
        TimeGrid grid = TimeGrid::uniform(p.T, 201);

        auto sres = solve_structured(p, N, grid, tight());
        REQUIRE(sres.verdict.solvable);
        auto offs = solve_structured_offsets(p, *sres.riccati, tight());
        auto assembled = assemble_dense(*sres.riccati, offs);
        auto dense = solve_dense_oracle(p, N, grid, tight());

        CHECK(sup_traj_diff(assembled.P[0], dense.P[0]) < 1e-8);
        CHECK(sup_traj_diff(assembled.P[1], dense.P[1]) < 1e-8);
        CHECK(sup_traj_diff(assembled.S[0], dense.S[0]) < 1e-8);
        CHECK(sup_traj_diff(assembled.S[1], dense.S[1]) < 1e-8);
        CHECK(sup_traj_diff(assembled.r[0], dense.r[0]) < 1e-8);
        CHECK(sup_traj_diff(assembled.r[1], dense.r[1]) < 1e-8);
    }
}

TEST_CASE("dense oracle exhibits the exchangeability block pattern") {
    std::mt19937_64 rng(5);
    const int n = 2, N = 3;
    GameParams p = random_params(rng, n);
    TimeGrid grid = TimeGrid::uniform(p.T, 101);
    auto dense = solve_dense_oracle(p, N, grid, tight());

    double err = 0.0;
    for (std::size_t k = 0; k < dense.P[0].size(); ++k) {
        const auto& P0 = dense.P[0][k];
        const auto& P1 = dense.P[1][k];
        // major player's value: all minor diagonal blocks coincide (Pi4_0 = Pi3_0)
        for (int i = 2; i <= N; ++i) {
            err = std::max(err, (P0.block(n, n, n, n) - P0.block(i * n, i * n, n, n))
                                    .cwiseAbs().maxCoeff());
            err = std::max(err,
                           (P0.block(0, n, n, n) - P0.block(0, i * n, n, n)).cwiseAbs().maxCoeff());
        }
        // minor player's value: peer blocks coincide (Pi4 = Pi3)
        err = std::max(err, (P1.block(2 * n, 2 * n, n, n) - P1.block(3 * n, 3 * n, n, n))
                                .cwiseAbs().maxCoeff());
        err = std::max(err,
                       (P1.block(0, 2 * n, n, n) - P1.block(0, 3 * n, n, n)).cwiseAbs().maxCoeff());
        err = std::max(err, (P1.block(n, 2 * n, n, n) - P1.block(n, 3 * n, n, n))
                                .cwiseAbs().maxCoeff());
    }
    CHECK(err < 1e-8);

    // player 2's value is player 1's under the minor-swap conjugation
    const Eigen::MatrixXd J = swap_minors(n, N, 1, 2);
    double cerr = 0.0;
    for (std::size_t k = 0; k < dense.P[0].size(); ++k) {
        cerr = std::max(cerr,
                        (dense.P[2][k] - J.transpose() * dense.P[1][k] * J).cwiseAbs().maxCoeff());
        cerr = std::max(cerr, (dense.S[2][k] - J.transpose() * dense.S[1][k]).cwiseAbs().maxCoeff());
        cerr = std::max(cerr, std::abs(dense.r[2][k] - dense.r[1][k]));
    }
    CHECK(cerr < 1e-8);
}

TEST_CASE("zero weights give the zero dense solution") {
    GameParams p = GameParams::zeros(1, 1, 1);
    p.R0 = s1(1.0);
    p.R = s1(1.0);
    p.A0 = s1(0.4);
    p.A = s1(-0.2);
    auto dense = solve_dense_oracle(p, 2, TimeGrid::uniform(1.0, 51));
    double m = 0.0;
    for (int j = 0; j < 3; ++j)
        for (std::size_t k = 0; k < dense.P[j].size(); ++k) {
            m = std::max(m, dense.P[j][k].cwiseAbs().maxCoeff());
            m = std::max(m, dense.S[j][k].cwiseAbs().maxCoeff());
            m = std::max(m, std::abs(dense.r[j][k]));
        }
    CHECK(m < 1e-12);
}

TEST_CASE("rescaled blocks keep their N-independent size") {
    GameParams p = ex1_params();
    auto sres = solve_structured(p, 10, TimeGrid::uniform(p.T, 301));
    REQUIRE(sres.verdict.solvable);
    auto v = rescale(*sres.riccati);
    CHECK(v.L1_0N.size() == 301);
    CHECK((v.L2_0N[0] - 10.0 * sres.riccati->Pi2_0[0]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((v.L3_N[0] - 100.0 * sres.riccati->Pi3[0]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constant term matches independent quadrature of its derivative") {
    GameParams p = ex1_params();
    p.eta0 = Eigen::VectorXd::Constant(1, 0.4);
    p.eta = Eigen::VectorXd::Constant(1, 0.7);
    const int N = 3;
    TimeGrid grid = TimeGrid::uniform(p.T, 1201);
    auto sres = solve_structured(p, N, grid, tight());
    REQUIRE(sres.verdict.solvable);
    auto offs = solve_structured_offsets(p, *sres.riccati, tight());
    auto d = derive_coeffs(p);

    const auto& s = *sres.riccati;
    auto integrand = [&](int i) {
        return offs.th0_0[i].dot(d.M0 * offs.th0_0[i]) +
               2.0 * N * offs.th1_0[i].dot(d.M * offs.th1[i]) - p.eta0.dot(p.Q0 * p.eta0) -
               (p.D0.transpose() * s.Pi1_0[i] * p.D0).trace() -
               double(N) * (p.D.transpose() * s.Pi3_0[i] * p.D).trace();
    };
    const double h = grid.dt();
    double integral = 0.0;
    for (int i = 0; i + 2 < 1201; i += 2)
        integral += h / 3.0 * (integrand(i) + 4.0 * integrand(i + 1) + integrand(i + 2));
    CHECK(std::abs(offs.r0[0] - (0.0 - integral)) < 1e-6);
}

TEST_CASE("nash gains match the feedback formula at the terminal time") {
    std::mt19937_64 rng(9);
    GameParams p = random_params(rng, 1);
    const int N = 3;
    auto dense = solve_dense_oracle(p, N, TimeGrid::uniform(p.T, 101));
    auto g = nash_gains(dense, p);
    CHECK(g.K0[0].rows() == 1);
    CHECK(g.K0[0].cols() == (N + 1));
    REQUIRE(g.Ki.size() == N);
    // K0(T) = R0^-1 B0hat' P0(T) with B0hat = [B0; 0; ...]
    Eigen::MatrixXd B0hat = Eigen::MatrixXd::Zero(N + 1, 1);
    B0hat(0, 0) = p.B0(0, 0);
    Eigen::MatrixXd expect = p.R0.ldlt().solve(B0hat.transpose() * dense.P[0].back());
    CHECK((g.K0.back() - expect).cwiseAbs().maxCoeff() < 1e-10);
}
