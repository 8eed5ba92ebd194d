#include "mflq/ode.hpp"

#include <doctest.h>
#include <unsupported/Eigen/MatrixFunctions>

using namespace mflq;

namespace {

// dx/dt = x^2 with x(T) = xT has x(t) = 1 / (1/xT + T - t): smooth on [0, T].
OdeRhs square_rhs() {
    return [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy[0] = y[0] * y[0]; };
}

// dx/dt = -x^2 with x(T) = xT has x(t) = 1 / (t - T + 1/xT): a pole appears
// backward in time at t = T - 1/xT.
OdeRhs neg_square_rhs() {
    return [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy[0] = -y[0] * y[0]; };
}

IntegratorOptions tight() {
    IntegratorOptions o;
    o.rtol = 1e-11;
    o.atol = 1e-13;
    return o;
}

}  // namespace

TEST_CASE("backward scalar quadratic ODE matches the closed form") {
    TimeGrid grid = TimeGrid::uniform(1.0, 101);
    Eigen::VectorXd yT(1);
    yT[0] = 1.0;  // x(t) = 1 / (2 - t)
    auto out = integrate_backward(square_rhs(), yT, grid, tight());
    REQUIRE(out.solved());
    REQUIRE(int(out.solution.size()) == grid.num_points);
    double err = 0.0;
    for (int i = 0; i < grid.num_points; ++i)
        err = std::max(err, std::abs(out.solution[i][0] - 1.0 / (2.0 - grid.time(i))));
    CHECK(err < 1e-8);
    CHECK(out.solution.back()[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("finite escape is detected with a tight bracket") {
    TimeGrid grid = TimeGrid::uniform(1.0, 101);
    Eigen::VectorXd yT(1);
    yT[0] = 2.0;  // pole at t = 0.5 going backward
    auto out = integrate_backward(neg_square_rhs(), yT, grid);
    REQUIRE_FALSE(out.solved());
    CHECK(out.solution.empty());
    CHECK(out.escape_hi > out.escape_lo);
    CHECK(out.escape_hi - out.escape_lo <= 1e-3 + 1e-12);
    const double mid = 0.5 * (out.escape_lo + out.escape_hi);
    CHECK(std::abs(mid - 0.5) < 2e-3);
}

TEST_CASE("matrix linear system against the matrix exponential") {
    // dX/dt = -A X backward from X(T) = I gives X(t) = exp(A (T - t)).
    Eigen::MatrixXd A(3, 3);
    A << 0.2, -0.5, 0.1, 0.4, 0.0, -0.3, -0.2, 0.6, 0.1;
    const int n = 3;
    OdeRhs rhs = [&](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
        Eigen::Map<const Eigen::MatrixXd> X(y.data(), n, n);
        Eigen::Map<Eigen::MatrixXd> dX(dy.data(), n, n);
        dX = -A * X;
    };
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd yT = Eigen::Map<Eigen::VectorXd>(I.data(), n * n);
    TimeGrid grid = TimeGrid::uniform(2.0, 81);
    auto out = integrate_backward(rhs, yT, grid, tight());
    REQUIRE(out.solved());
    double err = 0.0;
    for (int i = 0; i < grid.num_points; ++i) {
        Eigen::MatrixXd truth = (A * (2.0 - grid.time(i))).exp();
        Eigen::Map<const Eigen::MatrixXd> X(out.solution[i].data(), n, n);
        err = std::max(err, (X - truth).cwiseAbs().maxCoeff());
    }
    CHECK(err < 1e-8);
}

TEST_CASE("refine_escape_bracket narrows a coarse interval") {
    TimeGrid grid = TimeGrid::uniform(1.0, 11);
    Eigen::VectorXd yT(1);
    yT[0] = 2.0;
    auto bracket = refine_escape_bracket(neg_square_rhs(), yT, grid, {0.1, 0.9});
    CHECK(bracket.second - bracket.first <= 1e-3 + 1e-12);
    CHECK(std::abs(0.5 * (bracket.first + bracket.second) - 0.5) < 2e-3);

    // No escape anywhere: the coarse interval does not bracket anything.
    OdeRhs flat = [](double, const Eigen::VectorXd&, Eigen::VectorXd& dy) { dy.setZero(); };
    Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
    CHECK_THROWS_AS(refine_escape_bracket(flat, one, grid, {0.1, 0.9}), std::invalid_argument);
}

TEST_CASE("non-finite terminal derivative is rejected") {
    OdeRhs bad = [](double, const Eigen::VectorXd&, Eigen::VectorXd& dy) {
        dy[0] = std::numeric_limits<double>::quiet_NaN();
    };
    Eigen::VectorXd yT = Eigen::VectorXd::Zero(1);
    CHECK_THROWS_AS(integrate_backward(bad, yT, TimeGrid::uniform(1.0, 11)),
                    std::invalid_argument);
}

TEST_CASE("post_step hook runs after every accepted step") {
    int calls = 0;
    IntegratorOptions opts;
    opts.post_step = [&](double, Eigen::VectorXd& y) {
        ++calls;
        y[1] = y[0];  // keep a mirrored component exactly in sync
    };
    OdeRhs rhs = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
        dy[0] = -y[0];
        dy[1] = -y[1];
    };
    Eigen::VectorXd yT(2);
    yT << 1.0, 1.0;
    auto out = integrate_backward(rhs, yT, TimeGrid::uniform(1.0, 21), opts);
    REQUIRE(out.solved());
    CHECK(calls > 0);
    for (const auto& y : out.solution) CHECK(y[0] == y[1]);
}
