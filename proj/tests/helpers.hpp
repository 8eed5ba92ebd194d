#pragma once

#include "mflq/model.hpp"

#include <random>

// Shared fixtures: the two bundled scalar examples and a generator of random
// valid parameter sets used by the property suites.

inline Eigen::MatrixXd s1(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

inline mflq::GameParams ex1_params() {
    mflq::GameParams p = mflq::GameParams::zeros(1, 1, 1);
    p.A0 = s1(1.0);
    p.B0 = s1(2.0);
    p.F0 = s1(0.5);
    p.A = s1(0.5);
    p.B = s1(1.0);
    p.F = s1(0.2);
    p.G = s1(0.4);
    p.D0 = s1(1.0);
    p.D = s1(1.0);
    p.Q0 = s1(1.0);
    p.R0 = s1(0.5);
    p.Gamma0 = s1(0.8);
    p.Q = s1(2.0);
    p.R = s1(1.0);
    p.Gamma1 = s1(0.3);
    p.Gamma2 = s1(0.5);
    p.T = 12.0;
    return p;
}

inline mflq::GameParams ex2_params() {
    mflq::GameParams p = mflq::GameParams::zeros(1, 1, 1);
    p.A0 = s1(0.3);
    p.B0 = s1(1.0);
    p.F0 = s1(0.2);
    p.A = s1(0.2);
    p.B = s1(1.0);
    p.F = s1(1.0);
    p.G = s1(-0.2);
    p.D0 = s1(1.0);
    p.D = s1(1.0);
    p.Q0 = s1(2.0);
    p.R0 = s1(1.0);
    p.Gamma0 = s1(0.8);
    p.Q = s1(1.0);
    p.R = s1(1.0);
    p.Gamma1 = s1(0.1);
    p.Gamma2 = s1(1.2);
    p.T = 2.5;
    return p;
}

// Moderate magnitudes and a unit horizon keep almost every draw solvable.
inline mflq::GameParams random_params(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    auto rnd = [&](int r, int c, double scale) {
        Eigen::MatrixXd m(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) m(i, j) = scale * u(rng);
        return m;
    };
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    auto psd = [&](double scale) {
        Eigen::MatrixXd w = rnd(n, n, 1.0);
        return (scale * (w * w.transpose() + 0.1 * I)).eval();
    };

    mflq::GameParams p = mflq::GameParams::zeros(n, n, n);
    p.A0 = rnd(n, n, 1.0);
    p.A = rnd(n, n, 1.0);
    p.F0 = rnd(n, n, 0.6);
    p.F = rnd(n, n, 0.6);
    p.G = rnd(n, n, 0.6);
    p.B0 = I + rnd(n, n, 0.4);
    p.B = I + rnd(n, n, 0.4);
    p.D0 = rnd(n, n, 1.0);
    p.D = rnd(n, n, 1.0);
    p.Q0 = psd(1.0);
    p.Q = psd(1.0);
    p.Q0f = psd(0.3);
    p.Qf = psd(0.3);
    p.R0 = psd(0.5) + 0.5 * I;
    p.R = psd(0.5) + 0.5 * I;
    p.Gamma0 = rnd(n, n, 0.5);
    p.Gamma1 = rnd(n, n, 0.5);
    p.Gamma2 = rnd(n, n, 0.5);
    p.Gamma0f = rnd(n, n, 0.5);
    p.Gamma1f = rnd(n, n, 0.5);
    p.Gamma2f = rnd(n, n, 0.5);
    p.eta0 = rnd(n, 1, 1.0);
    p.eta = rnd(n, 1, 1.0);
    p.eta0f = rnd(n, 1, 1.0);
    p.etaf = rnd(n, 1, 1.0);
    p.T = 1.0;
    return p;
}

// Scalar Riccati dλ/dt = M λ² − 2aλ − q with λ(T) = 0 in closed form.
inline double scalar_riccati_closed_form(double M, double a, double q, double T, double t) {
    const double d = std::sqrt(a * a + M * q);
    const double tau = T - t;
    return q * std::sinh(d * tau) / (d * std::cosh(d * tau) - a * std::sinh(d * tau));
}

template <class Traj>
double sup_traj_diff(const Traj& x, const Traj& y) {
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if constexpr (std::is_same_v<typename Traj::value_type, double>)
            m = std::max(m, std::abs(x[i] - y[i]));
        else
            m = std::max(m, (x[i] - y[i]).cwiseAbs().maxCoeff());
    }
    return m;
}
