#include "mflq/simulation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace mflq {

namespace detail {

namespace {
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
inline double uniform53(std::uint64_t h) {
    // strictly inside (0, 1)
    return (double(h >> 11) + 0.5) * 0x1.0p-53;
}

// Inverse normal CDF (Acklam's rational approximation, |rel err| < 1.2e-9);
// no transcendentals in the central region, which keeps the Monte Carlo loop
// off the libm hot path.
double inv_normal_cdf(double u) {
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double lo = 0.02425;
    if (u < lo) {
        const double q = std::sqrt(-2.0 * std::log(u));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (u > 1.0 - lo) {
        const double q = std::sqrt(-2.0 * std::log(1.0 - u));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = u - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}
}  // namespace

void normal_pair(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::uint64_t pair,
                 double& z0, double& z1) {
    const std::uint64_t h = mix64(mix64(mix64(mix64(seed) ^ path) ^ step) ^ pair);
    z0 = inv_normal_cdf(uniform53(h));
    z1 = inv_normal_cdf(uniform53(mix64(h ^ 0x5851f42d4c957f2dULL)));
}

}  // namespace detail

namespace {

double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 16) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

CostEstimate estimate(const std::vector<double>& samples) {
    const std::size_t n = samples.size();
    CostEstimate e;
    e.num_paths = int(n);
    e.mean = pairwise_sum(samples.data(), n) / double(n);
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = samples[i] - e.mean;
        sq[i] = d * d;
    }
    const double var = pairwise_sum(sq.data(), n) / double(n - 1);
    e.std_error = std::sqrt(var / double(n));
    return e;
}

// Symmetric PSD square root (covariances may be singular, so no Cholesky).
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& S) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

int checked_steps(const GameParams& p, const SimConfig& cfg) {
    if (cfg.num_paths < 2) throw std::invalid_argument("simulate: num_paths must be >= 2");
    if (!(cfg.dt > 0.0)) throw std::invalid_argument("simulate: dt must be positive");
    const double ratio = p.T / cfg.dt;
    const long long steps = std::llround(ratio);
    if (steps < 1 || std::abs(double(steps) * cfg.dt - p.T) > 1e-12 * std::max(1.0, p.T))
        throw std::invalid_argument("simulate: dt must divide the horizon T");
    return int(steps);
}

void check_gain_grid(const TimeGrid& g, const GameParams& p, double dt) {
    if (g.t_start > 1e-12 || g.t_end < p.T - 1e-12 || g.dt() > dt + 1e-12)
        throw std::invalid_argument(
            "simulate: gain schedules must cover [0, T] on a grid at least as fine as dt");
}

template <class T>
T lerp(const std::vector<T>& traj, const TimeGrid& g, double t) {
    const double pos = (t - g.t_start) / g.dt();
    int lo = int(std::floor(pos));
    if (lo < 0) lo = 0;
    if (lo >= g.num_points - 1) return traj.back();
    const double w = pos - lo;
    return traj[lo] * (1.0 - w) + traj[lo + 1] * w;
}

// Column j holds path (first + j); draws are indexed by absolute path, so
// batching does not change the realized noise.
void fill_normals(Eigen::MatrixXd& Z, std::uint64_t seed, std::uint64_t first, std::uint64_t step) {
    const int rows = int(Z.rows());
    const int pairs = (rows + 1) / 2;
    for (int j = 0; j < Z.cols(); ++j) {
        double* col = Z.col(j).data();
        for (int q = 0; q < pairs; ++q) {
            double z0, z1;
            detail::normal_pair(seed, first + std::uint64_t(j), step, std::uint64_t(q), z0, z1);
            col[2 * q] = z0;
            if (2 * q + 1 < rows) col[2 * q + 1] = z1;
        }
    }
}

void draw_initial(Eigen::MatrixXd& X, const GameParams& p, const SimConfig& cfg,
                  std::uint64_t first) {
    const int n = p.n;
    const int N = cfg.N;
    const Eigen::MatrixXd L0 = psd_sqrt(cfg.law.Sigma0);
    const Eigen::MatrixXd L = psd_sqrt(cfg.law.Sigma);
    Eigen::MatrixXd Z((N + 1) * n, X.cols());
    fill_normals(Z, cfg.seed, first, 0);
    X.middleRows(0, n) = (L0 * Z.middleRows(0, n)).colwise() + cfg.law.mu0;
    for (int i = 1; i <= N; ++i)
        X.middleRows(i * n, n) = (L * Z.middleRows(i * n, n)).colwise() + cfg.law.mu;
}

void check_finite(const Eigen::MatrixXd& X, std::uint64_t first, double t) {
    if (X.allFinite()) return;
    for (int j = 0; j < X.cols(); ++j)
        if (!X.col(j).allFinite())
            throw std::runtime_error("simulate: non-finite state on path " +
                                     std::to_string(first + std::uint64_t(j)) + " near t = " +
                                     std::to_string(t));
    throw std::runtime_error("simulate: non-finite state");
}

struct CostAccum {
    const GameParams& p;
    Eigen::VectorXd j0, j1;  // per column of the batch

    explicit CostAccum(const GameParams& params, int cols)
        : p(params), j0(Eigen::VectorXd::Zero(cols)), j1(Eigen::VectorXd::Zero(cols)) {}

    static Eigen::VectorXd quad(const Eigen::MatrixXd& E, const Eigen::MatrixXd& W) {
        return E.cwiseProduct(W * E).colwise().sum().transpose();
    }

    void running(double dt, const Eigen::MatrixXd& X0r, const Eigen::MatrixXd& X1r,
                 const Eigen::MatrixXd& Xbar, const Eigen::MatrixXd& U0,
                 const Eigen::MatrixXd& U1) {
        Eigen::MatrixXd E0 = (X0r - p.Gamma0 * Xbar).colwise() - p.eta0;
        j0 += dt * (quad(E0, p.Q0) + quad(U0, p.R0));
        Eigen::MatrixXd E1 = (X1r - p.Gamma1 * X0r - p.Gamma2 * Xbar).colwise() - p.eta;
        j1 += dt * (quad(E1, p.Q) + quad(U1, p.R));
    }

    void terminal(const Eigen::MatrixXd& X0r, const Eigen::MatrixXd& X1r,
                  const Eigen::MatrixXd& Xbar) {
        Eigen::MatrixXd E0 = (X0r - p.Gamma0f * Xbar).colwise() - p.eta0f;
        j0 += quad(E0, p.Q0f);
        Eigen::MatrixXd E1 = (X1r - p.Gamma1f * X0r - p.Gamma2f * Xbar).colwise() - p.etaf;
        j1 += quad(E1, p.Qf);
    }
};

struct PathDump {
    std::ofstream out;
    int dump_paths = 0;
    bool with_xd = false;

    PathDump(const SimConfig& cfg, int n, bool xd) : dump_paths(cfg.dump_paths), with_xd(xd) {
        if (cfg.path_dump.empty() || dump_paths <= 0) {
            dump_paths = 0;
            return;
        }
        out.open(cfg.path_dump);
        if (!out) throw std::runtime_error("simulate: cannot write " + cfg.path_dump);
        out << "path,t";
        for (int c = 0; c < n; ++c) out << ",X0[" << c << "]";
        for (int c = 0; c < n; ++c) out << ",Xavg[" << c << "]";
        if (with_xd)
            for (int c = 0; c < n; ++c) out << ",Xbar_dagger[" << c << "]";
        out << "\n";
    }

    void record(std::uint64_t first, double t, const Eigen::MatrixXd& X0r,
                const Eigen::MatrixXd& Xbar, const Eigen::MatrixXd* Xd) {
        if (!dump_paths) return;
        for (int j = 0; j < X0r.cols(); ++j) {
            const std::uint64_t path = first + std::uint64_t(j);
            if (path >= std::uint64_t(dump_paths)) break;
            out << path << "," << t;
            for (int c = 0; c < X0r.rows(); ++c) out << "," << X0r(c, j);
            for (int c = 0; c < Xbar.rows(); ++c) out << "," << Xbar(c, j);
            if (with_xd && Xd)
                for (int c = 0; c < Xd->rows(); ++c) out << "," << (*Xd)(c, j);
            out << "\n";
        }
    }
};

int batch_size(int dim, int num_paths) {
    const int cap = int(std::max<std::int64_t>(1, 4'000'000 / std::max(dim, 1)));
    return std::min(num_paths, cap);
}

}  // namespace

SimResult simulate(const GameParams& p, const NashGains& gains, const SimConfig& cfg) {
    validate(p);
    const int steps = checked_steps(p, cfg);
    check_gain_grid(gains.grid, p, cfg.dt);
    const int n = p.n, N = cfg.N;
    if (int(gains.Ki.size()) < N)
        throw std::invalid_argument("simulate: Nash gain set covers fewer minors than cfg.N");
    const int dim = (N + 1) * n;
    const int n2 = int(p.D0.cols());
    const double dt = cfg.dt, sdt = std::sqrt(dt);

    Eigen::MatrixXd Ahat = Eigen::MatrixXd::Zero(dim, dim);
    Ahat.block(0, 0, n, n) = p.A0;
    for (int i = 1; i <= N; ++i) {
        Ahat.block(i * n, i * n, n, n) = p.A;
        Ahat.block(0, i * n, n, n) = p.F0 / double(N);
        Ahat.block(i * n, 0, n, n) = p.G;
        for (int j = 1; j <= N; ++j) Ahat.block(i * n, j * n, n, n) += p.F / double(N);
    }

    // Per-step closed-loop matrices, shared by every path.
    std::vector<Eigen::MatrixXd> Acl(steps), K0t(steps), K1t(steps);
    std::vector<Eigen::VectorXd> bt(steps), k0t(steps), k1t(steps);
    for (int k = 0; k < steps; ++k) {
        const double t = k * dt;
        const Eigen::MatrixXd K0 = lerp(gains.K0, gains.grid, t);
        const Eigen::VectorXd k0 = lerp(gains.k0, gains.grid, t);
        Eigen::MatrixXd A = Ahat;
        Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
        A.middleRows(0, n) -= p.B0 * K0;
        b.segment(0, n) -= p.B0 * k0;
        for (int i = 1; i <= N; ++i) {
            const Eigen::MatrixXd Ki = lerp(gains.Ki[i - 1], gains.grid, t);
            const Eigen::VectorXd ki = lerp(gains.ki[i - 1], gains.grid, t);
            A.middleRows(i * n, n) -= p.B * Ki;
            b.segment(i * n, n) -= p.B * ki;
            if (i == 1) {
                K1t[k] = Ki;
                k1t[k] = ki;
            }
        }
        Acl[k] = std::move(A);
        bt[k] = std::move(b);
        K0t[k] = K0;
        k0t[k] = k0;
    }

    std::vector<double> all_j0, all_j1;
    all_j0.reserve(cfg.num_paths);
    all_j1.reserve(cfg.num_paths);
    PathDump dump(cfg, n, false);
    const int B = batch_size(dim, cfg.num_paths);
    Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(n, dim);  // row selector for the minor average
    for (int i = 1; i <= N; ++i)
        avg.block(0, i * n, n, n) += Eigen::MatrixXd::Identity(n, n) / double(N);

    for (int first = 0; first < cfg.num_paths; first += B) {
        const int cols = std::min(B, cfg.num_paths - first);
        Eigen::MatrixXd X(dim, cols), Z((N + 1) * n2, cols), AX(dim, cols);
        draw_initial(X, p, cfg, std::uint64_t(first));
        CostAccum cost(p, cols);
        for (int k = 0; k < steps; ++k) {
            const Eigen::MatrixXd Xbar = avg * X;
            const Eigen::MatrixXd U0 = (K0t[k] * X).colwise() + k0t[k];
            const Eigen::MatrixXd U1 = (K1t[k] * X).colwise() + k1t[k];
            cost.running(dt, X.middleRows(0, n), X.middleRows(n, n), Xbar, U0, U1);
            dump.record(std::uint64_t(first), k * dt, X.middleRows(0, n), Xbar, nullptr);

            fill_normals(Z, cfg.seed, std::uint64_t(first), std::uint64_t(k) + 1);
            AX.noalias() = Acl[k] * X;
            X += dt * AX;
            X.colwise() += dt * bt[k];
            X.middleRows(0, n) += sdt * (p.D0 * Z.middleRows(0, n2));
            for (int i = 1; i <= N; ++i)
                X.middleRows(i * n, n) += sdt * (p.D * Z.middleRows(i * n2, n2));
            if ((k & 255) == 255) check_finite(X, std::uint64_t(first), (k + 1) * dt);
        }
        check_finite(X, std::uint64_t(first), p.T);
        const Eigen::MatrixXd Xbar = avg * X;
        cost.terminal(X.middleRows(0, n), X.middleRows(n, n), Xbar);
        dump.record(std::uint64_t(first), p.T, X.middleRows(0, n), Xbar, nullptr);
        for (int j = 0; j < cols; ++j) {
            all_j0.push_back(cost.j0[j]);
            all_j1.push_back(cost.j1[j]);
        }
    }

    SimResult res;
    res.J0 = estimate(all_j0);
    res.J1 = estimate(all_j1);
    res.deviation.mean_sq_sup = 0.0;
    res.num_steps = steps;
    return res;
}

SimResult simulate(const GameParams& p, const LimitGains& gains, const SimConfig& cfg) {
    validate(p);
    const int steps = checked_steps(p, cfg);
    check_gain_grid(gains.grid, p, cfg.dt);
    const int n = p.n, N = cfg.N;
    const int n2 = int(p.D0.cols());
    const double dt = cfg.dt, sdt = std::sqrt(dt);

    struct StepGains {
        Eigen::MatrixXd K00, K0bar, Ki0, Kii, Kibar;
        Eigen::VectorXd k0, ki;
    };
    std::vector<StepGains> G(steps);
    for (int k = 0; k < steps; ++k) {
        const double t = k * dt;
        G[k] = {lerp(gains.K00, gains.grid, t),   lerp(gains.K0bar, gains.grid, t),
                lerp(gains.Ki0, gains.grid, t),   lerp(gains.Kii, gains.grid, t),
                lerp(gains.Kibar, gains.grid, t), lerp(gains.k0, gains.grid, t),
                lerp(gains.ki, gains.grid, t)};
    }

    std::vector<double> all_j0, all_j1, all_dev;
    all_j0.reserve(cfg.num_paths);
    all_j1.reserve(cfg.num_paths);
    all_dev.reserve(cfg.num_paths);
    PathDump dump(cfg, n, true);
    const int dim = (N + 1) * n;
    const int B = batch_size(dim + n, cfg.num_paths);

    for (int first = 0; first < cfg.num_paths; first += B) {
        const int cols = std::min(B, cfg.num_paths - first);
        Eigen::MatrixXd X(dim, cols), Z((N + 1) * n2, cols);
        draw_initial(X, p, cfg, std::uint64_t(first));
        Eigen::MatrixXd Xd = cfg.law.mu.replicate(1, cols);  // Xbar_dagger(0) = mu
        Eigen::VectorXd devmax = Eigen::VectorXd::Zero(cols);
        CostAccum cost(p, cols);
        Eigen::MatrixXd Xbar(n, cols);
        for (int k = 0; k < steps; ++k) {
            const auto& g = G[k];
            Xbar.setZero();
            for (int i = 1; i <= N; ++i) Xbar += X.middleRows(i * n, n);
            Xbar /= double(N);
            devmax = devmax.cwiseMax((Xbar - Xd).colwise().squaredNorm().transpose());

            const Eigen::MatrixXd X0r = X.middleRows(0, n);
            const Eigen::MatrixXd U0 =
                -(((g.K00 * X0r + g.K0bar * Xd).colwise() + g.k0).eval());
            const Eigen::MatrixXd Ushared = (g.Ki0 * X0r + g.Kibar * Xd).colwise() + g.ki;
            const Eigen::MatrixXd U1 = -(g.Kii * X.middleRows(n, n) + Ushared);
            cost.running(dt, X0r, X.middleRows(n, n), Xbar, U0, U1);
            dump.record(std::uint64_t(first), k * dt, X0r, Xbar, &Xd);

            fill_normals(Z, cfg.seed, std::uint64_t(first), std::uint64_t(k) + 1);
            // Shared forcing of every minor: F Xbar + G X0 + B u_shared-part
            const Eigen::MatrixXd shared = dt * (p.F * Xbar + p.G * X0r - p.B * Ushared);
            const Eigen::MatrixXd Amin = p.A - p.B * g.Kii;
            for (int i = 1; i <= N; ++i) {
                auto Xi = X.middleRows(i * n, n);
                Xi += dt * (Amin * Xi) + shared + sdt * (p.D * Z.middleRows(i * n2, n2));
            }
            X.middleRows(0, n) +=
                dt * (p.A0 * X0r + p.B0 * U0 + p.F0 * Xbar) + sdt * (p.D0 * Z.middleRows(0, n2));
            Xd += dt * ((p.A + p.F) * Xd - p.B * (g.Kii + g.Kibar) * Xd + p.G * X0r -
                        p.B * (g.Ki0 * X0r)).eval();
            Xd -= (dt * (p.B * g.ki)).replicate(1, cols);
            if ((k & 255) == 255) check_finite(X, std::uint64_t(first), (k + 1) * dt);
        }
        check_finite(X, std::uint64_t(first), p.T);
        Xbar.setZero();
        for (int i = 1; i <= N; ++i) Xbar += X.middleRows(i * n, n);
        Xbar /= double(N);
        devmax = devmax.cwiseMax((Xbar - Xd).colwise().squaredNorm().transpose());
        cost.terminal(X.middleRows(0, n), X.middleRows(n, n), Xbar);
        dump.record(std::uint64_t(first), p.T, X.middleRows(0, n), Xbar, &Xd);
        for (int j = 0; j < cols; ++j) {
            all_j0.push_back(cost.j0[j]);
            all_j1.push_back(cost.j1[j]);
            all_dev.push_back(devmax[j]);
        }
    }

    SimResult res;
    res.J0 = estimate(all_j0);
    res.J1 = estimate(all_j1);
    res.deviation.mean_sq_sup = pairwise_sum(all_dev.data(), all_dev.size()) / all_dev.size();
    res.num_steps = steps;
    return res;
}

std::vector<std::pair<int, DeviationStat>> deviation_sweep(const GameParams& p,
                                                           const LimitGains& gains,
                                                           const std::vector<int>& Ns,
                                                           SimConfig cfg) {
    std::vector<std::pair<int, DeviationStat>> out;
    for (int N : Ns) {
        cfg.N = N;
        cfg.mode = SimMode::Decentralized;
        out.emplace_back(N, simulate(p, gains, cfg).deviation);
    }
    return out;
}

double predicted_value(const DenseSolution& dense, const GameParams& p, const InitialLaw& law,
                       int player) {
    if (player < 0 || player >= int(dense.P.size()))
        throw std::invalid_argument("predicted_value: no such player in the dense solution");
    const int n = p.n, N = dense.N;
    const int dim = (N + 1) * n;
    Eigen::VectorXd mu(dim);
    mu.segment(0, n) = law.mu0;
    for (int i = 1; i <= N; ++i) mu.segment(i * n, n) = law.mu;
    Eigen::MatrixXd Sigma = Eigen::MatrixXd::Zero(dim, dim);
    Sigma.block(0, 0, n, n) = law.Sigma0;
    for (int i = 1; i <= N; ++i) Sigma.block(i * n, i * n, n, n) = law.Sigma;
    const Eigen::MatrixXd& P = dense.P[player].front();
    const Eigen::VectorXd& S = dense.S[player].front();
    return (P * Sigma).trace() + mu.dot(P * mu) + 2.0 * S.dot(mu) + dense.r[player].front();
}

}  // namespace mflq
