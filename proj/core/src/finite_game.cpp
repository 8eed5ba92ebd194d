#include "mflq/finite_game.hpp"

#include "mflq/csv_io.hpp"

#include <stdexcept>

namespace mflq {

namespace {

const char* kPiBlocks[9] = {"Pi1_0", "Pi2_0", "Pi3_0", "Pi0", "Pi1", "Pi2", "Pi3", "Pia", "Pib"};
const char* kPiSymmetric[5] = {"Pi1_0", "Pi3_0", "Pi0", "Pi1", "Pi3"};
const char* kThetaBlocks[5] = {"th0_0", "th1_0", "th0", "th1", "th2"};

struct StructuredOde {
    const GameParams& p;
    double N;
    Eigen::MatrixXd M0, M;
    bool with_offsets;
    std::shared_ptr<BlockLayout> layout;

    StructuredOde(const GameParams& params, int players, bool offsets)
        : p(params), N(players), with_offsets(offsets) {
        auto d = derive_coeffs(p);
        M0 = d.M0;
        M = d.M;
        layout = std::make_shared<BlockLayout>();
        for (const char* b : kPiBlocks) layout->add(b, p.n, p.n);
        if (with_offsets) {
            for (const char* b : kThetaBlocks) layout->add(b, p.n, 1);
            layout->add("r0", 1, 1);
            layout->add("r1", 1, 1);
        }
    }

    FlatState terminal() const {
        const auto I = Eigen::MatrixXd::Identity(p.n, p.n);
        FlatState s(layout);
        s.block("Pi1_0") = p.Q0f;
        s.block("Pi2_0") = -p.Q0f * p.Gamma0f / N;
        s.block("Pi3_0") = p.Gamma0f.transpose() * p.Q0f * p.Gamma0f / (N * N);
        s.block("Pi0") = p.Gamma1f.transpose() * p.Qf * p.Gamma1f;
        s.block("Pi1") = (I - p.Gamma2f.transpose() / N) * p.Qf * (I - p.Gamma2f / N);
        s.block("Pi2") = -(I - p.Gamma2f.transpose() / N) * p.Qf * p.Gamma2f / N;
        s.block("Pi3") = p.Gamma2f.transpose() * p.Qf * p.Gamma2f / (N * N);
        s.block("Pia") = -p.Gamma1f.transpose() * p.Qf * (I - p.Gamma2f / N);
        s.block("Pib") = p.Gamma1f.transpose() * p.Qf * p.Gamma2f / N;
        if (with_offsets) {
            s.block("th0_0") = -p.Q0f * p.eta0f;
            s.block("th1_0") = p.Gamma0f.transpose() * p.Q0f * p.eta0f / N;
            s.block("th0") = p.Gamma1f.transpose() * p.Qf * p.etaf;
            s.block("th1") = -(I - p.Gamma2f.transpose() / N) * p.Qf * p.etaf;
            s.block("th2") = p.Gamma2f.transpose() * p.Qf * p.etaf / N;
            s.block("r0")(0, 0) = p.eta0f.dot(p.Q0f * p.eta0f);
            s.block("r1")(0, 0) = p.etaf.dot(p.Qf * p.etaf);
        }
        return s;
    }

    OdeRhs rhs() const {
        auto lay = layout;
        const GameParams& pp = p;
        const Eigen::MatrixXd m0 = M0, m = M;
        const double n = N;
        const bool offs = with_offsets;
        return [lay, &pp, m0, m, n, offs](double, const Eigen::VectorXd& yv,
                                          Eigen::VectorXd& dyv) {
            FlatState y;
            y.values = yv;
            y.layout = lay;
            FlatState dy;
            dy.values.setZero(lay->total_size());
            dy.layout = lay;
            const auto I = Eigen::MatrixXd::Identity(pp.n, pp.n);

            const Eigen::MatrixXd P10 = y.block("Pi1_0"), P20 = y.block("Pi2_0"),
                                  P30 = y.block("Pi3_0");
            const Eigen::MatrixXd P0 = y.block("Pi0"), P1 = y.block("Pi1"), P2 = y.block("Pi2"),
                                  P3 = y.block("Pi3"), Pa = y.block("Pia"), Pb = y.block("Pib");

            // Pi4_0 and Pi4 coincide with Pi3_0 and Pi3 along the flow and are
            // substituted throughout.
            dy.block("Pi1_0") = P10 * m0 * P10 + n * P20 * m * Pa.transpose() +
                                n * Pa * m * P20.transpose() - (P10 * pp.A0 + pp.A0.transpose() * P10) -
                                n * (P20 * pp.G + pp.G.transpose() * P20.transpose()) - pp.Q0;
            dy.block("Pi2_0") = P10 * m0 * P20 + P20 * m * P1 + n * Pa * m * P30 +
                                (n - 1.0) * P20 * m * P2 -
                                (P10 * pp.F0 / n + P20 * pp.F + P20 * pp.A) -
                                (pp.A0.transpose() * P20 + n * pp.G.transpose() * P30) +
                                pp.Q0 * pp.Gamma0 / n;
            dy.block("Pi3_0") = P20.transpose() * m0 * P20 + P30 * m * P1 + P1 * m * P30 +
                                (n - 1.0) * (P30 * m * P2 + P2.transpose() * m * P30) -
                                (P20.transpose() * pp.F0 + pp.F0.transpose() * P20) / n -
                                (1.0 - 1.0 / n) * (P30 * pp.F + pp.F.transpose() * P30) -
                                (P30 * (pp.A + pp.F / n) +
                                 (pp.A.transpose() + pp.F.transpose() / n) * P30) -
                                pp.Gamma0.transpose() * pp.Q0 * pp.Gamma0 / (n * n);
            dy.block("Pi0") = Pa * m * Pa.transpose() + P0 * m0 * P10 + P10 * m0 * P0 -
                              (P0 * pp.A0 + pp.A0.transpose() * P0) -
                              (Pa * pp.G + pp.G.transpose() * Pa.transpose()) -
                              (n - 1.0) * (Pb * pp.G + pp.G.transpose() * Pb.transpose()) +
                              (n - 1.0) * (Pb * m * Pa.transpose() + Pa * m * Pb.transpose()) -
                              pp.Gamma1.transpose() * pp.Q * pp.Gamma1;
            dy.block("Pi1") = P1 * m * P1 + Pa.transpose() * m0 * P20 + P20.transpose() * m0 * Pa +
                              (n - 1.0) * (P2 * m * P2 + P2.transpose() * m * P2.transpose()) -
                              (Pa.transpose() * pp.F0 + pp.F0.transpose() * Pa) / n -
                              (P1 * (pp.A + pp.F / n) +
                               (pp.A.transpose() + pp.F.transpose() / n) * P1) -
                              (1.0 - 1.0 / n) * (P2 * pp.F + pp.F.transpose() * P2.transpose()) -
                              (I - pp.Gamma2.transpose() / n) * pp.Q * (I - pp.Gamma2 / n);
            dy.block("Pi2") = Pa.transpose() * m0 * P20 + P20.transpose() * m0 * Pb + P1 * m * P2 +
                              P2 * m * P1 + (n - 1.0) * P2.transpose() * m * P3 +
                              (n - 2.0) * P2 * m * P2 -
                              (Pa.transpose() * pp.F0 + pp.F0.transpose() * Pb) / n -
                              (P2 * (pp.A + (n - 1.0) / n * pp.F) +
                               (pp.A.transpose() + pp.F.transpose() / n) * P2) -
                              (1.0 - 2.0 / n) * pp.F.transpose() * P3 -
                              (P1 * pp.F + pp.F.transpose() * P3) / n +
                              (I - pp.Gamma2.transpose() / n) * pp.Q * pp.Gamma2 / n;
            dy.block("Pi3") = Pb.transpose() * m0 * P20 + P20.transpose() * m0 * Pb +
                              P2.transpose() * m * P2 + P3 * m * P1 + P1 * m * P3 +
                              (n - 2.0) * (P3 * m * P2 + P2.transpose() * m * P3) -
                              (Pb.transpose() * pp.F0 + pp.F0.transpose() * Pb +
                               P2.transpose() * pp.F + pp.F.transpose() * P2) / n -
                              (P3 * (pp.A + pp.F / n) +
                               (pp.A.transpose() + pp.F.transpose() / n) * P3) -
                              (1.0 - 2.0 / n) * (P3 * pp.F + pp.F.transpose() * P3) -
                              pp.Gamma2.transpose() * pp.Q * pp.Gamma2 / (n * n);
            dy.block("Pia") = P0 * m0 * P20 + P10 * m0 * Pa + Pa * m * P1 +
                              (n - 1.0) * (Pb * m * P2 + Pa * m * P2.transpose()) -
                              (P0 * pp.F0 / n + Pa * (pp.A + pp.F / n) +
                               (n - 1.0) * Pb * pp.F / n) -
                              (pp.A0.transpose() * Pa + pp.G.transpose() * P1 +
                               (n - 1.0) * pp.G.transpose() * P2.transpose()) +
                              pp.Gamma1.transpose() * pp.Q * (I - pp.Gamma2 / n);
            dy.block("Pib") = P0 * m0 * P20 + P10 * m0 * Pb + Pb * m * P1 + Pa * m * P2 +
                              (n - 1.0) * Pa * m * P3 + (n - 2.0) * Pb * m * P2 -
                              (P0 * pp.F0 / n + Pa * pp.F / n + Pb * pp.A +
                               (n - 1.0) * Pb * pp.F / n) -
                              (pp.A0.transpose() * Pb + pp.G.transpose() * P2 +
                               (n - 1.0) * pp.G.transpose() * P3) -
                              pp.Gamma1.transpose() * pp.Q * pp.Gamma2 / n;

            if (offs) {
                auto seg = [&](const char* name) -> Eigen::VectorXd {
                    const auto& b = lay->at(name);
                    return yv.segment(b.offset, b.rows);
                };
                const Eigen::VectorXd t00 = seg("th0_0"), t10 = seg("th1_0");
                const Eigen::VectorXd t0 = seg("th0"), t1 = seg("th1"), t2 = seg("th2");
                dy.block("th0_0") = -pp.A0.transpose() * t00 - n * pp.G.transpose() * t10 +
                                    P10 * m0 * t00 + n * Pa * m * t10 + n * P20 * m * t1 +
                                    pp.Q0 * pp.eta0;
                dy.block("th1_0") = -pp.F0.transpose() * t00 / n -
                                    (pp.A.transpose() + pp.F.transpose()) * t10 +
                                    P20.transpose() * m0 * t00 + P1 * m * t10 +
                                    (n - 1.0) * P2.transpose() * m * t10 + n * P30 * m * t1 -
                                    pp.Gamma0.transpose() * pp.Q0 * pp.eta0 / n;
                dy.block("th0") = -pp.A0.transpose() * t0 - pp.G.transpose() * t1 -
                                  (n - 1.0) * pp.G.transpose() * t2 + P10 * m0 * t0 +
                                  P0 * m0 * t00 + Pa * m * t1 + (n - 1.0) * Pa * m * t2 +
                                  (n - 1.0) * Pb * m * t1 - pp.Gamma1.transpose() * pp.Q * pp.eta;
                dy.block("th1") = -pp.F0.transpose() * t0 / n -
                                  (pp.A.transpose() + pp.F.transpose() / n) * t1 -
                                  (n - 1.0) / n * pp.F.transpose() * t2 +
                                  P20.transpose() * m0 * t0 + Pa.transpose() * m0 * t00 +
                                  P1 * m * t1 + (n - 1.0) * P2.transpose() * m * t2 +
                                  (n - 1.0) * P2 * m * t1 +
                                  (I - pp.Gamma2.transpose() / n) * pp.Q * pp.eta;
                dy.block("th2") = -pp.F0.transpose() * t0 / n - pp.F.transpose() * t1 / n -
                                  pp.A.transpose() * t2 - (n - 1.0) / n * pp.F.transpose() * t2 +
                                  P20.transpose() * m0 * t0 + Pb.transpose() * m0 * t00 +
                                  P2.transpose() * m * t1 + P1 * m * t2 +
                                  (n - 2.0) * P2.transpose() * m * t2 + (n - 1.0) * P3 * m * t1 -
                                  pp.Gamma2.transpose() * pp.Q * pp.eta / n;
                dy.block("r0")(0, 0) = t00.dot(m0 * t00) + 2.0 * n * t10.dot(m * t1) -
                                       pp.eta0.dot(pp.Q0 * pp.eta0) -
                                       (pp.D0.transpose() * P10 * pp.D0).trace() -
                                       n * (pp.D.transpose() * P30 * pp.D).trace();
                dy.block("r1")(0, 0) = 2.0 * t0.dot(m0 * t00) + 2.0 * (n - 1.0) * t2.dot(m * t1) +
                                       t1.dot(m * t1) - pp.eta.dot(pp.Q * pp.eta) -
                                       (pp.D0.transpose() * P0 * pp.D0).trace() -
                                       (pp.D.transpose() * P1 * pp.D).trace() -
                                       (n - 1.0) * (pp.D.transpose() * P3 * pp.D).trace();
            }
            dyv = dy.values;
        };
    }

    std::function<void(double, Eigen::VectorXd&)> symmetrizer() const {
        auto lay = layout;
        return [lay](double, Eigen::VectorXd& v) {
            for (const char* name : kPiSymmetric) {
                const auto& b = lay->at(name);
                Eigen::Map<Eigen::MatrixXd> m(v.data() + b.offset, b.rows, b.cols);
                m = 0.5 * (m + m.transpose()).eval();
            }
        };
    }
};

MatrixTrajectory pick(const std::vector<Eigen::VectorXd>& sol, const BlockLayout& lay,
                      const std::string& name) {
    const auto& b = lay.at(name);
    MatrixTrajectory out(sol.size());
    for (std::size_t i = 0; i < sol.size(); ++i)
        out[i] = Eigen::Map<const Eigen::MatrixXd>(sol[i].data() + b.offset, b.rows, b.cols);
    return out;
}

VectorTrajectory pick_vec(const std::vector<Eigen::VectorXd>& sol, const BlockLayout& lay,
                          const std::string& name) {
    const auto& b = lay.at(name);
    VectorTrajectory out(sol.size());
    for (std::size_t i = 0; i < sol.size(); ++i) out[i] = sol[i].segment(b.offset, b.rows);
    return out;
}

ScalarTrajectory pick_scalar(const std::vector<Eigen::VectorXd>& sol, const BlockLayout& lay,
                             const std::string& name) {
    const auto& b = lay.at(name);
    ScalarTrajectory out(sol.size());
    for (std::size_t i = 0; i < sol.size(); ++i) out[i] = sol[i][b.offset];
    return out;
}

void fill_structured(StructuredRiccati& s, const std::vector<Eigen::VectorXd>& sol,
                     const BlockLayout& lay) {
    s.Pi1_0 = pick(sol, lay, "Pi1_0");
    s.Pi2_0 = pick(sol, lay, "Pi2_0");
    s.Pi3_0 = pick(sol, lay, "Pi3_0");
    s.Pi0 = pick(sol, lay, "Pi0");
    s.Pi1 = pick(sol, lay, "Pi1");
    s.Pi2 = pick(sol, lay, "Pi2");
    s.Pi3 = pick(sol, lay, "Pi3");
    s.Pia = pick(sol, lay, "Pia");
    s.Pib = pick(sol, lay, "Pib");
}

}  // namespace

StructuredSolveResult solve_structured(const GameParams& p, int N, const TimeGrid& grid,
                                       const IntegratorOptions& opts, bool symmetrize) {
    validate(p);
    if (N < 2) throw std::invalid_argument("solve_structured: N must be >= 2");
    StructuredOde ode(p, N, false);
    IntegratorOptions o = opts;
    if (symmetrize && !o.post_step) o.post_step = ode.symmetrizer();
    auto outcome = integrate_backward(ode.rhs(), ode.terminal().values, grid, o);

    StructuredSolveResult res;
    res.verdict.rtol = opts.rtol;
    res.verdict.atol = opts.atol;
    res.verdict.sup_norm = outcome.max_norm;
    if (!outcome.solved()) {
        res.verdict.solvable = false;
        res.verdict.escape_interval = {{outcome.escape_lo, outcome.escape_hi}};
        return res;
    }
    res.verdict.solvable = true;
    StructuredRiccati s;
    s.grid = grid;
    s.N = N;
    fill_structured(s, outcome.solution, *ode.layout);
    res.riccati = std::move(s);
    return res;
}

RescaledView rescale(const StructuredRiccati& s) {
    const double N = s.N;
    RescaledView v;
    v.grid = s.grid;
    const std::size_t m = s.Pi1_0.size();
    v.L1_0N.resize(m);
    v.L2_0N.resize(m);
    v.L3_0N.resize(m);
    v.L0_N.resize(m);
    v.L1_N.resize(m);
    v.L2_N.resize(m);
    v.L3_N.resize(m);
    v.La_N.resize(m);
    v.Lb_N.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        v.L1_0N[i] = s.Pi1_0[i];
        v.L2_0N[i] = N * s.Pi2_0[i];
        v.L3_0N[i] = N * N * s.Pi3_0[i];
        v.L0_N[i] = s.Pi0[i];
        v.L1_N[i] = s.Pi1[i];
        v.L2_N[i] = N * s.Pi2[i];
        v.L3_N[i] = N * N * s.Pi3[i];
        v.La_N[i] = s.Pia[i];
        v.Lb_N[i] = N * s.Pib[i];
    }
    return v;
}

StructuredOffsets solve_structured_offsets(const GameParams& p, const StructuredRiccati& s,
                                           const IntegratorOptions& opts) {
    // Linear along the Riccati flow; the Riccati blocks ride along in the
    // state so no trajectory interpolation is needed.
    StructuredOde ode(p, s.N, true);
    IntegratorOptions o = opts;
    if (!o.post_step) o.post_step = ode.symmetrizer();
    auto outcome = integrate_backward(ode.rhs(), ode.terminal().values, s.grid, o);
    if (!outcome.solved())
        throw std::runtime_error(
            "solve_structured_offsets: Riccati system escaped (expected solvable)");
    StructuredOffsets off;
    off.th0_0 = pick_vec(outcome.solution, *ode.layout, "th0_0");
    off.th1_0 = pick_vec(outcome.solution, *ode.layout, "th1_0");
    off.th0 = pick_vec(outcome.solution, *ode.layout, "th0");
    off.th1 = pick_vec(outcome.solution, *ode.layout, "th1");
    off.th2 = pick_vec(outcome.solution, *ode.layout, "th2");
    off.r0 = pick_scalar(outcome.solution, *ode.layout, "r0");
    off.r1 = pick_scalar(outcome.solution, *ode.layout, "r1");
    return off;
}

namespace {

// Dense-oracle structural matrices per the full-state formulation.
struct DenseBasis {
    int N, n, big;
    Eigen::MatrixXd Ahat, Dhat;
    Eigen::MatrixXd B0hat;               // big x n1
    std::vector<Eigen::MatrixXd> Bhat;   // B_1..B_N
    Eigen::MatrixXd M0hat;               // B0 R0^-1 B0^T, big x big
    std::vector<Eigen::MatrixXd> Mhat;   // B_k R^-1 B_k^T
    Eigen::MatrixXd Q0hat, Q0fhat;
    std::vector<Eigen::MatrixXd> Qhat, Qfhat;
    Eigen::MatrixXd K0, K0f;             // n x big
    std::vector<Eigen::MatrixXd> K, Kf;

    DenseBasis(const GameParams& p, int players) : N(players), n(p.n), big((players + 1) * p.n) {
        Ahat.setZero(big, big);
        Ahat.block(0, 0, n, n) = p.A0;
        for (int i = 1; i <= N; ++i) {
            Ahat.block(i * n, i * n, n, n) = p.A;
            Ahat.block(0, i * n, n, n) = p.F0 / double(N);
            Ahat.block(i * n, 0, n, n) = p.G;
            for (int j = 1; j <= N; ++j) Ahat.block(i * n, j * n, n, n) += p.F / double(N);
        }
        const int n2 = int(p.D0.cols());
        Dhat.setZero(big, (N + 1) * n2);
        Dhat.block(0, 0, n, n2) = p.D0;
        for (int i = 1; i <= N; ++i) Dhat.block(i * n, i * n2, n, n2) = p.D;

        const int n1 = int(p.B0.cols());
        B0hat.setZero(big, n1);
        B0hat.block(0, 0, n, n1) = p.B0;
        M0hat = B0hat * p.R0.ldlt().solve(B0hat.transpose());
        for (int k = 1; k <= N; ++k) {
            Eigen::MatrixXd Bk = Eigen::MatrixXd::Zero(big, n1);
            Bk.block(k * n, 0, n, n1) = p.B;
            Mhat.push_back(Bk * p.R.ldlt().solve(Bk.transpose()));
            Bhat.push_back(std::move(Bk));
        }

        auto make_K0 = [&](const Eigen::MatrixXd& g0) {
            Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, big);
            k.block(0, 0, n, n) = Eigen::MatrixXd::Identity(n, n);
            for (int j = 1; j <= N; ++j) k.block(0, j * n, n, n) = -g0 / double(N);
            return k;
        };
        auto make_Ki = [&](int i, const Eigen::MatrixXd& g1, const Eigen::MatrixXd& g2) {
            Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, big);
            k.block(0, i * n, n, n) = Eigen::MatrixXd::Identity(n, n);
            k.block(0, 0, n, n) -= g1;
            for (int j = 1; j <= N; ++j) k.block(0, j * n, n, n) -= g2 / double(N);
            return k;
        };
        K0 = make_K0(p.Gamma0);
        K0f = make_K0(p.Gamma0f);
        Q0hat = K0.transpose() * p.Q0 * K0;
        Q0fhat = K0f.transpose() * p.Q0f * K0f;
        for (int i = 1; i <= N; ++i) {
            K.push_back(make_Ki(i, p.Gamma1, p.Gamma2));
            Kf.push_back(make_Ki(i, p.Gamma1f, p.Gamma2f));
            Qhat.push_back(K.back().transpose() * p.Q * K.back());
            Qfhat.push_back(Kf.back().transpose() * p.Qf * Kf.back());
        }
    }
};

}  // namespace

DenseSolution solve_dense_oracle(const GameParams& p, int N, const TimeGrid& grid,
                                 const IntegratorOptions& opts, bool symmetrize) {
    validate(p);
    if (N < 2 || N > kDenseOracleMaxN)
        throw std::invalid_argument("solve_dense_oracle: N must be in [2, " +
                                    std::to_string(kDenseOracleMaxN) + "]");
    DenseBasis bs(p, N);
    const int big = bs.big;

    auto layout = std::make_shared<BlockLayout>();
    for (int j = 0; j <= N; ++j) layout->add("P" + std::to_string(j), big, big);
    for (int j = 0; j <= N; ++j) layout->add("S" + std::to_string(j), big, 1);
    for (int j = 0; j <= N; ++j) layout->add("r" + std::to_string(j), 1, 1);

    FlatState term(layout);
    term.block("P0") = bs.Q0fhat;
    term.block("S0") = -bs.K0f.transpose() * p.Q0f * p.eta0f;
    term.block("r0")(0, 0) = p.eta0f.dot(p.Q0f * p.eta0f);
    for (int j = 1; j <= N; ++j) {
        term.block("P" + std::to_string(j)) = bs.Qfhat[j - 1];
        term.block("S" + std::to_string(j)) = -bs.Kf[j - 1].transpose() * p.Qf * p.etaf;
        term.block("r" + std::to_string(j))(0, 0) = p.etaf.dot(p.Qf * p.etaf);
    }

    auto rhs = [&bs, &p, layout, N, big](double, const Eigen::VectorXd& yv, Eigen::VectorXd& dyv) {
        std::vector<Eigen::Map<const Eigen::MatrixXd>> P;
        std::vector<Eigen::VectorXd> S;
        for (int j = 0; j <= N; ++j) {
            const auto& b = layout->at("P" + std::to_string(j));
            P.emplace_back(yv.data() + b.offset, big, big);
            const auto& sb = layout->at("S" + std::to_string(j));
            S.push_back(yv.segment(sb.offset, big));
        }
        dyv.setZero(yv.size());
        FlatState dy;
        dy.values.setZero(layout->total_size());
        dy.layout = layout;

        Eigen::MatrixXd sumMP = Eigen::MatrixXd::Zero(big, big);
        Eigen::VectorXd sumMS = Eigen::VectorXd::Zero(big);
        for (int k = 1; k <= N; ++k) {
            sumMP += bs.Mhat[k - 1] * P[k];
            sumMS += bs.Mhat[k - 1] * S[k];
        }
        const Eigen::MatrixXd sumPM = sumMP.transpose();  // P_k, M_k symmetric
        const Eigen::VectorXd M0S0 = bs.M0hat * S[0];

        dy.block("P0") = -(P[0] * bs.Ahat + bs.Ahat.transpose() * P[0]) +
                         P[0] * bs.M0hat * P[0] + P[0] * sumMP + sumPM * P[0] - bs.Q0hat;
        dy.block("S0") = -bs.Ahat.transpose() * S[0] + P[0] * M0S0 + sumPM * S[0] +
                         P[0] * sumMS + bs.K0.transpose() * p.Q0 * p.eta0;
        dy.block("r0")(0, 0) = S[0].dot(M0S0) + 2.0 * S[0].dot(sumMS) -
                               p.eta0.dot(p.Q0 * p.eta0) -
                               (bs.Dhat.transpose() * P[0] * bs.Dhat).trace();
        for (int i = 1; i <= N; ++i) {
            const auto& Mi = bs.Mhat[i - 1];
            dy.block("P" + std::to_string(i)) =
                -(P[i] * bs.Ahat + bs.Ahat.transpose() * P[i]) - P[i] * Mi * P[i] +
                P[i] * bs.M0hat * P[0] + P[0] * bs.M0hat * P[i] + P[i] * sumMP + sumPM * P[i] -
                bs.Qhat[i - 1];
            dy.block("S" + std::to_string(i)) =
                -bs.Ahat.transpose() * S[i] + P[0] * bs.M0hat * S[i] + P[i] * M0S0 -
                P[i] * Mi * S[i] + sumPM * S[i] + P[i] * sumMS +
                bs.K[i - 1].transpose() * p.Q * p.eta;
            dy.block("r" + std::to_string(i))(0, 0) =
                2.0 * S[i].dot(M0S0) + 2.0 * S[i].dot(sumMS) - S[i].dot(Mi * S[i]) -
                p.eta.dot(p.Q * p.eta) - (bs.Dhat.transpose() * P[i] * bs.Dhat).trace();
        }
        dyv = dy.values;
    };

    IntegratorOptions o = opts;
    if (symmetrize && !o.post_step) {
        o.post_step = [layout, N, big](double, Eigen::VectorXd& v) {
            for (int j = 0; j <= N; ++j) {
                const auto& b = layout->at("P" + std::to_string(j));
                Eigen::Map<Eigen::MatrixXd> m(v.data() + b.offset, big, big);
                m = 0.5 * (m + m.transpose()).eval();
            }
        };
    }
    auto outcome = integrate_backward(rhs, term.values, grid, o);
    if (!outcome.solved())
        throw std::runtime_error("solve_dense_oracle: finite-N Riccati system escaped on [" +
                                 std::to_string(outcome.escape_lo) + ", " +
                                 std::to_string(outcome.escape_hi) + "]");

    DenseSolution d;
    d.grid = grid;
    d.N = N;
    for (int j = 0; j <= N; ++j) {
        d.P.push_back(pick(outcome.solution, *layout, "P" + std::to_string(j)));
        d.S.push_back(pick_vec(outcome.solution, *layout, "S" + std::to_string(j)));
        d.r.push_back(pick_scalar(outcome.solution, *layout, "r" + std::to_string(j)));
    }
    return d;
}

DenseSolution assemble_dense(const StructuredRiccati& s, const StructuredOffsets& offsets) {
    const int N = s.N;
    const int n = int(s.Pi1_0.front().rows());
    const int big = (N + 1) * n;
    const std::size_t m = s.Pi1_0.size();

    DenseSolution d;
    d.grid = s.grid;
    d.N = N;
    d.P.resize(2);
    d.S.resize(2);
    d.r = {offsets.r0, offsets.r1};
    d.P[0].resize(m);
    d.P[1].resize(m);
    d.S[0].resize(m);
    d.S[1].resize(m);
    for (std::size_t t = 0; t < m; ++t) {
        Eigen::MatrixXd P0 = Eigen::MatrixXd::Zero(big, big);
        P0.block(0, 0, n, n) = s.Pi1_0[t];
        for (int j = 1; j <= N; ++j) {
            P0.block(0, j * n, n, n) = s.Pi2_0[t];
            P0.block(j * n, 0, n, n) = s.Pi2_0[t].transpose();
            for (int k = 1; k <= N; ++k) P0.block(j * n, k * n, n, n) = s.Pi3_0[t];
        }
        Eigen::MatrixXd P1 = Eigen::MatrixXd::Zero(big, big);
        P1.block(0, 0, n, n) = s.Pi0[t];
        P1.block(0, n, n, n) = s.Pia[t];
        P1.block(n, 0, n, n) = s.Pia[t].transpose();
        P1.block(n, n, n, n) = s.Pi1[t];
        for (int j = 2; j <= N; ++j) {
            P1.block(0, j * n, n, n) = s.Pib[t];
            P1.block(j * n, 0, n, n) = s.Pib[t].transpose();
            P1.block(n, j * n, n, n) = s.Pi2[t];
            P1.block(j * n, n, n, n) = s.Pi2[t].transpose();
            for (int k = 2; k <= N; ++k) P1.block(j * n, k * n, n, n) = s.Pi3[t];
        }
        Eigen::VectorXd S0(big), S1(big);
        S0.segment(0, n) = offsets.th0_0[t];
        for (int j = 1; j <= N; ++j) S0.segment(j * n, n) = offsets.th1_0[t];
        S1.segment(0, n) = offsets.th0[t];
        S1.segment(n, n) = offsets.th1[t];
        for (int j = 2; j <= N; ++j) S1.segment(j * n, n) = offsets.th2[t];
        d.P[0][t] = std::move(P0);
        d.P[1][t] = std::move(P1);
        d.S[0][t] = std::move(S0);
        d.S[1][t] = std::move(S1);
    }
    return d;
}

NashGains nash_gains(const DenseSolution& dense, const GameParams& p) {
    const int n = p.n;
    const int N = dense.N;
    const int big = (N + 1) * n;
    const std::size_t m = dense.P[0].size();
    const int n1 = int(p.B0.cols());

    Eigen::MatrixXd B0hat = Eigen::MatrixXd::Zero(big, n1);
    B0hat.block(0, 0, n, n1) = p.B0;
    Eigen::LDLT<Eigen::MatrixXd> r0(p.R0), r(p.R);

    NashGains g;
    g.grid = dense.grid;
    g.K0.resize(m);
    g.k0.resize(m);
    for (std::size_t t = 0; t < m; ++t) {
        g.K0[t] = r0.solve(B0hat.transpose() * dense.P[0][t]);
        g.k0[t] = r0.solve(B0hat.transpose() * dense.S[0][t]);
    }
    const int minors = int(dense.P.size()) - 1;  // assembled solutions carry player 1 only
    g.Ki.resize(minors);
    g.ki.resize(minors);
    for (int i = 1; i <= minors; ++i) {
        Eigen::MatrixXd Bi = Eigen::MatrixXd::Zero(big, int(p.B.cols()));
        Bi.block(i * n, 0, n, int(p.B.cols())) = p.B;
        g.Ki[i - 1].resize(m);
        g.ki[i - 1].resize(m);
        for (std::size_t t = 0; t < m; ++t) {
            g.Ki[i - 1][t] = r.solve(Bi.transpose() * dense.P[i][t]);
            g.ki[i - 1][t] = r.solve(Bi.transpose() * dense.S[i][t]);
        }
    }
    return g;
}

std::vector<std::string> export_structured_csv(const StructuredRiccati& s,
                                               const StructuredOffsets* offsets,
                                               const std::string& dir) {
    std::vector<std::pair<std::string, const MatrixTrajectory*>> blocks = {
        {"Pi1_0", &s.Pi1_0}, {"Pi2_0", &s.Pi2_0}, {"Pi3_0", &s.Pi3_0},
        {"Pi0", &s.Pi0},     {"Pi1", &s.Pi1},     {"Pi2", &s.Pi2},
        {"Pi3", &s.Pi3},     {"Pia", &s.Pia},     {"Pib", &s.Pib}};
    std::vector<std::string> written;
    for (const auto& [name, traj] : blocks) {
        std::string path = dir + "/" + name + ".csv";
        write_blocks_csv(path, s.grid, {{name, traj}});
        written.push_back(path);
    }
    if (offsets) {
        auto as_mats = [](const VectorTrajectory& v) {
            MatrixTrajectory out(v.size());
            for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i];
            return out;
        };
        MatrixTrajectory t00 = as_mats(offsets->th0_0), t10 = as_mats(offsets->th1_0),
                         t0 = as_mats(offsets->th0), t1 = as_mats(offsets->th1),
                         t2 = as_mats(offsets->th2);
        std::string theta_path = dir + "/theta.csv";
        write_blocks_csv(theta_path, s.grid,
                         {{"th0_0", &t00}, {"th1_0", &t10}, {"th0", &t0}, {"th1", &t1},
                          {"th2", &t2}});
        written.push_back(theta_path);
        std::vector<std::vector<std::string>> rows;
        for (int i = 0; i < s.grid.num_points; ++i)
            rows.push_back({csv_number(s.grid.time(i)), csv_number(offsets->r0[i]),
                            csv_number(offsets->r1[i])});
        std::string r_path = dir + "/r.csv";
        write_table_csv(r_path, {"t", "r0", "r1"}, rows);
        written.push_back(r_path);
    }
    return written;
}

}  // namespace mflq
