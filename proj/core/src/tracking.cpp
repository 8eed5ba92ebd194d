#include "mflq/tracking.hpp"

#include "limit_ode.hpp"

#include <json.hpp>

#include <stdexcept>

namespace mflq {

namespace {

Eigen::MatrixXd build_AA0(const GameParams& p, const Eigen::MatrixXd& M,
                          const Eigen::MatrixXd& L1, const Eigen::MatrixXd& L2,
                          const Eigen::MatrixXd& La) {
    const int n = p.n;
    Eigen::MatrixXd A0(2 * n, 2 * n);
    A0.block(0, 0, n, n) = p.A0;
    A0.block(0, n, n, n) = p.F0;
    A0.block(n, 0, n, n) = p.G - M * La.transpose();
    A0.block(n, n, n, n) = p.A + p.F - M * (L1 + L2);
    return A0;
}

Eigen::MatrixXd build_AA(const GameParams& p, const Eigen::MatrixXd& M0,
                         const Eigen::MatrixXd& M, const Eigen::MatrixXd& L1_0,
                         const Eigen::MatrixXd& L2_0, const Eigen::MatrixXd& L1,
                         const Eigen::MatrixXd& L2, const Eigen::MatrixXd& La) {
    const int n = p.n;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    A.block(0, 0, n, n) = p.A0 - M0 * L1_0;
    A.block(0, 2 * n, n, n) = p.F0 - M0 * L2_0;
    A.block(n, 0, n, n) = p.G;
    A.block(n, n, n, n) = p.A;
    A.block(n, 2 * n, n, n) = p.F;
    A.block(2 * n, 0, n, n) = p.G - M * La.transpose();
    A.block(2 * n, 2 * n, n, n) = p.A + p.F - M * (L1 + L2);
    return A;
}

// State: limit Riccati + offsets, plus either the monolithic (PP0, SS0, PP,
// SS) blocks or the expanded Phi/beta blocks.
struct TrackingOde {
    const GameParams& p;
    detail::LimitOde limit;
    bool blockwise;
    bool want_p0, want_p1;
    std::shared_ptr<BlockLayout> layout;
    Eigen::MatrixXd QQ0, QQ;  // stacked weights, constant

    TrackingOde(const GameParams& params, bool expand, bool p0, bool p1)
        : p(params), limit(params, true, false), blockwise(expand), want_p0(p0), want_p1(p1) {
        layout = limit.layout();  // extend the limit layout with our blocks
        const int n = p.n;
        if (!blockwise) {
            if (want_p0) {
                layout->add("PP0", 2 * n, 2 * n);
                layout->add("SS0", 2 * n, 1);
            }
            if (want_p1) {
                layout->add("PP", 3 * n, 3 * n);
                layout->add("SS", 3 * n, 1);
            }
        } else {
            if (want_p0)
                for (const char* b : {"Phi1_0", "Phi2_0", "Phi3_0"}) layout->add(b, n, n);
            if (want_p1)
                for (const char* b : {"Phi0", "Phi1", "Phi2", "Phi3", "Phia", "Phib"})
                    layout->add(b, n, n);
            if (want_p0)
                for (const char* b : {"b0_0", "b1_0"}) layout->add(b, n, 1);
            if (want_p1)
                for (const char* b : {"b0", "b1", "b2"}) layout->add(b, n, 1);
        }
        const int n_ = n;
        Eigen::MatrixXd K0(n_, 2 * n_);
        K0 << Eigen::MatrixXd::Identity(n_, n_), -p.Gamma0;
        QQ0 = K0.transpose() * p.Q0 * K0;
        Eigen::MatrixXd K(n_, 3 * n_);
        K << -p.Gamma1, Eigen::MatrixXd::Identity(n_, n_), -p.Gamma2;
        QQ = K.transpose() * p.Q * K;
    }

    FlatState terminal() const {
        FlatState s(layout);
        limit.fill_terminal(s);
        const int n = p.n;
        if (!blockwise) {
            if (want_p0) {
                Eigen::MatrixXd K0f(n, 2 * n);
                K0f << Eigen::MatrixXd::Identity(n, n), -p.Gamma0f;
                s.block("PP0") = K0f.transpose() * p.Q0f * K0f;
                s.block("SS0") = -K0f.transpose() * p.Q0f * p.eta0f;
            }
            if (want_p1) {
                Eigen::MatrixXd Kf(n, 3 * n);
                Kf << -p.Gamma1f, Eigen::MatrixXd::Identity(n, n), -p.Gamma2f;
                s.block("PP") = Kf.transpose() * p.Qf * Kf;
                s.block("SS") = -Kf.transpose() * p.Qf * p.etaf;
            }
        } else {
            if (want_p0) {
                s.block("Phi1_0") = p.Q0f;
                s.block("Phi2_0") = -p.Q0f * p.Gamma0f;
                s.block("Phi3_0") = p.Gamma0f.transpose() * p.Q0f * p.Gamma0f;
                s.block("b0_0") = -p.Q0f * p.eta0f;
                s.block("b1_0") = p.Gamma0f.transpose() * p.Q0f * p.eta0f;
            }
            if (want_p1) {
                s.block("Phi0") = p.Gamma1f.transpose() * p.Qf * p.Gamma1f;
                s.block("Phi1") = p.Qf;
                s.block("Phi2") = -p.Qf * p.Gamma2f;
                s.block("Phi3") = p.Gamma2f.transpose() * p.Qf * p.Gamma2f;
                s.block("Phia") = -p.Gamma1f.transpose() * p.Qf;
                s.block("Phib") = p.Gamma1f.transpose() * p.Qf * p.Gamma2f;
                s.block("b0") = p.Gamma1f.transpose() * p.Qf * p.etaf;
                s.block("b1") = -p.Qf * p.etaf;
                s.block("b2") = p.Gamma2f.transpose() * p.Qf * p.etaf;
            }
        }
        return s;
    }

    void eval(const Eigen::VectorXd& yv, Eigen::VectorXd& dyv) const {
        limit.eval(yv, dyv);
        const auto& lay = *layout;
        auto in = [&](const char* n) {
            const auto& b = lay.at(n);
            return Eigen::Map<const Eigen::MatrixXd>(yv.data() + b.offset, b.rows, b.cols);
        };
        auto out = [&](const char* n) {
            const auto& b = lay.at(n);
            return Eigen::Map<Eigen::MatrixXd>(dyv.data() + b.offset, b.rows, b.cols);
        };
        auto seg = [&](const char* n) -> Eigen::VectorXd {
            const auto& b = lay.at(n);
            return yv.segment(b.offset, b.rows);
        };
        const int n = p.n;
        const Eigen::MatrixXd& m0 = limit.M0();
        const Eigen::MatrixXd& m = limit.M();
        const Eigen::MatrixXd L1_0 = in("L1_0"), L2_0 = in("L2_0");
        const Eigen::MatrixXd L1 = in("L1"), L2 = in("L2"), La = in("La");
        const Eigen::VectorXd a0_0 = seg("a0_0"), a1 = seg("a1");

        if (!blockwise) {
            if (want_p0) {
                const Eigen::MatrixXd AA0 = build_AA0(p, m, L1, L2, La);
                const Eigen::MatrixXd P0 = in("PP0");
                Eigen::MatrixXd M0h = Eigen::MatrixXd::Zero(2 * n, 2 * n);
                M0h.block(0, 0, n, n) = m0;
                out("PP0") = -AA0.transpose() * P0 - P0 * AA0 + P0 * M0h * P0 - QQ0;
                Eigen::VectorXd force(2 * n);
                force.segment(0, n).setZero();
                force.segment(n, n) = m * a1;
                Eigen::VectorXd src(2 * n);
                src.segment(0, n) = p.Q0 * p.eta0;
                src.segment(n, n) = -p.Gamma0.transpose() * p.Q0 * p.eta0;
                const Eigen::VectorXd S0 = seg("SS0");
                out("SS0") = -AA0.transpose() * S0 + P0 * M0h * S0 + P0 * force + src;
            }
            if (want_p1) {
                const Eigen::MatrixXd AA = build_AA(p, m0, m, L1_0, L2_0, L1, L2, La);
                const Eigen::MatrixXd P = in("PP");
                Eigen::MatrixXd Mh = Eigen::MatrixXd::Zero(3 * n, 3 * n);
                Mh.block(n, n, n, n) = m;
                out("PP") = -AA.transpose() * P - P * AA + P * Mh * P - QQ;
                Eigen::VectorXd force(3 * n);
                force.segment(0, n) = m0 * a0_0;
                force.segment(n, n).setZero();
                force.segment(2 * n, n) = m * a1;
                Eigen::VectorXd src(3 * n);
                src.segment(0, n) = -p.Gamma1.transpose() * p.Q * p.eta;
                src.segment(n, n) = p.Q * p.eta;
                src.segment(2 * n, n) = -p.Gamma2.transpose() * p.Q * p.eta;
                const Eigen::VectorXd S = seg("SS");
                out("SS") = -AA.transpose() * S + P * Mh * S + P * force + src;
            }
            return;
        }

        // Expanded per-block transcription.
        const Eigen::MatrixXd Acl = p.A + p.F - m * (L1 + L2);  // A+F-M(L1+L2)
        const Eigen::MatrixXd GmL = p.G.transpose() - La * m;   // G^T - La M
        if (want_p0) {
            const Eigen::MatrixXd F1 = in("Phi1_0"), F2 = in("Phi2_0"), F3 = in("Phi3_0");
            out("Phi1_0") = F1 * m0 * F1 - p.A0.transpose() * F1 - F1 * p.A0 -
                            GmL * F2.transpose() - F2 * GmL.transpose() - p.Q0;
            out("Phi2_0") = -p.A0.transpose() * F2 - GmL * F3 - F1 * p.F0 - F2 * Acl +
                            F1 * m0 * F2 + p.Q0 * p.Gamma0;
            out("Phi3_0") = F2.transpose() * m0 * F2 - p.F0.transpose() * F2 -
                            F2.transpose() * p.F0 - Acl.transpose() * F3 - F3 * Acl -
                            p.Gamma0.transpose() * p.Q0 * p.Gamma0;
            const Eigen::VectorXd b00 = seg("b0_0"), b10 = seg("b1_0");
            out("b0_0") = (F1 * m0 - p.A0.transpose()) * b00 - GmL * b10 + F2 * m * a1 +
                          p.Q0 * p.eta0;
            out("b1_0") = (F2.transpose() * m0 - p.F0.transpose()) * b00 -
                          Acl.transpose() * b10 + F3 * m * a1 -
                          p.Gamma0.transpose() * p.Q0 * p.eta0;
        }
        if (want_p1) {
            const Eigen::MatrixXd A0cl = p.A0 - m0 * L1_0;     // A0 - M0 L1^0
            const Eigen::MatrixXd F0cl = p.F0 - m0 * L2_0;     // F0 - M0 L2^0
            const Eigen::MatrixXd F0 = in("Phi0"), F1 = in("Phi1"), F2 = in("Phi2"),
                                  F3 = in("Phi3"), Fa = in("Phia"), Fb = in("Phib");
            out("Phi0") = Fa * m * Fa.transpose() - p.G.transpose() * Fa.transpose() -
                          Fa * p.G - p.Gamma1.transpose() * p.Q * p.Gamma1 -
                          A0cl.transpose() * F0 - F0 * A0cl - GmL * Fb.transpose() -
                          Fb * GmL.transpose();
            out("Phi1") = F1 * m * F1 - p.A.transpose() * F1 - F1 * p.A - p.Q;
            out("Phi2") = -p.A.transpose() * F2 - F1 * p.F - Fa.transpose() * F0cl - F2 * Acl +
                          F1 * m * F2 + p.Q * p.Gamma2;
            out("Phi3") = F2.transpose() * m * F2 - p.F.transpose() * F2 - F2.transpose() * p.F -
                          F0cl.transpose() * Fb - Fb.transpose() * F0cl - Acl.transpose() * F3 -
                          F3 * Acl - p.Gamma2.transpose() * p.Q * p.Gamma2;
            out("Phia") = -Fa * p.A - p.G.transpose() * F1 - A0cl.transpose() * Fa -
                          GmL * F2.transpose() + Fa * m * F1 + p.Gamma1.transpose() * p.Q;
            out("Phib") = -F0 * F0cl - p.G.transpose() * F2 - Fa * p.F + Fa * m * F2 -
                          A0cl.transpose() * Fb - GmL * F3 - Fb * Acl -
                          p.Gamma1.transpose() * p.Q * p.Gamma2;
            const Eigen::VectorXd b0 = seg("b0"), b1 = seg("b1"), b2 = seg("b2");
            out("b0") = (Fa * m - p.G.transpose()) * b1 - A0cl.transpose() * b0 - GmL * b2 +
                        F0 * m0 * a0_0 + Fb * m * a1 - p.Gamma1.transpose() * p.Q * p.eta;
            out("b1") = (F1 * m - p.A.transpose()) * b1 + Fa.transpose() * m0 * a0_0 +
                        F2 * m * a1 + p.Q * p.eta;
            out("b2") = (F2.transpose() * m - p.F.transpose()) * b1 -
                        F0cl.transpose() * b0 - Acl.transpose() * b2 +
                        Fb.transpose() * m0 * a0_0 + F3 * m * a1 -
                        p.Gamma2.transpose() * p.Q * p.eta;
        }
    }

    OdeRhs rhs() const {
        return [this](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
            dy.setZero(y.size());
            eval(y, dy);
        };
    }

    std::function<void(double, Eigen::VectorXd&)> symmetrizer() const {
        std::vector<std::string> sym;
        if (!blockwise) {
            if (want_p0) sym.push_back("PP0");
            if (want_p1) sym.push_back("PP");
        } else {
            if (want_p0) {
                sym.push_back("Phi1_0");
                sym.push_back("Phi3_0");
            }
            if (want_p1) {
                sym.push_back("Phi0");
                sym.push_back("Phi1");
                sym.push_back("Phi3");
            }
        }
        auto lay = layout;
        const detail::LimitOde* lim = &limit;
        return [lay, lim, sym](double, Eigen::VectorXd& v) {
            lim->symmetrize(v);
            for (const auto& name : sym) {
                const auto& b = lay->at(name);
                Eigen::Map<Eigen::MatrixXd> m(v.data() + b.offset, b.rows, b.cols);
                m = 0.5 * (m + m.transpose()).eval();
            }
        };
    }
};

std::vector<Eigen::VectorXd> run_tracking(const TrackingOde& ode, const TimeGrid& grid,
                                          const IntegratorOptions& opts) {
    IntegratorOptions o = opts;
    if (!o.post_step) o.post_step = ode.symmetrizer();
    auto outcome = integrate_backward(ode.rhs(), ode.terminal().values, grid, o);
    if (!outcome.solved())
        throw std::runtime_error(
            "tracking solve escaped: the LQ problem is solvable by construction, so the "
            "assembly is inconsistent");
    return outcome.solution;
}

double sup_diff(const MatrixTrajectory& x, const MatrixTrajectory& y) {
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        worst = std::max(worst, (x[i] - y[i]).cwiseAbs().maxCoeff());
    return worst;
}

MatrixTrajectory slice(const MatrixTrajectory& big, int r, int c, int n) {
    MatrixTrajectory out(big.size());
    for (std::size_t i = 0; i < big.size(); ++i) out[i] = big[i].block(r, c, n, n);
    return out;
}

MatrixTrajectory seg_traj(const VectorTrajectory& big, int r, int n) {
    MatrixTrajectory out(big.size());
    for (std::size_t i = 0; i < big.size(); ++i) out[i] = big[i].segment(r, n);
    return out;
}

MatrixTrajectory as_mats(const MatrixTrajectory& m) { return m; }

MatrixTrajectory vec_mats(const VectorTrajectory& v) {
    MatrixTrajectory out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i];
    return out;
}

}  // namespace

P0Assembly assemble_p0(const GameParams& p, const LimitRiccati& L, const LimitOffsets& a) {
    auto d = derive_coeffs(p);
    const int n = p.n;
    P0Assembly out;
    out.grid = L.grid;
    const std::size_t m = L.L1.size();
    if (m == 0) throw std::invalid_argument("assemble_p0: limit solution missing");
    out.AA0.resize(m);
    out.forcing.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        out.AA0[i] = build_AA0(p, d.M, L.L1[i], L.L2[i], L.La[i]);
        Eigen::VectorXd f(2 * n);
        f.segment(0, n).setZero();
        f.segment(n, n) = d.M * a.a1[i];
        out.forcing[i] = f;
    }
    out.BB0 = Eigen::MatrixXd::Zero(2 * n, p.B0.cols());
    out.BB0.block(0, 0, n, p.B0.cols()) = p.B0;
    Eigen::MatrixXd K0(n, 2 * n), K0f(n, 2 * n);
    K0 << Eigen::MatrixXd::Identity(n, n), -p.Gamma0;
    K0f << Eigen::MatrixXd::Identity(n, n), -p.Gamma0f;
    out.QQ0 = K0.transpose() * p.Q0 * K0;
    out.PP0T = K0f.transpose() * p.Q0f * K0f;
    out.SS0T = -K0f.transpose() * p.Q0f * p.eta0f;
    return out;
}

P1Assembly assemble_p1(const GameParams& p, const LimitRiccati& L, const LimitOffsets& a) {
    auto d = derive_coeffs(p);
    const int n = p.n;
    P1Assembly out;
    out.grid = L.grid;
    const std::size_t m = L.L1.size();
    if (m == 0) throw std::invalid_argument("assemble_p1: limit solution missing");
    out.AA.resize(m);
    out.f.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        out.AA[i] = build_AA(p, d.M0, d.M, L.L1_0[i], L.L2_0[i], L.L1[i], L.L2[i], L.La[i]);
        Eigen::VectorXd f(3 * n);
        f.segment(0, n) = -d.M0 * a.a0_0[i];
        f.segment(n, n).setZero();
        f.segment(2 * n, n) = -d.M * a.a1[i];
        out.f[i] = f;
    }
    out.BB = Eigen::MatrixXd::Zero(3 * n, p.B.cols());
    out.BB.block(n, 0, n, p.B.cols()) = p.B;
    Eigen::MatrixXd K(n, 3 * n), Kf(n, 3 * n);
    K << -p.Gamma1, Eigen::MatrixXd::Identity(n, n), -p.Gamma2;
    Kf << -p.Gamma1f, Eigen::MatrixXd::Identity(n, n), -p.Gamma2f;
    out.QQ = K.transpose() * p.Q * K;
    out.QQf = Kf.transpose() * p.Qf * Kf;
    out.PPT = out.QQf;
    out.SST = -Kf.transpose() * p.Qf * p.etaf;
    return out;
}

P0Solution solve_p0(const GameParams& p, const TimeGrid& grid, const IntegratorOptions& opts,
                    bool blockwise) {
    validate(p);
    TrackingOde ode(p, blockwise, true, false);
    auto sol = run_tracking(ode, grid, opts);
    const auto& lay = *ode.layout;
    P0Solution out;
    out.grid = grid;
    if (!blockwise) {
        out.PP0 = detail::extract_mat(sol, lay, "PP0");
        out.SS0 = detail::extract_vec(sol, lay, "SS0");
        return out;
    }
    const int n = p.n;
    auto F1 = detail::extract_mat(sol, lay, "Phi1_0");
    auto F2 = detail::extract_mat(sol, lay, "Phi2_0");
    auto F3 = detail::extract_mat(sol, lay, "Phi3_0");
    auto b0 = detail::extract_vec(sol, lay, "b0_0");
    auto b1 = detail::extract_vec(sol, lay, "b1_0");
    out.PP0.resize(sol.size());
    out.SS0.resize(sol.size());
    for (std::size_t i = 0; i < sol.size(); ++i) {
        Eigen::MatrixXd P(2 * n, 2 * n);
        P.block(0, 0, n, n) = F1[i];
        P.block(0, n, n, n) = F2[i];
        P.block(n, 0, n, n) = F2[i].transpose();
        P.block(n, n, n, n) = F3[i];
        out.PP0[i] = P;
        Eigen::VectorXd S(2 * n);
        S.segment(0, n) = b0[i];
        S.segment(n, n) = b1[i];
        out.SS0[i] = S;
    }
    return out;
}

P1Solution solve_p1(const GameParams& p, const TimeGrid& grid, const IntegratorOptions& opts,
                    bool blockwise) {
    validate(p);
    TrackingOde ode(p, blockwise, false, true);
    auto sol = run_tracking(ode, grid, opts);
    const auto& lay = *ode.layout;
    P1Solution out;
    out.grid = grid;
    if (!blockwise) {
        out.PP = detail::extract_mat(sol, lay, "PP");
        out.SS = detail::extract_vec(sol, lay, "SS");
        return out;
    }
    const int n = p.n;
    auto F0 = detail::extract_mat(sol, lay, "Phi0");
    auto F1 = detail::extract_mat(sol, lay, "Phi1");
    auto F2 = detail::extract_mat(sol, lay, "Phi2");
    auto F3 = detail::extract_mat(sol, lay, "Phi3");
    auto Fa = detail::extract_mat(sol, lay, "Phia");
    auto Fb = detail::extract_mat(sol, lay, "Phib");
    auto b0 = detail::extract_vec(sol, lay, "b0");
    auto b1 = detail::extract_vec(sol, lay, "b1");
    auto b2 = detail::extract_vec(sol, lay, "b2");
    out.PP.resize(sol.size());
    out.SS.resize(sol.size());
    for (std::size_t i = 0; i < sol.size(); ++i) {
        Eigen::MatrixXd P(3 * n, 3 * n);
        P.block(0, 0, n, n) = F0[i];
        P.block(0, n, n, n) = Fa[i];
        P.block(0, 2 * n, n, n) = Fb[i];
        P.block(n, 0, n, n) = Fa[i].transpose();
        P.block(n, n, n, n) = F1[i];
        P.block(n, 2 * n, n, n) = F2[i];
        P.block(2 * n, 0, n, n) = Fb[i].transpose();
        P.block(2 * n, n, n, n) = F2[i].transpose();
        P.block(2 * n, 2 * n, n, n) = F3[i];
        out.PP[i] = P;
        Eigen::VectorXd S(3 * n);
        S.segment(0, n) = b0[i];
        S.segment(n, n) = b1[i];
        S.segment(2 * n, n) = b2[i];
        out.SS[i] = S;
    }
    return out;
}

BlockTrackingSolution solve_tracking(const GameParams& p, const TimeGrid& grid,
                                     const IntegratorOptions& opts, bool blockwise) {
    auto p0 = solve_p0(p, grid, opts, blockwise);
    auto p1 = solve_p1(p, grid, opts, blockwise);
    BlockTrackingSolution bt;
    bt.grid = grid;
    bt.PP0 = std::move(p0.PP0);
    bt.SS0 = std::move(p0.SS0);
    bt.PP = std::move(p1.PP);
    bt.SS = std::move(p1.SS);
    return bt;
}

ConsistencyReport verify_consistency(const LimitRiccati& L, const LimitOffsets& a,
                                     const BlockTrackingSolution& bt, double tol) {
    if (bt.grid.num_points != L.grid.num_points || bt.grid.t_start != L.grid.t_start ||
        bt.grid.t_end != L.grid.t_end)
        throw std::invalid_argument("verify_consistency: grid mismatch");
    const int n = int(L.L1[0].rows());

    ConsistencyReport rep;
    rep.tolerance = tol;
    auto record = [&rep](const std::string& name, double v) {
        rep.residuals[name] = v;
        rep.max_residual = std::max(rep.max_residual, v);
    };
    record("Phi1_0-Lambda1_0", sup_diff(slice(bt.PP0, 0, 0, n), as_mats(L.L1_0)));
    record("Phi2_0-Lambda2_0", sup_diff(slice(bt.PP0, 0, n, n), as_mats(L.L2_0)));
    record("Phi3_0-Lambda3_0", sup_diff(slice(bt.PP0, n, n, n), as_mats(L.L3_0)));
    record("beta0_0-alpha0_0", sup_diff(seg_traj(bt.SS0, 0, n), vec_mats(a.a0_0)));
    record("beta1_0-alpha1_0", sup_diff(seg_traj(bt.SS0, n, n), vec_mats(a.a1_0)));
    record("Phi0-Lambda0", sup_diff(slice(bt.PP, 0, 0, n), as_mats(L.L0)));
    record("Phia-Lambda_a", sup_diff(slice(bt.PP, 0, n, n), as_mats(L.La)));
    record("Phib-Lambda_b", sup_diff(slice(bt.PP, 0, 2 * n, n), as_mats(L.Lb)));
    record("Phi1-Lambda1", sup_diff(slice(bt.PP, n, n, n), as_mats(L.L1)));
    record("Phi2-Lambda2", sup_diff(slice(bt.PP, n, 2 * n, n), as_mats(L.L2)));
    record("Phi3-Lambda3", sup_diff(slice(bt.PP, 2 * n, 2 * n, n), as_mats(L.L3)));
    record("beta0-alpha0", sup_diff(seg_traj(bt.SS, 0, n), vec_mats(a.a0)));
    record("beta1-alpha1", sup_diff(seg_traj(bt.SS, n, n), vec_mats(a.a1)));
    record("beta2-alpha2", sup_diff(seg_traj(bt.SS, 2 * n, n), vec_mats(a.a2)));
    rep.pass = rep.max_residual < tol;
    return rep;
}

std::string ConsistencyReport::to_json() const {
    nlohmann::json j;
    j["pass"] = pass;
    j["tolerance"] = tolerance;
    j["max_residual"] = max_residual;
    for (const auto& [k, v] : residuals) j["residuals"][k] = v;
    return j.dump(2);
}

LimitGains optimal_laws(const GameParams& p, const BlockTrackingSolution& bt) {
    const int n = p.n;
    const std::size_t m = bt.PP0.size();
    Eigen::LDLT<Eigen::MatrixXd> r0(p.R0), r(p.R);
    LimitGains g;
    g.grid = bt.grid;
    g.K00.resize(m);
    g.K0bar.resize(m);
    g.k0.resize(m);
    g.Ki0.resize(m);
    g.Kii.resize(m);
    g.Kibar.resize(m);
    g.ki.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        g.K00[i] = r0.solve(p.B0.transpose() * bt.PP0[i].block(0, 0, n, n));
        g.K0bar[i] = r0.solve(p.B0.transpose() * bt.PP0[i].block(0, n, n, n));
        g.k0[i] = r0.solve(p.B0.transpose() * bt.SS0[i].segment(0, n));
        g.Ki0[i] = r.solve(p.B.transpose() * bt.PP[i].block(0, n, n, n).transpose());
        g.Kii[i] = r.solve(p.B.transpose() * bt.PP[i].block(n, n, n, n));
        g.Kibar[i] = r.solve(p.B.transpose() * bt.PP[i].block(n, 2 * n, n, n));
        g.ki[i] = r.solve(p.B.transpose() * bt.SS[i].segment(n, n));
    }
    return g;
}

}  // namespace mflq
