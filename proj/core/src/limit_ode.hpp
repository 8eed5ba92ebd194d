#pragma once

// Internal: right-hand-side builder for the limit Riccati / offset / cost
// system.  Shared by the limit solver and the tracking solvers, which ride
// their own blocks on top of this layout.

#include "mflq/limit_system.hpp"

#include <stdexcept>

namespace mflq::detail {

inline constexpr const char* kLimitRiccatiBlocks[9] = {"L1_0", "L2_0", "L3_0", "L0", "L1",
                                                       "L2",   "L3",   "La",   "Lb"};
inline constexpr const char* kLimitSymmetricBlocks[5] = {"L1_0", "L3_0", "L0", "L1", "L3"};
inline constexpr const char* kLimitOffsetBlocks[5] = {"a0_0", "a1_0", "a0", "a1", "a2"};

class LimitOde {
public:
    // p must outlive the ODE object.
    LimitOde(const GameParams& params, bool offsets, bool costs)
        : p_(params), with_offsets_(offsets || costs), with_costs_(costs) {
        auto d = derive_coeffs(p_);
        M0_ = d.M0;
        M_ = d.M;
        layout_ = std::make_shared<BlockLayout>();
        for (const char* b : kLimitRiccatiBlocks) layout_->add(b, p_.n, p_.n);
        if (with_offsets_)
            for (const char* b : kLimitOffsetBlocks) layout_->add(b, p_.n, 1);
        if (with_costs_) {
            layout_->add("chi0", 1, 1);
            layout_->add("chi", 1, 1);
        }
    }

    const std::shared_ptr<BlockLayout>& layout() const { return layout_; }
    const Eigen::MatrixXd& M0() const { return M0_; }
    const Eigen::MatrixXd& M() const { return M_; }
    bool with_offsets() const { return with_offsets_; }

    void fill_terminal(FlatState& s) const {
        const GameParams& p = p_;
        s.block("L1_0") = p.Q0f;
        s.block("L2_0") = -p.Q0f * p.Gamma0f;
        s.block("L3_0") = p.Gamma0f.transpose() * p.Q0f * p.Gamma0f;
        s.block("L0") = p.Gamma1f.transpose() * p.Qf * p.Gamma1f;
        s.block("L1") = p.Qf;
        s.block("L2") = -p.Qf * p.Gamma2f;
        s.block("L3") = p.Gamma2f.transpose() * p.Qf * p.Gamma2f;
        s.block("La") = -p.Gamma1f.transpose() * p.Qf;
        s.block("Lb") = p.Gamma1f.transpose() * p.Qf * p.Gamma2f;
        if (with_offsets_) {
            s.block("a0_0") = -p.Q0f * p.eta0f;
            s.block("a1_0") = p.Gamma0f.transpose() * p.Q0f * p.eta0f;
            s.block("a0") = p.Gamma1f.transpose() * p.Qf * p.etaf;
            s.block("a1") = -p.Qf * p.etaf;
            s.block("a2") = p.Gamma2f.transpose() * p.Qf * p.etaf;
        }
        if (with_costs_) {
            s.block("chi0")(0, 0) = p.eta0f.dot(p.Q0f * p.eta0f);
            s.block("chi")(0, 0) = p.etaf.dot(p.Qf * p.etaf);
        }
    }

    FlatState terminal() const {
        FlatState s(layout_);
        fill_terminal(s);
        return s;
    }

    // Writes the derivatives of this system's blocks into dyv (other entries
    // untouched; callers pre-zero the full vector).
    void eval(const Eigen::VectorXd& yv, Eigen::VectorXd& dyv) const {
        const GameParams& p = p_;
        const Eigen::MatrixXd& m0 = M0_;
        const Eigen::MatrixXd& m = M_;
        auto in = [&](const char* n) {
            const auto& b = layout_->at(n);
            return Eigen::Map<const Eigen::MatrixXd>(yv.data() + b.offset, b.rows, b.cols);
        };
        auto out = [&](const char* n) {
            const auto& b = layout_->at(n);
            return Eigen::Map<Eigen::MatrixXd>(dyv.data() + b.offset, b.rows, b.cols);
        };

        const Eigen::MatrixXd L1_0 = in("L1_0"), L2_0 = in("L2_0"), L3_0 = in("L3_0");
        const Eigen::MatrixXd L0 = in("L0"), L1 = in("L1"), L2 = in("L2"), L3 = in("L3");
        const Eigen::MatrixXd La = in("La"), Lb = in("Lb");

        const Eigen::MatrixXd cl = m * (L1 + L2) - p.A - p.F;  // -(A+F-M(L1+L2))
        const Eigen::MatrixXd clT = (L1 + L2.transpose()) * m - p.A.transpose() - p.F.transpose();
        const Eigen::MatrixXd LaM_G = La * m - p.G.transpose();

        out("L1_0") = L1_0 * m0 * L1_0 - (L1_0 * p.A0 + p.A0.transpose() * L1_0) +
                      L2_0 * (m * La.transpose() - p.G) + LaM_G * L2_0.transpose() - p.Q0;
        out("L2_0") = (L1_0 * m0 - p.A0.transpose()) * L2_0 + L2_0 * cl - L1_0 * p.F0 +
                      LaM_G * L3_0 + p.Q0 * p.Gamma0;
        out("L3_0") = L2_0.transpose() * m0 * L2_0 - L2_0.transpose() * p.F0 -
                      p.F0.transpose() * L2_0 + L3_0 * cl + clT * L3_0 -
                      p.Gamma0.transpose() * p.Q0 * p.Gamma0;
        out("L0") = La * m * La.transpose() - Lb * p.G - p.G.transpose() * Lb.transpose() +
                    L0 * (m0 * L1_0 - p.A0) + (L1_0 * m0 - p.A0.transpose()) * L0 -
                    La * (p.G - m * Lb.transpose()) - (p.G.transpose() - Lb * m) * La.transpose() -
                    p.Gamma1.transpose() * p.Q * p.Gamma1;
        out("L1") = L1 * m * L1 - L1 * p.A - p.A.transpose() * L1 - p.Q;
        out("L2") = La.transpose() * (m0 * L2_0 - p.F0) - L1 * p.F +
                    (L1 * m - p.A.transpose()) * L2 + L2 * cl + p.Q * p.Gamma2;
        out("L3") = Lb.transpose() * m0 * L2_0 + L2_0.transpose() * m0 * Lb +
                    L2.transpose() * m * L2 - Lb.transpose() * p.F0 - p.F0.transpose() * Lb -
                    L2.transpose() * p.F - p.F.transpose() * L2 + L3 * cl + clT * L3 -
                    p.Gamma2.transpose() * p.Q * p.Gamma2;
        out("La") = (L1_0 * m0 - p.A0.transpose()) * La + La * (m * L1 - p.A) -
                    p.G.transpose() * L1 + LaM_G * L2.transpose() + p.Gamma1.transpose() * p.Q;
        out("Lb") = L0 * m0 * L2_0 + LaM_G * (L2 + L3) - L0 * p.F0 - La * p.F + Lb * cl +
                    (L1_0 * m0 - p.A0.transpose()) * Lb - p.Gamma1.transpose() * p.Q * p.Gamma2;

        if (with_offsets_) {
            auto seg = [&](const char* n) -> Eigen::VectorXd {
                const auto& b = layout_->at(n);
                return yv.segment(b.offset, b.rows);
            };
            const Eigen::VectorXd a0_0 = seg("a0_0"), a1_0 = seg("a1_0");
            const Eigen::VectorXd a0 = seg("a0"), a1 = seg("a1"), a2 = seg("a2");
            out("a0_0") = (L1_0 * m0 - p.A0.transpose()) * a0_0 + LaM_G * a1_0 + L2_0 * m * a1 +
                          p.Q0 * p.eta0;
            out("a1_0") = (L2_0.transpose() * m0 - p.F0.transpose()) * a0_0 + clT * a1_0 +
                          L3_0 * m * a1 - p.Gamma0.transpose() * p.Q0 * p.eta0;
            out("a0") = (L1_0 * m0 - p.A0.transpose()) * a0 +
                        ((La + Lb) * m - p.G.transpose()) * a1 + L0 * m0 * a0_0 + LaM_G * a2 -
                        p.Gamma1.transpose() * p.Q * p.eta;
            out("a1") = ((L1 + L2) * m - p.A.transpose()) * a1 + La.transpose() * m0 * a0_0 +
                        p.Q * p.eta;
            out("a2") = (L2_0.transpose() * m0 - p.F0.transpose()) * a0 + clT * a2 +
                        Lb.transpose() * m0 * a0_0 +
                        ((L2.transpose() + L3) * m - p.F.transpose()) * a1 -
                        p.Gamma2.transpose() * p.Q * p.eta;
            if (with_costs_) {
                auto scalar = [&](const char* n) -> double& {
                    return dyv[layout_->at(n).offset];
                };
                scalar("chi0") = a0_0.dot(m0 * a0_0) + 2.0 * a1_0.dot(m * a1) -
                                 p.eta0.dot(p.Q0 * p.eta0) -
                                 (p.D0.transpose() * L1_0 * p.D0).trace();
                scalar("chi") = 2.0 * a0.dot(m0 * a0_0) + 2.0 * a2.dot(m * a1) + a1.dot(m * a1) -
                                p.eta.dot(p.Q * p.eta) - (p.D0.transpose() * L0 * p.D0).trace() -
                                (p.D.transpose() * L1 * p.D).trace();
            }
        }
    }

    OdeRhs rhs() const {
        return [this](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
            dy.setZero(y.size());
            eval(y, dy);
        };
    }

    void symmetrize(Eigen::VectorXd& v) const {
        for (const char* name : kLimitSymmetricBlocks) {
            const auto& b = layout_->at(name);
            Eigen::Map<Eigen::MatrixXd> m(v.data() + b.offset, b.rows, b.cols);
            m = 0.5 * (m + m.transpose()).eval();
        }
    }

    std::function<void(double, Eigen::VectorXd&)> symmetrizer() const {
        return [this](double, Eigen::VectorXd& v) { symmetrize(v); };
    }

private:
    const GameParams& p_;
    Eigen::MatrixXd M0_, M_;
    bool with_offsets_, with_costs_;
    std::shared_ptr<BlockLayout> layout_;
};

inline MatrixTrajectory extract_mat(const std::vector<Eigen::VectorXd>& sol,
                                    const BlockLayout& lay, const std::string& name) {
    const auto& b = lay.at(name);
    MatrixTrajectory out(sol.size());
    for (std::size_t i = 0; i < sol.size(); ++i)
        out[i] = Eigen::Map<const Eigen::MatrixXd>(sol[i].data() + b.offset, b.rows, b.cols);
    return out;
}

inline VectorTrajectory extract_vec(const std::vector<Eigen::VectorXd>& sol,
                                    const BlockLayout& lay, const std::string& name) {
    const auto& b = lay.at(name);
    VectorTrajectory out(sol.size());
    for (std::size_t i = 0; i < sol.size(); ++i) out[i] = sol[i].segment(b.offset, b.rows);
    return out;
}

inline ScalarTrajectory extract_scalar(const std::vector<Eigen::VectorXd>& sol,
                                       const BlockLayout& lay, const std::string& name) {
    const auto& b = lay.at(name);
    ScalarTrajectory out(sol.size());
    for (std::size_t i = 0; i < sol.size(); ++i) out[i] = sol[i][b.offset];
    return out;
}

}  // namespace mflq::detail
