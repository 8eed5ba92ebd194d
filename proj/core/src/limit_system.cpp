#include "mflq/limit_system.hpp"

#include "limit_ode.hpp"
#include "mflq/csv_io.hpp"

#include <stdexcept>

namespace mflq {

namespace {

IntegratorOptions with_symmetrizer(const IntegratorOptions& opts, const detail::LimitOde& ode) {
    IntegratorOptions o = opts;
    if (!o.post_step) o.post_step = ode.symmetrizer();
    return o;
}

}  // namespace

LimitSolveResult solve_limit_riccati(const GameParams& p, const TimeGrid& grid,
                                     const IntegratorOptions& opts) {
    validate(p);
    detail::LimitOde ode(p, false, false);
    auto outcome =
        integrate_backward(ode.rhs(), ode.terminal().values, grid, with_symmetrizer(opts, ode));

    LimitSolveResult res;
    res.verdict.rtol = opts.rtol;
    res.verdict.atol = opts.atol;
    res.verdict.sup_norm = outcome.max_norm;
    if (!outcome.solved()) {
        res.verdict.solvable = false;
        res.verdict.escape_interval = {{outcome.escape_lo, outcome.escape_hi}};
        return res;
    }
    res.verdict.solvable = true;
    const auto& lay = *ode.layout();
    LimitRiccati L;
    L.grid = grid;
    L.L1_0 = detail::extract_mat(outcome.solution, lay, "L1_0");
    L.L2_0 = detail::extract_mat(outcome.solution, lay, "L2_0");
    L.L3_0 = detail::extract_mat(outcome.solution, lay, "L3_0");
    L.L0 = detail::extract_mat(outcome.solution, lay, "L0");
    L.L1 = detail::extract_mat(outcome.solution, lay, "L1");
    L.L2 = detail::extract_mat(outcome.solution, lay, "L2");
    L.L3 = detail::extract_mat(outcome.solution, lay, "L3");
    L.La = detail::extract_mat(outcome.solution, lay, "La");
    L.Lb = detail::extract_mat(outcome.solution, lay, "Lb");
    res.riccati = std::move(L);
    return res;
}

LimitOffsets solve_limit_offsets(const GameParams& p, const LimitRiccati& L,
                                 const IntegratorOptions& opts) {
    // The offsets are linear along the Riccati flow; the Riccati blocks ride
    // along in the state so no trajectory interpolation is needed.
    detail::LimitOde ode(p, true, false);
    auto outcome =
        integrate_backward(ode.rhs(), ode.terminal().values, L.grid, with_symmetrizer(opts, ode));
    if (!outcome.solved())
        throw std::runtime_error("solve_limit_offsets: Riccati system escaped (expected solvable)");
    const auto& lay = *ode.layout();
    LimitOffsets a;
    a.a0_0 = detail::extract_vec(outcome.solution, lay, "a0_0");
    a.a1_0 = detail::extract_vec(outcome.solution, lay, "a1_0");
    a.a0 = detail::extract_vec(outcome.solution, lay, "a0");
    a.a1 = detail::extract_vec(outcome.solution, lay, "a1");
    a.a2 = detail::extract_vec(outcome.solution, lay, "a2");
    return a;
}

LimitCosts solve_limit_costs(const GameParams& p, const LimitRiccati& L, const LimitOffsets&,
                             const IntegratorOptions& opts) {
    detail::LimitOde ode(p, true, true);
    auto outcome =
        integrate_backward(ode.rhs(), ode.terminal().values, L.grid, with_symmetrizer(opts, ode));
    if (!outcome.solved())
        throw std::runtime_error("solve_limit_costs: Riccati system escaped (expected solvable)");
    const auto& lay = *ode.layout();
    LimitCosts c;
    c.chi0 = detail::extract_scalar(outcome.solution, lay, "chi0");
    c.chi = detail::extract_scalar(outcome.solution, lay, "chi");
    return c;
}

AsymptoticCosts asymptotic_costs(const GameParams& p, const LimitRiccati& L, const LimitOffsets& a,
                                 const LimitCosts& c, const InitialLaw& law) {
    (void)p;
    const auto& mu0 = law.mu0;
    const auto& mu = law.mu;
    AsymptoticCosts out;
    out.J0_inf = mu0.dot(L.L1_0[0] * mu0) + 2.0 * mu0.dot(L.L2_0[0] * mu) +
                 mu.dot(L.L3_0[0] * mu) + 2.0 * (mu0.dot(a.a0_0[0]) + mu.dot(a.a1_0[0])) +
                 (L.L1_0[0] * law.Sigma0).trace() + c.chi0[0];
    out.J1_inf = mu0.dot(L.L0[0] * mu0) + 2.0 * mu0.dot(L.La[0] * mu) +
                 2.0 * mu0.dot(L.Lb[0] * mu) +
                 mu.dot((L.L1[0] + 2.0 * L.L2[0] + L.L3[0]) * mu) +
                 2.0 * (mu0.dot(a.a0[0]) + mu.dot(a.a1[0]) + mu.dot(a.a2[0])) +
                 (L.L0[0] * law.Sigma0).trace() + (L.L1[0] * law.Sigma).trace() + c.chi[0];
    return out;
}

LimitGains limit_strategy_gains(const GameParams& p, const LimitRiccati& L,
                                const LimitOffsets& a) {
    const std::size_t m = L.L1_0.size();
    Eigen::LDLT<Eigen::MatrixXd> r0(p.R0), r(p.R);
    LimitGains g;
    g.grid = L.grid;
    g.K00.resize(m);
    g.K0bar.resize(m);
    g.k0.resize(m);
    g.Ki0.resize(m);
    g.Kii.resize(m);
    g.Kibar.resize(m);
    g.ki.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        g.K00[i] = r0.solve(p.B0.transpose() * L.L1_0[i]);
        g.K0bar[i] = r0.solve(p.B0.transpose() * L.L2_0[i]);
        g.k0[i] = r0.solve(p.B0.transpose() * a.a0_0[i]);
        g.Ki0[i] = r.solve(p.B.transpose() * L.La[i].transpose());
        g.Kii[i] = r.solve(p.B.transpose() * L.L1[i]);
        g.Kibar[i] = r.solve(p.B.transpose() * L.L2[i]);
        g.ki[i] = r.solve(p.B.transpose() * a.a1[i]);
    }
    return g;
}

std::vector<std::string> export_limit_csv(const LimitRiccati& L, const std::string& dir) {
    std::vector<std::pair<std::string, const MatrixTrajectory*>> blocks = {
        {"Lambda1_0", &L.L1_0}, {"Lambda2_0", &L.L2_0}, {"Lambda3_0", &L.L3_0},
        {"Lambda0", &L.L0},     {"Lambda1", &L.L1},     {"Lambda2", &L.L2},
        {"Lambda3", &L.L3},     {"Lambda_a", &L.La},    {"Lambda_b", &L.Lb}};
    std::vector<std::string> written;
    for (const auto& [name, traj] : blocks) {
        std::string path = dir + "/" + name + ".csv";
        write_blocks_csv(path, L.grid, {{name, traj}});
        written.push_back(path);
    }
    return written;
}

}  // namespace mflq
