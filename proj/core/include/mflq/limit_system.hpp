#pragma once

#include "mflq/model.hpp"
#include "mflq/ode.hpp"

#include <optional>

namespace mflq {

using MatrixTrajectory = std::vector<Eigen::MatrixXd>;  // one matrix per grid point
using VectorTrajectory = std::vector<Eigen::VectorXd>;
using ScalarTrajectory = std::vector<double>;

// The nine-matrix limit Riccati system.  L1_0, L3_0, L0, L1, L3 are symmetric
// at every grid point.
struct LimitRiccati {
    TimeGrid grid;
    MatrixTrajectory L1_0, L2_0, L3_0;
    MatrixTrajectory L0, L1, L2, L3, La, Lb;
};

// The five-vector offset system driven by the solved Riccati trajectories.
struct LimitOffsets {
    VectorTrajectory a0_0, a1_0;
    VectorTrajectory a0, a1, a2;
};

// The two scalar cost-constant trajectories.
struct LimitCosts {
    ScalarTrajectory chi0, chi;
};

struct SolvabilityVerdict {
    bool solvable = false;
    std::optional<std::pair<double, double>> escape_interval;
    double sup_norm = 0.0;
    double rtol = 0.0, atol = 0.0;
};

struct LimitSolveResult {
    std::optional<LimitRiccati> riccati;  // present iff verdict.solvable
    SolvabilityVerdict verdict;
};

// Integrates the nine-matrix system backward from its terminal data; the game
// is asymptotically solvable iff the system stays bounded down to t = 0.
LimitSolveResult solve_limit_riccati(const GameParams& p, const TimeGrid& grid,
                                     const IntegratorOptions& opts = {});

// Linear offset system along a solvable Riccati solution.
LimitOffsets solve_limit_offsets(const GameParams& p, const LimitRiccati& L,
                                 const IntegratorOptions& opts = {});

// Scalar cost constants along solved (L, a).
LimitCosts solve_limit_costs(const GameParams& p, const LimitRiccati& L, const LimitOffsets& a,
                             const IntegratorOptions& opts = {});

// Infinite-population equilibrium costs evaluated at t = 0 under the given
// initial law.
struct AsymptoticCosts {
    double J0_inf = 0.0;
    double J1_inf = 0.0;
};
AsymptoticCosts asymptotic_costs(const GameParams& p, const LimitRiccati& L, const LimitOffsets& a,
                                 const LimitCosts& c, const InitialLaw& law);

// Decentralized strategy gain schedules:
//   u0(t) = -(K00 X0 + K0bar Xbar + k0)
//   ui(t) = -(Ki0 X0 + Kii Xi + Kibar Xbar + ki)
struct LimitGains {
    TimeGrid grid;
    MatrixTrajectory K00, K0bar;   // n1 x n
    VectorTrajectory k0;           // n1
    MatrixTrajectory Ki0, Kii, Kibar;
    VectorTrajectory ki;
};
LimitGains limit_strategy_gains(const GameParams& p, const LimitRiccati& L, const LimitOffsets& a);

// CSV export of all nine Riccati trajectories, one file per block under dir,
// named Lambda<block>.csv.  Returns the written paths.
std::vector<std::string> export_limit_csv(const LimitRiccati& L, const std::string& dir);

}  // namespace mflq
