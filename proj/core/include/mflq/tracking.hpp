#pragma once

#include "mflq/limit_system.hpp"

#include <map>

namespace mflq {

// Major player against the frozen mean field: 2n-dimensional LQ tracking
// problem.  BB0 and QQ0 are constant; the drift and forcing vary in time
// through the limit solution.
struct P0Assembly {
    TimeGrid grid;
    MatrixTrajectory AA0;      // 2n x 2n
    Eigen::MatrixXd BB0;       // 2n x n1
    Eigen::MatrixXd QQ0;       // 2n x 2n
    VectorTrajectory forcing;  // [0; M a1], enters the dynamics with minus sign
    Eigen::MatrixXd PP0T;
    Eigen::VectorXd SS0T;
};

// Representative minor player: 3n-dimensional problem over (X0, X1, Xbar).
struct P1Assembly {
    TimeGrid grid;
    MatrixTrajectory AA;  // 3n x 3n
    Eigen::MatrixXd BB;   // 3n x n1
    Eigen::MatrixXd QQ, QQf;
    VectorTrajectory f;   // -[M0 a0_0; 0; M a1]
    Eigen::MatrixXd PPT;
    Eigen::VectorXd SST;
};

struct P0Solution {
    TimeGrid grid;
    MatrixTrajectory PP0;  // 2n x 2n, symmetric
    VectorTrajectory SS0;  // 2n
};

struct P1Solution {
    TimeGrid grid;
    MatrixTrajectory PP;  // 3n x 3n, symmetric
    VectorTrajectory SS;  // 3n
};

struct BlockTrackingSolution {
    TimeGrid grid;
    MatrixTrajectory PP0;
    VectorTrajectory SS0;
    MatrixTrajectory PP;
    VectorTrajectory SS;
};

P0Assembly assemble_p0(const GameParams& p, const LimitRiccati& L, const LimitOffsets& a);
P1Assembly assemble_p1(const GameParams& p, const LimitRiccati& L, const LimitOffsets& a);

// Both solvers carry a fresh copy of the limit system in the integrated state,
// so the time-varying drift is exact rather than interpolated.  blockwise
// switches to the expanded per-block ODEs — an independent transcription of
// the same problem used as a cross-check.  Escape here signals an assembly
// bug, reported as std::runtime_error (never a solvability verdict).
P0Solution solve_p0(const GameParams& p, const TimeGrid& grid, const IntegratorOptions& opts = {},
                    bool blockwise = false);
P1Solution solve_p1(const GameParams& p, const TimeGrid& grid, const IntegratorOptions& opts = {},
                    bool blockwise = false);

BlockTrackingSolution solve_tracking(const GameParams& p, const TimeGrid& grid,
                                     const IntegratorOptions& opts = {}, bool blockwise = false);

struct ConsistencyReport {
    std::map<std::string, double> residuals;  // sup-norm over the grid, per block
    double max_residual = 0.0;
    double tolerance = 1e-6;
    bool pass = false;

    std::string to_json() const;
};

// Checks the block identification of (PP0, SS0, PP, SS) with the limit
// solution (Lambda, alpha).  Throws std::invalid_argument on grid mismatch.
ConsistencyReport verify_consistency(const LimitRiccati& L, const LimitOffsets& a,
                                     const BlockTrackingSolution& bt, double tol = 1e-6);

// Gain schedules of the optimal laws u0*, u1*, in the same shape as
// limit_strategy_gains (with which they agree when consistency holds).
LimitGains optimal_laws(const GameParams& p, const BlockTrackingSolution& bt);

}  // namespace mflq
