#pragma once

#include "mflq/limit_system.hpp"

namespace mflq {

// Symmetry-reduced solution of the N-player Riccati system: nine n x n blocks
// determine the full (N+1)n x (N+1)n value matrices of the major player and of
// a representative minor player.  The identities Pi4_0 = Pi3_0 and Pi4 = Pi3
// hold exactly and are substituted before integration.
struct StructuredRiccati {
    TimeGrid grid;
    int N = 0;
    MatrixTrajectory Pi1_0, Pi2_0, Pi3_0;
    MatrixTrajectory Pi0, Pi1, Pi2, Pi3, Pia, Pib;
};

struct StructuredSolveResult {
    std::optional<StructuredRiccati> riccati;  // present iff verdict.solvable
    SolvabilityVerdict verdict;
};

// N-scaled view of a structured solution; converges to the limit Riccati
// blocks at rate O(1/N).
struct RescaledView {
    TimeGrid grid;
    MatrixTrajectory L1_0N, L2_0N, L3_0N;
    MatrixTrajectory L0_N, L1_N, L2_N, L3_N, La_N, Lb_N;
};

// Linear-offset and constant terms of the value functions.  r1 is shared by
// all minor players.
struct StructuredOffsets {
    VectorTrajectory th0_0, th1_0;
    VectorTrajectory th0, th1, th2;
    ScalarTrajectory r0, r1;
};

// Brute-force solution over the full (N+1)n state, one value triple per
// player.  Serves as the oracle for the structured path.
struct DenseSolution {
    TimeGrid grid;
    int N = 0;
    std::vector<MatrixTrajectory> P;   // N+1 entries, (N+1)n x (N+1)n
    std::vector<VectorTrajectory> S;   // N+1 entries, (N+1)n
    std::vector<ScalarTrajectory> r;   // N+1 entries
};

// Affine feedback u_j = -(K_j X + k_j) for every player.
struct NashGains {
    TimeGrid grid;
    MatrixTrajectory K0;               // n1 x (N+1)n
    VectorTrajectory k0;               // n1
    std::vector<MatrixTrajectory> Ki;  // N entries
    std::vector<VectorTrajectory> ki;
};

// Integrates the nine-block system backward; symmetrize keeps the symmetric
// blocks exactly symmetric after every accepted step (disable to measure
// drift).
StructuredSolveResult solve_structured(const GameParams& p, int N, const TimeGrid& grid,
                                       const IntegratorOptions& opts = {}, bool symmetrize = true);

inline constexpr int kDenseOracleMaxN = 8;

// Full (N+1)-player Riccati/offset/constant system without symmetry reduction.
// Throws std::invalid_argument for N > kDenseOracleMaxN and std::runtime_error
// on finite escape.
DenseSolution solve_dense_oracle(const GameParams& p, int N, const TimeGrid& grid,
                                 const IntegratorOptions& opts = {}, bool symmetrize = true);

RescaledView rescale(const StructuredRiccati& s);

// Offset/constant system along a solved structured Riccati flow.
StructuredOffsets solve_structured_offsets(const GameParams& p, const StructuredRiccati& s,
                                           const IntegratorOptions& opts = {});

// Expands the block patterns into full-size P0, P1, S0, S1 (and r0, r1).
DenseSolution assemble_dense(const StructuredRiccati& s, const StructuredOffsets& offsets);

NashGains nash_gains(const DenseSolution& dense, const GameParams& p);

// One CSV per Riccati block under dir (Pi1_0.csv, ...); theta.csv and r.csv
// when offsets are given.  Returns the written paths.
std::vector<std::string> export_structured_csv(const StructuredRiccati& s,
                                               const StructuredOffsets* offsets,
                                               const std::string& dir);

}  // namespace mflq
