#pragma once

#include "mflq/finite_game.hpp"

#include <cstdint>

namespace mflq {

enum class SimMode { NashExact, Decentralized };

struct SimConfig {
    int N = 2;
    int num_paths = 2;
    double dt = 1e-3;
    std::uint64_t seed = 0;
    InitialLaw law;
    SimMode mode = SimMode::NashExact;
    // When non-empty, states of the first dump_paths paths go to this CSV.
    std::string path_dump;
    int dump_paths = 0;
};

struct CostEstimate {
    double mean = 0.0;
    double std_error = 0.0;  // sample standard deviation / sqrt(num_paths)
    int num_paths = 0;
};

// Estimate of E sup_{t<=T} |X^(N)(t) - Xbar_dagger(t)|^2 (Decentralized mode
// only; zero in NashExact mode, which has no auxiliary mean-field state).
struct DeviationStat {
    double mean_sq_sup = 0.0;
};

struct SimResult {
    CostEstimate J0, J1;
    DeviationStat deviation;
    int num_steps = 0;
};

// Euler-Maruyama closed loop under the exact finite-N Nash feedback.  Gains
// must cover [0, T] on a grid at least as fine as cfg.dt (linear
// interpolation in between).  Reproducible given cfg.seed; path noise is
// counter-indexed so results do not depend on batching.
SimResult simulate(const GameParams& p, const NashGains& gains, const SimConfig& cfg);

// Same scheme under the decentralized limit strategies, with the auxiliary
// deterministic-drift state Xbar_dagger fed by the realized X0.
SimResult simulate(const GameParams& p, const LimitGains& gains, const SimConfig& cfg);

std::vector<std::pair<int, DeviationStat>> deviation_sweep(const GameParams& p,
                                                           const LimitGains& gains,
                                                           const std::vector<int>& Ns,
                                                           SimConfig cfg);

// E[x^T P_j(0) x] + 2 S_j(0)^T E[x] + r_j(0) under the stacked initial law
// (player states independent, minors i.i.d.).
double predicted_value(const DenseSolution& dense, const GameParams& p, const InitialLaw& law,
                       int player);

namespace detail {
// Standard-normal pair for (seed, path, step, pair); pure function of its
// arguments.  Step 0 is reserved for initial-state draws.
void normal_pair(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::uint64_t pair,
                 double& z0, double& z1);
}  // namespace detail

}  // namespace mflq
