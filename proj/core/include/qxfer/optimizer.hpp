#pragma once

#include <cstdint>
#include <vector>

#include "qxfer/dynamics.hpp"
#include "qxfer/landscape.hpp"
#include "qxfer/network.hpp"

namespace qxfer {

struct OptimizationResult {
    Configuration best_config;
    double best_T = 0.0;         // transfer time / T at gamma = 0
    std::vector<double> trace;   // winning restart: best value after each iteration
    int restarts_used = 0;
    ModelParams params;          // parameters the objective was evaluated under
};

// Multi-start Nelder-Mead over the 3*(n_sites - 2) free intermediate
// coordinates; objective = transfer_time at gamma = 0 with the standard sink.
// Candidates are projected onto the open ball and repaired to satisfy
// min_separation before every evaluation, so the reported best is always
// feasible and penalty-free; a smooth quadratic penalty on the pre-repair
// separation violation shapes the search only. Non-converged evaluations
// enter the search as the finite bad value t_max_over_T. Deterministic for
// fixed (master_seed, restarts, budget), independent of workers.
// Throws NoConvergedEvaluation if no evaluation in any restart converges.
OptimizationResult optimize_gamma0(const ModelParams& params, std::uint64_t master_seed,
                                   int restarts = 32, std::int64_t budget = 20000,
                                   int workers = 1);

struct SweepCurve {
    std::vector<double> gamma_over_Gamma;
    std::vector<double> t_over_T; // NaN marks an absent (non-converged) point
    std::vector<TransferStatus> status;
};

// Re-evaluates the optimized configuration across the gamma grid.
SweepCurve sweep_optimized(const OptimizationResult& result, const GammaGrid& grid);

// Same sweep for an arbitrary configuration (CLI `sweep`).
SweepCurve sweep_configuration(const Configuration& config, const ModelParams& params,
                               const GammaGrid& grid);

} // namespace qxfer
