#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "qxfer/dynamics.hpp"

namespace qxfer {

// Knobs for evolve_oracle. Defaults implement the standard stopping rule:
// integrate to at least t_end, then continue until trace(rho) < trace_floor
// so the accumulated moments have converged tails.
struct OracleOptions {
    // Initial excited-block state; empty means |in><in|.
    Eigen::MatrixXcd rho0;
    // Stop exactly at t_end instead of running to the trace floor
    // (trajectory studies such as fixed-time purity or decay checks).
    bool stop_at_t_end = false;
    double trace_floor = 1e-12;
    // Accepted+rejected explicit Dormand-Prince steps before the exponential
    // path takes over. Zero, the default, is exponential-only; the explicit
    // path exists as an independent scheme for cross-validation.
    std::int64_t explicit_step_limit = 0;
    // Exponential-step budget. Steps are cheap matrix-vector products with a
    // cached propagator, so a slow tail is marched rather than extrapolated;
    // a dark plateau exhausts this budget and is reported as such.
    std::int64_t max_exp_steps = 16000000;
    // Bound on ||A||_1 * h per exponential step. Keeps the scaling-and-
    // squaring chain inside expm short enough that its roundoff stays far
    // below the conservation tolerance of downstream checks.
    double exp_norm_cap = 32768.0;
    // Hard stop at t_giveup_factor * max(t_end, 1/Gamma); reaching it with
    // trace above the floor flags the run as budget exhausted (near-dark).
    double t_giveup_factor = 1e12;
    // Snapshot retention cap; beyond it every other snapshot is dropped and
    // the recording stride doubles.
    std::size_t max_snapshots = 4096;
};

struct OracleResult {
    std::vector<double> times;
    std::vector<Eigen::MatrixXcd> states;    // rho at `times`
    std::vector<double> ground_population;   // p0 = Gamma * m0 at `times`

    double m0 = 0.0; // integral of rho_out,out dt
    double m1 = 0.0; // integral of t * rho_out,out dt
    double absorption_total = 0.0; // Gamma * m0
    double transfer_time = 0.0;    // Gamma * m1 in units of T
    double t_final = 0.0;
    double trace_final = 0.0;

    bool budget_exhausted = false; // near-dark: moments are partial
    bool used_exponential = false;
    std::int64_t steps_explicit = 0;
    std::int64_t steps_exponential = 0;
};

// Independent time-domain integration of the master equation. The default
// path propagates with e^(A h) at a norm-capped step size, reusing the
// propagator while the step is constant; `tolerance` has no effect there
// because each step is exact to roundoff. Setting explicit_step_limit > 0
// runs an embedded Dormand-Prince 5(4) pair under `tolerance` first, as an
// independently discretized cross-check, handing over to the exponential
// path if its budget trips. Moment integrals ride along in an augmented
// linear state and are harvested every step, which keeps their slots small
// and the first moment free of large-t cancellation. The right-hand side is
// built directly from (H, Gamma, gamma) in matrix form and shares no
// assembly code with the resolvent path.
OracleResult evolve_oracle(const Liouvillian& liouvillian, double t_end,
                           double tolerance = 1e-10, const OracleOptions& options = {});

} // namespace qxfer
