#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "qxfer/network.hpp"

namespace qxfer {

// Excited-block density matrix plus the ground-state population fed by the
// sink. trace(rho) + ground_population is conserved along trajectories.
struct ExcitedState {
    Eigen::MatrixXcd rho;
    double ground_population = 0.0;
};

// Vectorized generator of the master equation restricted to the excited
// block, acting on column-major vec(rho). The sink feeding term lives outside
// the block and is tracked as dp0/dt = sink_rate * rho_out,out.
struct Liouvillian {
    Eigen::MatrixXcd generator; // n^2 x n^2
    double gamma = 0.0;         // dephasing rate, absolute units
    double sink_rate = 0.0;     // Gamma, absolute units
    NetworkModel model;
};

enum class TransferStatus {
    Converged,
    Divergent,      // transfer time above the divergence cap
    IllConditioned, // solve residual or absorption check failed
};

// Transfer time with its convergence diagnostics. transfer_time is reported
// in units of the direct time T.
struct TransferResult {
    double transfer_time = 0.0;
    double absorption_total = 0.0; // Gamma * integral of rho_out,out
    TransferStatus status = TransferStatus::IllConditioned;
    double residual = 0.0; // worst relative residual of the two linear solves
};

inline const char* to_string(TransferStatus s) {
    switch (s) {
    case TransferStatus::Converged:
        return "converged";
    case TransferStatus::Divergent:
        return "divergent";
    default:
        return "ill_conditioned";
    }
}

// Default divergence cap: samples with transfer_time > 1e6 * T are recorded
// as Divergent and routed to overflow statistics.
inline constexpr double k_t_max_over_T = 1e6;

// Assembles the generator: commutator -i[H, rho], sink anticommutator
// -(Gamma/2){|out><out|, rho}, and dephasing damping every off-diagonal
// element at rate 4*gamma with diagonals untouched.
Liouvillian build_liouvillian(const NetworkModel& model, double gamma);

// Mean transfer time via two resolvent solves from rho(0) = |in><in|:
// L tau = -vec(rho0), L sigma = -tau; absorption = Gamma tau_oo and
// transfer time = Gamma sigma_oo. Never throws on numerical failure; the
// status field routes bad samples to overflow.
TransferResult transfer_time(const Liouvillian& liouvillian,
                             double t_max_over_T = k_t_max_over_T);

// Cross-validation path through the full eigendecomposition of the
// generator. Same contract and gates as transfer_time.
TransferResult transfer_time_eig(const Liouvillian& liouvillian,
                                 double t_max_over_T = k_t_max_over_T);

// Workspace-reusing solver for the sampling hot loop. The generator depends
// affinely on gamma, so the gamma-independent part is assembled once per
// model and only the 42 coherence diagonal entries are rewritten per gamma
// (set absolutely, not incrementally, so results are identical no matter
// which gammas were evaluated before).
class TransferSolver {
public:
    explicit TransferSolver(double t_max_over_T = k_t_max_over_T);

    void set_model(const NetworkModel& model);
    TransferResult at_gamma(double gamma_abs);

    const NetworkModel& model() const { return model_; }
    // Generator currently loaded in the workspace (after at_gamma).
    const Eigen::MatrixXcd& generator() const { return work_; }

private:
    double t_max_over_T_;
    NetworkModel model_;
    Eigen::MatrixXcd base_;
    Eigen::MatrixXcd work_;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
    Eigen::VectorXcd tau_, sigma_, r_, delta_;
};

// trace(rho^2) / trace(rho)^2: purity normalized so sink absorption does not
// masquerade as decoherence. Throws EmptyState when trace(rho) < 1e-12.
double purity(const ExcitedState& state);

struct EigenstateRow {
    double energy = 0.0;
    double in_weight = 0.0;  // |<in|psi>|^2
    double out_weight = 0.0; // |<out|psi>|^2
};

struct EigenstateReport {
    std::vector<EigenstateRow> rows; // ascending energy
    bool in_trapped = false;
};

// Spectral decomposition of H with in/out overlaps. A configuration is
// flagged in-trapped when some eigenstate concentrates on the injection site
// while barely touching the sink site.
EigenstateReport eigenstate_report(const NetworkModel& model, double in_threshold = 0.4,
                                   double out_threshold = 0.01);

// One CSV row (seed_index, gamma/Gamma, transfer_time/T, status,
// absorption_total) for landscape-style streaming output.
std::string to_csv_row(std::uint64_t seed_index, double gamma_over_Gamma,
                       const TransferResult& result);

} // namespace qxfer
