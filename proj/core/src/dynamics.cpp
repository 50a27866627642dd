#include "qxfer/dynamics.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <limits>

#include <Eigen/Eigenvalues>

#include "qxfer/errors.hpp"

namespace qxfer {

namespace {

using Cplx = std::complex<double>;

// vec index of element (i, j) under column-major vectorization.
inline int slot(int i, int j, int n) { return i + n * j; }

// Gamma-independent part of the generator: commutator plus sink
// anticommutator. Column-major identities: vec(H rho) = (I (x) H) vec(rho),
// vec(rho H) = (H^T (x) I) vec(rho), with H real symmetric.
Eigen::MatrixXcd assemble_base(const NetworkModel& model) {
    const int n = static_cast<int>(model.couplings.rows());
    const int out = model.out_site();
    const double half_sink = 0.5 * model.sink_rate;
    const Cplx m_i(0.0, -1.0);

    Eigen::MatrixXcd gen = Eigen::MatrixXcd::Zero(n * n, n * n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int row = slot(i, j, n);
            // -i (H rho)_{ij} = -i sum_k H_{ik} rho_{kj}
            for (int k = 0; k < n; ++k) {
                if (k != i) {
                    gen(row, slot(k, j, n)) += m_i * model.couplings(i, k);
                }
            }
            // +i (rho H)_{ij} = +i sum_k rho_{ik} H_{kj}
            for (int k = 0; k < n; ++k) {
                if (k != j) {
                    gen(row, slot(i, k, n)) -= m_i * model.couplings(k, j);
                }
            }
            // -(Gamma/2) (P rho + rho P), P = |out><out|
            double sink = 0.0;
            if (i == out) sink += half_sink;
            if (j == out) sink += half_sink;
            if (sink != 0.0) {
                gen(row, row) -= sink;
            }
        }
    }
    return gen;
}

// Writes the dephasing diagonal for the given gamma. Entries are set from the
// sink contribution alone plus -4*gamma, never accumulated, so the generator
// for a given gamma is independent of evaluation history.
void apply_gamma(Eigen::MatrixXcd& gen, const NetworkModel& model, double gamma) {
    const int n = static_cast<int>(model.couplings.rows());
    const int out = model.out_site();
    const double half_sink = 0.5 * model.sink_rate;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            if (i == j) continue;
            const int k = slot(i, j, n);
            double sink = 0.0;
            if (i == out) sink += half_sink;
            if (j == out) sink += half_sink;
            gen(k, k) = Cplx(-sink - 4.0 * gamma, 0.0);
        }
    }
}

struct MomentGates {
    double residual_target = 1e-12;
    double residual_limit = 1e-8;
    double absorption_tol = 1e-6;
    int max_refinements = 3;
};

// Shared two-solve kernel with iterative refinement. A raw LU residual scales
// like eps * ||L|| * ||tau||, which for strong dephasing crosses the 1e-8
// gate on perfectly healthy systems; one or two refinement sweeps push it
// back to ~1e-12 before the gate is applied.
template <typename Solve>
double refined_solve(const Eigen::MatrixXcd& gen, const Solve& solve,
                     const Eigen::VectorXcd& rhs, Eigen::VectorXcd& x, Eigen::VectorXcd& r,
                     Eigen::VectorXcd& delta, const MomentGates& gates) {
    x = solve(rhs);
    double rhs_scale = rhs.norm();
    if (rhs_scale == 0.0) rhs_scale = 1.0;
    double rel = std::numeric_limits<double>::infinity();
    for (int pass = 0; pass <= gates.max_refinements; ++pass) {
        r.noalias() = gen * x;
        r -= rhs;
        rel = r.norm() / rhs_scale;
        if (!std::isfinite(rel) || rel <= gates.residual_target ||
            pass == gates.max_refinements) {
            break;
        }
        delta = solve(r);
        x -= delta;
    }
    return rel;
}

TransferResult solve_moments(const Eigen::MatrixXcd& gen,
                             const std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>& solve,
                             Eigen::VectorXcd& tau, Eigen::VectorXcd& sigma, Eigen::VectorXcd& r,
                             Eigen::VectorXcd& delta, const NetworkModel& model,
                             double t_max_over_T) {
    const int n = static_cast<int>(model.couplings.rows());
    const int in = model.in_site();
    const int out = model.out_site();
    const int oo = slot(out, out, n);
    const MomentGates gates;

    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n * n);
    rhs(slot(in, in, n)) = Cplx(-1.0, 0.0); // -vec(|in><in|)

    const double res1 = refined_solve(gen, solve, rhs, tau, r, delta, gates);
    rhs = -tau;
    const double res2 = refined_solve(gen, solve, rhs, sigma, r, delta, gates);

    TransferResult result;
    result.residual = std::max(res1, res2);
    result.absorption_total = model.sink_rate * tau(oo).real();
    result.transfer_time = model.sink_rate * sigma(oo).real() / model.direct_time;

    const bool finite = std::isfinite(result.residual) && std::isfinite(result.absorption_total) &&
                        std::isfinite(result.transfer_time);
    if (!finite || result.residual > gates.residual_limit ||
        std::abs(result.absorption_total - 1.0) > gates.absorption_tol ||
        !(result.transfer_time > 0.0)) {
        result.status = TransferStatus::IllConditioned;
    } else if (result.transfer_time > t_max_over_T) {
        result.status = TransferStatus::Divergent;
    } else {
        result.status = TransferStatus::Converged;
    }
    return result;
}

} // namespace

Liouvillian build_liouvillian(const NetworkModel& model, double gamma) {
    if (!(gamma >= 0.0)) {
        throw InputError("gamma must be >= 0");
    }
    Liouvillian liou;
    liou.gamma = gamma;
    liou.sink_rate = model.sink_rate;
    liou.model = model;
    liou.generator = assemble_base(model);
    apply_gamma(liou.generator, model, gamma);
    return liou;
}

TransferResult transfer_time(const Liouvillian& liouvillian, double t_max_over_T) {
    const Eigen::MatrixXcd& gen = liouvillian.generator;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(gen);
    Eigen::VectorXcd tau, sigma, r, delta;
    return solve_moments(
        gen, [&lu](const Eigen::VectorXcd& rhs) { return Eigen::VectorXcd(lu.solve(rhs)); }, tau,
        sigma, r, delta, liouvillian.model, t_max_over_T);
}

TransferResult transfer_time_eig(const Liouvillian& liouvillian, double t_max_over_T) {
    const Eigen::MatrixXcd& gen = liouvillian.generator;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(gen, true);
    if (es.info() != Eigen::Success) {
        TransferResult failed;
        failed.status = TransferStatus::IllConditioned;
        failed.residual = std::numeric_limits<double>::infinity();
        return failed;
    }
    const Eigen::MatrixXcd& v = es.eigenvectors();
    const Eigen::VectorXcd& lam = es.eigenvalues();
    Eigen::PartialPivLU<Eigen::MatrixXcd> vlu(v);
    // x = f(L) rhs with f applied to the eigenvalues; refinement is not
    // available here, so the residual gate judges the decomposition quality.
    auto solve = [&](const Eigen::VectorXcd& rhs) {
        Eigen::VectorXcd w = vlu.solve(rhs);
        w.array() /= lam.array();
        return Eigen::VectorXcd(v * w);
    };
    Eigen::VectorXcd tau, sigma, r, delta;
    return solve_moments(gen, solve, tau, sigma, r, delta, liouvillian.model, t_max_over_T);
}

TransferSolver::TransferSolver(double t_max_over_T) : t_max_over_T_(t_max_over_T) {}

void TransferSolver::set_model(const NetworkModel& model) {
    model_ = model;
    base_ = assemble_base(model);
    const int n = static_cast<int>(model.couplings.rows());
    work_.resize(n * n, n * n);
}

TransferResult TransferSolver::at_gamma(double gamma_abs) {
    work_ = base_;
    apply_gamma(work_, model_, gamma_abs);
    lu_.compute(work_);
    return solve_moments(
        work_, [this](const Eigen::VectorXcd& rhs) { return Eigen::VectorXcd(lu_.solve(rhs)); },
        tau_, sigma_, r_, delta_, model_, t_max_over_T_);
}

double purity(const ExcitedState& state) {
    const double tr = state.rho.trace().real();
    if (tr < 1e-12) {
        throw EmptyState("purity undefined: trace(rho) < 1e-12");
    }
    const double tr2 = (state.rho * state.rho).trace().real();
    return tr2 / (tr * tr);
}

EigenstateReport eigenstate_report(const NetworkModel& model, double in_threshold,
                                   double out_threshold) {
    const int n = static_cast<int>(model.couplings.rows());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.couplings);
    EigenstateReport report;
    report.rows.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        EigenstateRow row;
        row.energy = es.eigenvalues()(k);
        const double a_in = es.eigenvectors()(model.in_site(), k);
        const double a_out = es.eigenvectors()(model.out_site(), k);
        row.in_weight = a_in * a_in;
        row.out_weight = a_out * a_out;
        if (row.in_weight > in_threshold && row.out_weight < out_threshold) {
            report.in_trapped = true;
        }
        report.rows.push_back(row);
    }
    return report;
}

std::string to_csv_row(std::uint64_t seed_index, double gamma_over_Gamma,
                       const TransferResult& result) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%llu,%.17g,%.17g,%s,%.17g",
                  static_cast<unsigned long long>(seed_index), gamma_over_Gamma,
                  result.transfer_time, to_string(result.status), result.absorption_total);
    return std::string(buf);
}

} // namespace qxfer
