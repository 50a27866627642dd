#include "qxfer/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <utility>

#include <unsupported/Eigen/MatrixFunctions>

#include "qxfer/errors.hpp"

namespace qxfer {

namespace {

using Cplx = std::complex<double>;

// Dormand-Prince 5(4) coefficients, FSAL form.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                 b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
// 5th-minus-4th order weights for the embedded error estimate.
constexpr double e1 = b1 - 5179.0 / 57600.0, e3 = b3 - 7571.0 / 16695.0,
                 e4 = b4 - 393.0 / 640.0, e5 = b5 + 92097.0 / 339200.0,
                 e6 = b6 - 187.0 / 2100.0, e7 = -1.0 / 40.0;

// Master-equation right-hand side on the packed real state
// y = [populations(n), (Re, Im) of upper coherences(2 * n(n-1)/2), m0, m2],
// computed in matrix form from (H, Gamma, gamma) alone.
class OracleRhs {
public:
    OracleRhs(const NetworkModel& model, double gamma)
        : n_(static_cast<int>(model.couplings.rows())),
          out_(model.out_site()),
          gamma4_(4.0 * gamma),
          half_sink_(0.5 * model.sink_rate),
          h_cplx_(model.couplings.cast<Cplx>()) {
        for (int i = 0; i < n_; ++i) {
            for (int j = i + 1; j < n_; ++j) {
                pairs_.emplace_back(i, j);
            }
        }
        rho_.resize(n_, n_);
        prod_.resize(n_, n_);
        dot_.resize(n_, n_);
    }

    int dim() const { return n_ * n_ + 2; }
    int m0_slot() const { return dim() - 2; }
    int m2_slot() const { return dim() - 1; }

    void unpack(const Eigen::VectorXd& y, Eigen::MatrixXcd& rho) const {
        for (int i = 0; i < n_; ++i) {
            rho(i, i) = Cplx(y(i), 0.0);
        }
        int k = n_;
        for (const auto& [i, j] : pairs_) {
            rho(i, j) = Cplx(y(k), y(k + 1));
            rho(j, i) = std::conj(rho(i, j));
            k += 2;
        }
    }

    void pack(const Eigen::MatrixXcd& rho, Eigen::VectorXd& y) const {
        for (int i = 0; i < n_; ++i) {
            y(i) = rho(i, i).real();
        }
        int k = n_;
        for (const auto& [i, j] : pairs_) {
            y(k) = rho(i, j).real();
            y(k + 1) = rho(i, j).imag();
            k += 2;
        }
    }

    void operator()(const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
        unpack(y, rho_);
        // -i [H, rho] with rho Hermitian and H real symmetric:
        // rho H = (H rho)^dagger, so the commutator is prod - prod^dagger.
        prod_.noalias() = h_cplx_ * rho_;
        dot_ = Cplx(0.0, -1.0) * (prod_ - prod_.adjoint().eval());
        // Sink anticommutator on the out row and column.
        dot_.row(out_) -= half_sink_ * rho_.row(out_);
        dot_.col(out_) -= half_sink_ * rho_.col(out_);
        // Dephasing damps every off-diagonal element, diagonals untouched.
        if (gamma4_ != 0.0) {
            for (const auto& [i, j] : pairs_) {
                dot_(i, j) -= gamma4_ * rho_(i, j);
                dot_(j, i) -= gamma4_ * rho_(j, i);
            }
        }
        pack(dot_, dy);
        dy(m0_slot()) = y(out_);      // d m0 / dt = rho_out,out
        dy(m2_slot()) = y(m0_slot()); // d m2 / dt = m0
    }

    double trace(const Eigen::VectorXd& y) const { return y.head(n_).sum(); }

    // Dense matrix of this linear right-hand side, built by applying it to
    // basis vectors; used only by the exponential path.
    Eigen::MatrixXd dense_matrix() {
        const int m = dim();
        Eigen::MatrixXd a(m, m);
        Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
        Eigen::VectorXd col(m);
        for (int k = 0; k < m; ++k) {
            e(k) = 1.0;
            (*this)(e, col);
            a.col(k) = col;
            e(k) = 0.0;
        }
        return a;
    }

    int n() const { return n_; }

private:
    int n_;
    int out_;
    double gamma4_;
    double half_sink_;
    Eigen::MatrixXcd h_cplx_;
    std::vector<std::pair<int, int>> pairs_;
    Eigen::MatrixXcd rho_, prod_, dot_;
};

struct SnapshotLog {
    std::size_t cap;
    std::int64_t stride = 1;
    std::int64_t since_last = 0;
    std::vector<double> times;
    std::vector<Eigen::VectorXd> packed;
    std::vector<double> m0_abs; // cumulative integral of rho_out,out at `times`

    explicit SnapshotLog(std::size_t cap_) : cap(cap_) {}

    void record(double t, const Eigen::VectorXd& y, double m0, bool force = false) {
        ++since_last;
        if (!force && since_last < stride) {
            return;
        }
        since_last = 0;
        times.push_back(t);
        packed.push_back(y);
        m0_abs.push_back(m0);
        if (times.size() >= cap) {
            // Halve the kept history and double the stride.
            std::size_t w = 0;
            for (std::size_t r = 0; r < times.size(); r += 2, ++w) {
                times[w] = times[r];
                packed[w] = std::move(packed[r]);
                m0_abs[w] = m0_abs[r];
            }
            times.resize(w);
            packed.resize(w);
            m0_abs.resize(w);
            stride *= 2;
        }
    }

    void drop_last() {
        times.pop_back();
        packed.pop_back();
        m0_abs.pop_back();
    }
};

// Scaled RMS error norm of the embedded pair.
double error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& y0,
                  const Eigen::VectorXd& y1, double tol) {
    double acc = 0.0;
    const int m = static_cast<int>(err.size());
    for (int i = 0; i < m; ++i) {
        const double sk = tol + tol * std::max(std::abs(y0(i)), std::abs(y1(i)));
        const double q = err(i) / sk;
        acc += q * q;
    }
    return std::sqrt(acc / m);
}

} // namespace

OracleResult evolve_oracle(const Liouvillian& liouvillian, double t_end, double tolerance,
                           const OracleOptions& options) {
    if (!(t_end > 0.0)) {
        throw InputError("evolve_oracle: t_end must be > 0");
    }
    if (!(tolerance > 0.0)) {
        throw InputError("evolve_oracle: tolerance must be > 0");
    }
    const NetworkModel& model = liouvillian.model;
    const int n = static_cast<int>(model.couplings.rows());
    OracleRhs rhs(model, liouvillian.gamma);
    const int m = rhs.dim();
    const int m0s = rhs.m0_slot();
    const int m2s = rhs.m2_slot();

    Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
    if (options.rho0.size() != 0) {
        if (options.rho0.rows() != n || options.rho0.cols() != n) {
            throw InputError("evolve_oracle: rho0 has wrong dimensions");
        }
        rhs.pack(options.rho0, y);
    } else {
        y(model.in_site()) = 1.0;
    }

    const double sink = model.sink_rate;
    const double t_giveup =
        options.t_giveup_factor * std::max(t_end, sink > 0.0 ? 1.0 / sink : t_end);

    SnapshotLog log(std::max<std::size_t>(options.max_snapshots, 8));

    OracleResult result;
    double t = 0.0;
    double m0_abs = 0.0;
    double m1_abs = 0.0;
    log.record(0.0, y, m0_abs, true);

    // Fold the moment slots accumulated over one step into the running
    // totals and reset them. Keeping the slots local to a step bounds the
    // integration-by-parts identity t*m0 - m2 to a single step, so the
    // first moment never suffers large-t cancellation.
    auto harvest = [&](double t_new) {
        const double m0_loc = y(m0s);
        m0_abs += m0_loc;
        m1_abs += t_new * m0_loc - y(m2s);
        y(m0s) = 0.0;
        y(m2s) = 0.0;
    };

    auto finished = [&](double t_now) {
        if (options.stop_at_t_end) {
            return t_now >= t_end * (1.0 - 1e-14);
        }
        return t_now >= t_end && rhs.trace(y) < options.trace_floor;
    };

    if (options.explicit_step_limit > 0) {
        double h_row_max = 0.0;
        for (int i = 0; i < n; ++i) {
            h_row_max = std::max(h_row_max, model.couplings.row(i).cwiseAbs().sum());
        }
        const double rate_total = 2.0 * h_row_max + sink + 4.0 * liouvillian.gamma;
        double h = 1e-3 / std::max(rate_total, 1e-300);
        h = std::min(h, t_end);

        Eigen::VectorXd k1(m), k2(m), k3(m), k4(m), k5(m), k6(m), k7(m), ytmp(m), ynew(m),
            yerr(m);
        bool fsal_valid = false;
        std::int64_t attempts = 0;
        bool rejected_last = false;

        while (!finished(t) && attempts < options.explicit_step_limit && t < t_giveup) {
            ++attempts;
            if (options.stop_at_t_end && t + h > t_end) {
                h = t_end - t; // k1 stays valid; only h shrank
            }
            if (!fsal_valid) {
                rhs(y, k1);
                fsal_valid = true;
            }
            ytmp = y + h * (a21 * k1);
            rhs(ytmp, k2);
            ytmp = y + h * (a31 * k1 + a32 * k2);
            rhs(ytmp, k3);
            ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
            rhs(ytmp, k4);
            ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
            rhs(ytmp, k5);
            ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
            rhs(ytmp, k6);
            ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            rhs(ynew, k7);
            yerr = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

            const double err = error_norm(yerr, y, ynew, tolerance);
            if (err <= 1.0) {
                t += h;
                y.swap(ynew);
                harvest(t);
                k1.swap(k7); // FSAL
                // The swapped-in derivative was evaluated before the moment
                // reset; only the m2 component depends on the m0 slot.
                k1(m2s) = 0.0;
                ++result.steps_explicit;
                log.record(t, y, m0_abs);
                const double grow = rejected_last ? 1.0 : 5.0;
                h *= std::clamp(0.9 * std::pow(std::max(err, 1e-10), -0.2), 0.2, grow);
                rejected_last = false;
            } else {
                h *= std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0);
                rejected_last = true;
                fsal_valid = true; // k1 still holds f(y)
            }
        }
    }

    if (!finished(t) && t < t_giveup) {
        // Exponential propagation: e^(A h) steps with ||A||_1 * h capped so
        // the scaling-and-squaring roundoff inside expm stays well under the
        // conservation tolerances. The step doubles until it hits the cap
        // and the propagator is recomputed only when the step changes, so a
        // long tail costs one matrix-vector product per step.
        const Eigen::MatrixXd a = rhs.dense_matrix();
        const double anorm = std::max(a.cwiseAbs().colwise().sum().maxCoeff(), 1e-300);
        const double h_cap = options.exp_norm_cap / anorm;
        double h = std::min(1e-3 / anorm, h_cap);

        // trace + Gamma * m0 is conserved exactly by the generator; project
        // the propagator back onto that invariant to stop expm roundoff from
        // accumulating over reused steps. The gate keeps the repair honest:
        // a defect beyond roundoff scale is left in place to be caught.
        Eigen::RowVectorXd cons = Eigen::RowVectorXd::Zero(m);
        cons.head(n).setOnes();
        cons(m0s) = sink;
        const double cons2 = cons.squaredNorm();

        Eigen::MatrixXd propagator;
        Eigen::VectorXd ynext(m);
        double h_cached = -1.0;

        while (!finished(t) && result.steps_exponential < options.max_exp_steps &&
               t < t_giveup) {
            double step = h;
            if (options.stop_at_t_end) {
                step = std::min(step, t_end - t);
            }
            if (step != h_cached) {
                propagator = (a * step).exp();
                const Eigen::RowVectorXd defect = cons * propagator - cons;
                if (defect.cwiseAbs().maxCoeff() <= 1e-8) {
                    propagator.noalias() -= cons.transpose() * defect / cons2;
                }
                h_cached = step;
            }
            ynext.noalias() = propagator * y;
            y.swap(ynext);
            t += step;
            harvest(t);
            ++result.steps_exponential;
            log.record(t, y, m0_abs);
            h = std::min(2.0 * h, h_cap);
        }
        result.used_exponential = result.steps_exponential > 0;
    }

    if (!finished(t)) {
        result.budget_exhausted = true;
    }

    log.record(t, y, m0_abs, true);
    if (log.times.size() >= 2 && log.times[log.times.size() - 1] == log.times[log.times.size() - 2]) {
        log.drop_last();
    }

    // Unpack snapshots and moments.
    result.times = std::move(log.times);
    result.states.reserve(log.packed.size());
    for (std::size_t k = 0; k < log.packed.size(); ++k) {
        Eigen::MatrixXcd rho(n, n);
        rhs.unpack(log.packed[k], rho);
        result.states.push_back(std::move(rho));
        result.ground_population.push_back(sink * log.m0_abs[k]);
    }

    result.t_final = t;
    result.trace_final = rhs.trace(y);
    result.m0 = m0_abs;
    result.m1 = m1_abs;
    result.absorption_total = sink * m0_abs;
    result.transfer_time = sink * m1_abs / model.direct_time;
    return result;
}

} // namespace qxfer
