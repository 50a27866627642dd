#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include <Eigen/Dense>

#include "qxfer/dynamics.hpp"
#include "qxfer/errors.hpp"
#include "qxfer/network.hpp"
#include "qxfer/oracle.hpp"

using namespace qxfer;
using Cplx = std::complex<double>;

namespace {

constexpr double k_pi = std::numbers::pi;

NetworkModel dimer_model() {
    ModelParams params;
    params.n_sites = 2;
    Configuration c;
    c.positions = {Eigen::Vector3d(0, 0, 0.5), Eigen::Vector3d(0, 0, -0.5)};
    return build_model(c, params);
}

NetworkModel manual_model(const Eigen::MatrixXd& couplings, double direct_time,
                          double sink_rate) {
    NetworkModel m;
    m.couplings = couplings;
    m.direct_time = direct_time;
    m.sink_rate = sink_rate;
    m.params.n_sites = static_cast<int>(couplings.rows());
    return m;
}

NetworkModel seven_site_model(std::uint64_t seed_index) {
    ModelParams params;
    return build_model(sample_configuration(params, 21, seed_index), params);
}

} // namespace

TEST_CASE("oracle reproduces the two-site closed form to 1e-8") {
    const NetworkModel m = dimer_model();
    const Liouvillian liou = build_liouvillian(m, 0.0);

    OracleOptions opts;
    opts.trace_floor = 1e-12;
    const OracleResult r = evolve_oracle(liou, 10.0 * m.direct_time, 1e-12, opts);

    const double exact = 0.2 + 10.0 / (k_pi * k_pi);
    REQUIRE_FALSE(r.budget_exhausted);
    CHECK(std::abs(r.absorption_total - 1.0) < 1e-8);
    CHECK(std::abs(r.transfer_time - exact) / exact < 1e-8);
}

TEST_CASE("free coherence decays exactly as exp(-4 gamma t)") {
    // Couplings and sink off: every off-diagonal obeys d/dt rho_ij = -4 gamma
    // rho_ij with populations frozen.
    const double gamma = 0.6;
    const NetworkModel m = manual_model(Eigen::MatrixXd::Zero(2, 2), 1.0, 0.0);
    const Liouvillian liou = build_liouvillian(m, gamma);

    OracleOptions opts;
    opts.stop_at_t_end = true;
    opts.rho0 = Eigen::MatrixXcd::Constant(2, 2, Cplx(0.5, 0.0)); // (|0>+|1>)(<0|+<1|)/2
    const double t_end = 1.7;
    const OracleResult r = evolve_oracle(liou, t_end, 1e-12, opts);

    REQUIRE_FALSE(r.states.empty());
    const Eigen::MatrixXcd& rho = r.states.back();
    CHECK(r.times.back() == doctest::Approx(t_end).epsilon(1e-12));
    CHECK(std::abs(rho(0, 1).real() - 0.5 * std::exp(-4.0 * gamma * t_end)) < 1e-8);
    CHECK(std::abs(rho(0, 1).imag()) < 1e-10);
    CHECK(std::abs(rho(0, 0).real() - 0.5) < 1e-10);
    CHECK(std::abs(rho(1, 1).real() - 0.5) < 1e-10);
}

TEST_CASE("sink-only decay gives exponential trace and mean time 1/Gamma") {
    // Start on the sink site with no hopping: trace = exp(-Gamma t) and the
    // absorption-time distribution is exponential with mean 1/Gamma.
    const double sink = 2.5;
    const double direct_time = 0.9;
    const NetworkModel m = manual_model(Eigen::MatrixXd::Zero(2, 2), direct_time, sink);
    const Liouvillian liou = build_liouvillian(m, 0.0);

    OracleOptions opts;
    opts.trace_floor = 1e-12;
    opts.rho0 = Eigen::MatrixXcd::Zero(2, 2);
    opts.rho0(1, 1) = 1.0;
    const OracleResult r = evolve_oracle(liou, 5.0 / sink, 1e-12, opts);

    REQUIRE_FALSE(r.budget_exhausted);
    CHECK(std::abs(r.absorption_total - 1.0) < 1e-9);
    CHECK(std::abs(r.transfer_time - (1.0 / sink) / direct_time) < 1e-9);

    for (std::size_t k = 0; k < r.times.size(); ++k) {
        const double expected = std::exp(-sink * r.times[k]);
        CHECK(std::abs(r.states[k].trace().real() - expected) < 1e-9);
        CHECK(std::abs(r.states[k].trace().real() + r.ground_population[k] - 1.0) < 1e-9);
    }
}

TEST_CASE("trace bookkeeping and positivity hold along trajectories") {
    // Tolerance 1e-12 keeps accumulated local error an order below the 1e-9
    // positivity budget even on dephasing-stiff trajectories.
    const NetworkModel m = seven_site_model(42);
    for (double ratio : {0.0, 0.3, 30.0}) {
        const Liouvillian liou = build_liouvillian(m, ratio * m.sink_rate);
        const OracleResult r = evolve_oracle(liou, 3.0 * m.direct_time, 1e-12);
        REQUIRE(r.times.size() > 3);
        for (std::size_t k = 0; k < r.times.size(); ++k) {
            const double trace = r.states[k].trace().real();
            CHECK(std::abs(trace + r.ground_population[k] - 1.0) <= 1e-9);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(r.states[k]);
            CHECK(es.eigenvalues().minCoeff() >= -1e-9);
        }
    }
}

TEST_CASE("oracle matches the resolvent solver in the stiff regime") {
    const NetworkModel m = dimer_model();
    const double gamma = 1e3 * m.sink_rate;
    const Liouvillian liou = build_liouvillian(m, gamma);

    const TransferResult solver = transfer_time(liou);
    REQUIRE(solver.status == TransferStatus::Converged);

    const OracleResult oracle = evolve_oracle(liou, 10.0 * m.direct_time, 1e-10);
    REQUIRE_FALSE(oracle.budget_exhausted);
    CHECK(oracle.used_exponential);
    CHECK(std::abs(solver.transfer_time - oracle.transfer_time) / oracle.transfer_time <= 1e-6);
}

TEST_CASE("explicit and exponential paths agree with each other") {
    const NetworkModel m = seven_site_model(8);
    const Liouvillian liou = build_liouvillian(m, 0.5 * m.sink_rate);

    // The trace floor bounds the truncated moment tail; 1e-12 keeps it well
    // below the 1e-9 agreement requirement.
    OracleOptions explicit_only;
    explicit_only.explicit_step_limit = 1000000000;
    explicit_only.trace_floor = 1e-12;
    const OracleResult a = evolve_oracle(liou, 5.0 * m.direct_time, 1e-12, explicit_only);
    REQUIRE_FALSE(a.used_exponential);
    REQUIRE_FALSE(a.budget_exhausted);

    OracleOptions exp_only;
    exp_only.explicit_step_limit = 0;
    exp_only.trace_floor = 1e-12;
    const OracleResult b = evolve_oracle(liou, 5.0 * m.direct_time, 1e-12, exp_only);
    REQUIRE(b.used_exponential);
    REQUIRE_FALSE(b.budget_exhausted);

    CHECK(std::abs(a.transfer_time - b.transfer_time) / b.transfer_time < 1e-9);
    CHECK(std::abs(a.absorption_total - b.absorption_total) < 1e-9);
}

TEST_CASE("exhausted budgets are reported, not hidden") {
    const NetworkModel m = seven_site_model(9);
    const Liouvillian liou = build_liouvillian(m, 0.0);

    OracleOptions opts;
    opts.explicit_step_limit = 10;
    opts.max_exp_steps = 0;
    const OracleResult r = evolve_oracle(liou, 50.0 * m.direct_time, 1e-10, opts);
    CHECK(r.budget_exhausted);
    // Partial results stay bookkeeping-consistent: whatever left the excited
    // block so far must be accounted for in the absorbed weight.
    CHECK(std::abs(r.trace_final + r.absorption_total - 1.0) < 1e-8);
}

TEST_CASE("snapshot decimation respects the cap and keeps endpoints") {
    const NetworkModel m = seven_site_model(10);
    const Liouvillian liou = build_liouvillian(m, 0.0);

    OracleOptions opts;
    opts.max_snapshots = 64;
    opts.stop_at_t_end = true;
    const OracleResult r = evolve_oracle(liou, 4.0 * m.direct_time, 1e-10, opts);
    REQUIRE(r.times.size() >= 2);
    CHECK(r.times.size() <= 64);
    CHECK(r.times.front() == 0.0);
    CHECK(r.times.back() == doctest::Approx(4.0 * m.direct_time).epsilon(1e-12));
    for (std::size_t k = 1; k < r.times.size(); ++k) {
        CHECK(r.times[k] > r.times[k - 1]);
    }
}
