#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "qxfer/dynamics.hpp"
#include "qxfer/errors.hpp"
#include "qxfer/landscape.hpp"
#include "qxfer/network.hpp"
#include "qxfer/optimizer.hpp"

using namespace qxfer;

namespace {

constexpr double k_two_site_value = 0.2 + 10.0 / (std::numbers::pi * std::numbers::pi);

bool feasible(const Configuration& c, const ModelParams& params) {
    if ((c.positions.front() - Eigen::Vector3d(0, 0, params.sphere_radius)).norm() != 0.0) {
        return false;
    }
    if ((c.positions.back() - Eigen::Vector3d(0, 0, -params.sphere_radius)).norm() != 0.0) {
        return false;
    }
    for (std::size_t i = 1; i + 1 < c.positions.size(); ++i) {
        if (!(c.positions[i].norm() < params.sphere_radius)) {
            return false;
        }
    }
    for (std::size_t i = 0; i < c.positions.size(); ++i) {
        for (std::size_t j = i + 1; j < c.positions.size(); ++j) {
            if ((c.positions[i] - c.positions[j]).norm() < params.min_separation) {
                return false;
            }
        }
    }
    return true;
}

} // namespace

TEST_CASE("two-site optimization returns the bare dimer value") {
    ModelParams params;
    params.n_sites = 2;
    const OptimizationResult r = optimize_gamma0(params, 1, 4, 200);
    CHECK(r.restarts_used == 1);
    CHECK(r.best_T == doctest::Approx(k_two_site_value).epsilon(1e-12));
    CHECK(r.best_config.positions.size() == 2);
}

TEST_CASE("transfer time is invariant under rotations about the pole axis") {
    ModelParams params;
    const Configuration c = sample_configuration(params, 5, 2);
    const double angle = 1.234;
    Configuration rotated = c;
    const Eigen::Matrix3d rot =
        Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    for (std::size_t i = 1; i + 1 < rotated.positions.size(); ++i) {
        rotated.positions[i] = rot * rotated.positions[i];
    }

    const TransferResult a = transfer_time(build_liouvillian(build_model(c, params), 0.0));
    const TransferResult b = transfer_time(build_liouvillian(build_model(rotated, params), 0.0));
    REQUIRE(a.status == TransferStatus::Converged);
    REQUIRE(b.status == TransferStatus::Converged);
    CHECK(std::abs(a.transfer_time - b.transfer_time) / a.transfer_time < 1e-9);
}

TEST_CASE("optimization is deterministic and independent of workers") {
    ModelParams params;
    params.n_sites = 4;
    const OptimizationResult a = optimize_gamma0(params, 9, 6, 400, 1);
    const OptimizationResult b = optimize_gamma0(params, 9, 6, 400, 3);
    CHECK(a.best_T == b.best_T);
    REQUIRE(a.best_config.positions.size() == b.best_config.positions.size());
    for (std::size_t i = 0; i < a.best_config.positions.size(); ++i) {
        CHECK((a.best_config.positions[i] - b.best_config.positions[i]).norm() == 0.0);
    }
    CHECK(a.trace == b.trace);
}

TEST_CASE("optimizer output is feasible and better than the sampled starts") {
    ModelParams params;
    params.n_sites = 5;
    const OptimizationResult r = optimize_gamma0(params, 3, 8, 2000);
    CHECK(feasible(r.best_config, params));
    CHECK(r.restarts_used == 8);

    // The reported value re-evaluates cleanly.
    const NetworkModel m = build_model(r.best_config, params);
    const TransferResult check = transfer_time(build_liouvillian(m, 0.0));
    REQUIRE(check.status == TransferStatus::Converged);
    CHECK(check.transfer_time == doctest::Approx(r.best_T).epsilon(1e-12));

    // Optimized networks beat the bare dimer.
    CHECK(r.best_T < k_two_site_value);
}

TEST_CASE("the running best is monotone non-increasing") {
    ModelParams params;
    params.n_sites = 4;
    const OptimizationResult r = optimize_gamma0(params, 2, 2, 500);
    REQUIRE_FALSE(r.trace.empty());
    for (std::size_t i = 1; i < r.trace.size(); ++i) {
        CHECK(r.trace[i] <= r.trace[i - 1]);
    }
    CHECK(r.trace.back() == doctest::Approx(r.best_T).epsilon(1e-12));
}

TEST_CASE("a collinear relay chain sits at the equilibration limit") {
    // Five intermediates evenly spaced on the axis couple so strongly that
    // the excitation equilibrates across all n sites, so the sink drains
    // rho_out,out ~ 1/n and the transfer time is n/Gamma = (n/10) T. This
    // beats the bare dimer and bounds what the optimizer must improve on.
    ModelParams params;
    Configuration chain;
    chain.positions.push_back(Eigen::Vector3d(0, 0, 0.5));
    for (int k = 1; k <= 5; ++k) {
        chain.positions.push_back(Eigen::Vector3d(0, 0, 0.5 - k / 6.0));
    }
    chain.positions.push_back(Eigen::Vector3d(0, 0, -0.5));

    const NetworkModel m = build_model(chain, params);
    const TransferResult r = transfer_time(build_liouvillian(m, 0.0));
    REQUIRE(r.status == TransferStatus::Converged);
    CHECK(r.transfer_time == doctest::Approx(0.7).epsilon(0.02));
    CHECK(r.transfer_time < k_two_site_value);
}

TEST_CASE("no converged evaluation raises a solver error") {
    ModelParams params;
    params.n_sites = 4;
    // A vanishing sink makes every transfer time exceed the divergence cap.
    params.sink_rate_multiplier = 1e-7;
    CHECK_THROWS_AS((void)optimize_gamma0(params, 1, 1, 100), NoConvergedEvaluation);
}

TEST_CASE("optimizer argument validation") {
    ModelParams params;
    CHECK_THROWS_AS((void)optimize_gamma0(params, 1, 0, 1000), UsageError);
    CHECK_THROWS_AS((void)optimize_gamma0(params, 1, 4, 99), UsageError);
}

TEST_CASE("sweep of an optimized configuration is finite and Zeno-limited") {
    ModelParams params;
    params.n_sites = 4;
    const OptimizationResult r = optimize_gamma0(params, 11, 4, 1500);
    const GammaGrid grid = make_gamma_grid({1e-4, 1e3, 15});
    const SweepCurve curve = sweep_optimized(r, grid);

    REQUIRE(curve.gamma_over_Gamma.size() == 15);
    REQUIRE(curve.t_over_T.size() == 15);
    for (std::size_t g = 0; g < curve.t_over_T.size(); ++g) {
        REQUIRE(curve.status[g] == TransferStatus::Converged);
        CHECK(std::isfinite(curve.t_over_T[g]));
    }
    // The small-gamma end reproduces the optimized value.
    CHECK(curve.t_over_T.front() == doctest::Approx(r.best_T).epsilon(1e-2));
    // The strong-dephasing end grows linearly: doubling gamma doubles T.
    const std::size_t last = curve.t_over_T.size() - 1;
    const double ratio = curve.gamma_over_Gamma[last] / curve.gamma_over_Gamma[last - 1];
    CHECK(curve.t_over_T[last] / curve.t_over_T[last - 1] ==
          doctest::Approx(ratio).epsilon(0.10));

    // sweep_configuration with the same inputs is the same curve.
    const SweepCurve direct = sweep_configuration(r.best_config, params, grid);
    CHECK(direct.t_over_T == curve.t_over_T);
}
