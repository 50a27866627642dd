#include "qxfer/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qxfer/errors.hpp"
#include "qxfer/parallel.hpp"
#include "qxfer/rng.hpp"

namespace qxfer {

namespace {

constexpr double k_penalty_weight = 100.0;
constexpr int k_repair_rounds = 64;

// One candidate evaluation: ball projection, separation repair, solve.
class Objective {
public:
    Objective(const ModelParams& params, double t_max_over_T)
        : params_(params), t_max_(t_max_over_T), solver_(t_max_over_T) {
        n_free_ = params.n_sites - 2;
        config_.seed_index = 0;
        config_.positions.resize(static_cast<std::size_t>(params.n_sites));
        config_.positions.front() = Eigen::Vector3d(0.0, 0.0, +params.sphere_radius);
        config_.positions.back() = Eigen::Vector3d(0.0, 0.0, -params.sphere_radius);
    }

    int dims() const { return 3 * n_free_; }

    // Returns the search objective (value + penalty). Fills `value` with the
    // penalty-free transfer time and `feasible_converged` with whether the
    // repaired candidate produced a Converged solve; the repaired feasible
    // positions stay in config() for the caller to copy when it improves.
    double evaluate(const Eigen::VectorXd& x, double& value, bool& feasible_converged) {
        const double r_eff = params_.sphere_radius * (1.0 - 1e-9);
        for (int i = 0; i < n_free_; ++i) {
            Eigen::Vector3d p(x(3 * i), x(3 * i + 1), x(3 * i + 2));
            const double norm = p.norm();
            if (norm > r_eff) {
                p *= r_eff / norm; // hard projection onto the open ball
            }
            config_.positions[static_cast<std::size_t>(i + 1)] = p;
        }

        // Smooth penalty on the pre-repair separation violation.
        double penalty = 0.0;
        const double min_sep = params_.min_separation;
        const int n = params_.n_sites;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                const double d = (config_.positions[static_cast<std::size_t>(i)] -
                                  config_.positions[static_cast<std::size_t>(j)])
                                     .norm();
                if (d < min_sep) {
                    const double q = (min_sep - d) / min_sep;
                    penalty += k_penalty_weight * q * q;
                }
            }
        }

        value = t_max_;
        feasible_converged = false;
        if (!repair_separation()) {
            return t_max_ + penalty;
        }

        NetworkModel model;
        try {
            model = build_model(config_, params_);
        } catch (const InputError&) {
            return t_max_ + penalty;
        }
        solver_.set_model(model);
        const TransferResult result = solver_.at_gamma(0.0);
        if (result.status == TransferStatus::Converged) {
            value = result.transfer_time;
            feasible_converged = true;
        }
        return value + penalty;
    }

    const Configuration& config() const { return config_; }

private:
    // Deterministic push-apart loop; poles never move. Returns false when the
    // rounds are exhausted with a violation left.
    bool repair_separation() {
        const double min_sep = params_.min_separation;
        const double target = min_sep * (1.0 + 1e-6);
        const double r_eff = params_.sphere_radius * (1.0 - 1e-9);
        const int n = params_.n_sites;
        for (int round = 0; round < k_repair_rounds; ++round) {
            bool dirty = false;
            for (int i = 0; i < n; ++i) {
                for (int j = i + 1; j < n; ++j) {
                    const bool i_fixed = (i == 0 || i == n - 1);
                    const bool j_fixed = (j == 0 || j == n - 1);
                    if (i_fixed && j_fixed) continue;
                    Eigen::Vector3d& a = config_.positions[static_cast<std::size_t>(i)];
                    Eigen::Vector3d& b = config_.positions[static_cast<std::size_t>(j)];
                    Eigen::Vector3d diff = b - a;
                    double d = diff.norm();
                    if (d >= min_sep) continue;
                    dirty = true;
                    Eigen::Vector3d axis;
                    if (d < 1e-12) {
                        // Coincident points: separate along z, alternating by
                        // site index so repeated collisions resolve.
                        axis = Eigen::Vector3d(0.0, 0.0, (i + j) % 2 == 0 ? 1.0 : -1.0);
                    } else {
                        axis = diff / d;
                    }
                    const double push = target - d;
                    if (i_fixed) {
                        b += push * axis;
                    } else if (j_fixed) {
                        a -= push * axis;
                    } else {
                        a -= 0.5 * push * axis;
                        b += 0.5 * push * axis;
                    }
                    for (int k : {i, j}) {
                        if (k == 0 || k == n - 1) continue;
                        Eigen::Vector3d& p = config_.positions[static_cast<std::size_t>(k)];
                        const double norm = p.norm();
                        if (norm > r_eff) p *= r_eff / norm;
                    }
                }
            }
            if (!dirty) return true;
        }
        // Final verification after the last round.
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if ((config_.positions[static_cast<std::size_t>(i)] -
                     config_.positions[static_cast<std::size_t>(j)])
                        .norm() < min_sep) {
                    return false;
                }
            }
        }
        return true;
    }

    ModelParams params_;
    double t_max_;
    TransferSolver solver_;
    int n_free_ = 0;
    Configuration config_;
};

struct RestartOutcome {
    double best_value = std::numeric_limits<double>::infinity();
    Configuration best_config;
    std::vector<double> trace;
    bool any_converged = false;
};

// Standard Nelder-Mead with reflection 1, expansion 2, contraction 0.5,
// shrink 0.5. The budget counts objective evaluations.
RestartOutcome run_restart(const ModelParams& params, std::uint64_t master_seed,
                           int restart_index, std::int64_t budget) {
    Objective objective(params, k_t_max_over_T);
    const int dims = objective.dims();

    std::mt19937_64 stream =
        derive_stream(master_seed, StreamDomain::OptimizerRestart,
                      static_cast<std::uint64_t>(restart_index));
    Configuration start = sample_configuration(params, stream,
                                               static_cast<std::uint64_t>(restart_index));

    RestartOutcome outcome;
    std::int64_t evals = 0;

    auto eval = [&](const Eigen::VectorXd& x) {
        double value = 0.0;
        bool converged = false;
        const double f = objective.evaluate(x, value, converged);
        ++evals;
        if (converged) {
            outcome.any_converged = true;
            if (value < outcome.best_value) {
                outcome.best_value = value;
                outcome.best_config = objective.config();
                outcome.best_config.seed_index = static_cast<std::uint64_t>(restart_index);
            }
        }
        return f;
    };

    Eigen::VectorXd x0(dims);
    for (int i = 0; i < dims / 3; ++i) {
        const Eigen::Vector3d& p = start.positions[static_cast<std::size_t>(i + 1)];
        x0.segment<3>(3 * i) = p;
    }

    const int np = dims + 1;
    std::vector<Eigen::VectorXd> simplex(static_cast<std::size_t>(np), x0);
    std::vector<double> f(static_cast<std::size_t>(np));
    const double step = 0.1 * params.sphere_radius;
    for (int k = 1; k < np; ++k) {
        simplex[static_cast<std::size_t>(k)](k - 1) += step;
    }
    for (int k = 0; k < np && evals < budget; ++k) {
        f[static_cast<std::size_t>(k)] = eval(simplex[static_cast<std::size_t>(k)]);
    }
    outcome.trace.push_back(outcome.best_value);

    std::vector<int> order(static_cast<std::size_t>(np));
    Eigen::VectorXd centroid(dims), xr(dims), xe(dims), xc(dims);
    while (evals < budget) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return f[static_cast<std::size_t>(a)] <
                                                    f[static_cast<std::size_t>(b)]; });
        const int best = order.front();
        const int worst = order.back();
        const int second_worst = order[static_cast<std::size_t>(np - 2)];

        const double f_spread = f[static_cast<std::size_t>(worst)] -
                                f[static_cast<std::size_t>(best)];
        if (f_spread <= 1e-12 * (1.0 + std::abs(f[static_cast<std::size_t>(best)]))) {
            break;
        }

        centroid.setZero();
        for (int k = 0; k < np; ++k) {
            if (k != worst) centroid += simplex[static_cast<std::size_t>(k)];
        }
        centroid /= static_cast<double>(np - 1);

        xr = centroid + (centroid - simplex[static_cast<std::size_t>(worst)]);
        const double fr = eval(xr);
        if (fr < f[static_cast<std::size_t>(best)]) {
            xe = centroid + 2.0 * (centroid - simplex[static_cast<std::size_t>(worst)]);
            const double fe = (evals < budget) ? eval(xe) : fr;
            if (fe < fr) {
                simplex[static_cast<std::size_t>(worst)] = xe;
                f[static_cast<std::size_t>(worst)] = fe;
            } else {
                simplex[static_cast<std::size_t>(worst)] = xr;
                f[static_cast<std::size_t>(worst)] = fr;
            }
        } else if (fr < f[static_cast<std::size_t>(second_worst)]) {
            simplex[static_cast<std::size_t>(worst)] = xr;
            f[static_cast<std::size_t>(worst)] = fr;
        } else {
            const bool outside = fr < f[static_cast<std::size_t>(worst)];
            const Eigen::VectorXd& anchor =
                outside ? xr : simplex[static_cast<std::size_t>(worst)];
            xc = centroid + 0.5 * (anchor - centroid);
            const double fc = (evals < budget) ? eval(xc) : fr;
            if (fc < std::min(fr, f[static_cast<std::size_t>(worst)])) {
                simplex[static_cast<std::size_t>(worst)] = xc;
                f[static_cast<std::size_t>(worst)] = fc;
            } else {
                // Shrink toward the best vertex.
                for (int k = 0; k < np; ++k) {
                    if (k == best) continue;
                    simplex[static_cast<std::size_t>(k)] =
                        simplex[static_cast<std::size_t>(best)] +
                        0.5 * (simplex[static_cast<std::size_t>(k)] -
                               simplex[static_cast<std::size_t>(best)]);
                    if (evals >= budget) break;
                    f[static_cast<std::size_t>(k)] = eval(simplex[static_cast<std::size_t>(k)]);
                }
            }
        }
        outcome.trace.push_back(outcome.best_value);
    }
    return outcome;
}

} // namespace

OptimizationResult optimize_gamma0(const ModelParams& params, std::uint64_t master_seed,
                                   int restarts, std::int64_t budget, int workers) {
    params.validate();
    if (restarts < 1) {
        throw UsageError("restarts must be >= 1");
    }
    if (budget < 100) {
        throw UsageError("budget must be >= 100 evaluations");
    }

    OptimizationResult result;
    result.params = params;

    if (params.n_sites == 2) {
        // No free coordinates: evaluate the bare dimer once.
        Objective objective(params, k_t_max_over_T);
        double value = 0.0;
        bool converged = false;
        objective.evaluate(Eigen::VectorXd::Zero(0), value, converged);
        if (!converged) {
            throw NoConvergedEvaluation("the two-site evaluation did not converge");
        }
        result.best_config = objective.config();
        result.best_T = value;
        result.trace = {value};
        result.restarts_used = 1;
        return result;
    }

    std::vector<RestartOutcome> outcomes(static_cast<std::size_t>(restarts));
    parallel_for_indexed(
        restarts, workers,
        [&](std::int64_t restart_index, int) {
            outcomes[static_cast<std::size_t>(restart_index)] =
                run_restart(params, master_seed, static_cast<int>(restart_index), budget);
        },
        /*chunk=*/1);

    int winner = -1;
    bool any_converged = false;
    for (int k = 0; k < restarts; ++k) {
        const RestartOutcome& outcome = outcomes[static_cast<std::size_t>(k)];
        any_converged = any_converged || outcome.any_converged;
        if (winner < 0 ||
            outcome.best_value < outcomes[static_cast<std::size_t>(winner)].best_value) {
            winner = k; // strict comparison: ties keep the lowest restart index
        }
    }
    if (!any_converged) {
        throw NoConvergedEvaluation("every evaluation in every restart failed to converge");
    }

    const RestartOutcome& best = outcomes[static_cast<std::size_t>(winner)];
    result.best_config = best.best_config;
    result.best_T = best.best_value;
    result.trace = best.trace;
    result.restarts_used = restarts;
    return result;
}

SweepCurve sweep_configuration(const Configuration& config, const ModelParams& params,
                               const GammaGrid& grid) {
    const NetworkModel model = build_model(config, params);
    TransferSolver solver;
    solver.set_model(model);

    SweepCurve curve;
    curve.gamma_over_Gamma = grid.values;
    curve.t_over_T.reserve(grid.values.size());
    curve.status.reserve(grid.values.size());
    for (double ratio : grid.values) {
        const TransferResult result = solver.at_gamma(ratio * model.sink_rate);
        curve.status.push_back(result.status);
        curve.t_over_T.push_back(result.status == TransferStatus::Converged
                                     ? result.transfer_time
                                     : std::numeric_limits<double>::quiet_NaN());
    }
    return curve;
}

SweepCurve sweep_optimized(const OptimizationResult& result, const GammaGrid& grid) {
    return sweep_configuration(result.best_config, result.params, grid);
}

} // namespace qxfer
