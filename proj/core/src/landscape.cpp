#include "qxfer/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qxfer/errors.hpp"
#include "qxfer/parallel.hpp"
#include "qxfer/rng.hpp"

namespace qxfer {

GammaGrid make_gamma_grid(const GammaGridSpec& spec) {
    if (!(spec.min > 0.0) || !(spec.max > spec.min) || spec.steps < 2) {
        throw BadSpec("gamma grid requires 0 < min < max and steps >= 2");
    }
    GammaGrid grid;
    grid.spec = spec;
    grid.values.resize(static_cast<std::size_t>(spec.steps));
    const double log_min = std::log(spec.min);
    const double log_max = std::log(spec.max);
    for (int k = 0; k < spec.steps; ++k) {
        const double f = static_cast<double>(k) / (spec.steps - 1);
        grid.values[static_cast<std::size_t>(k)] = std::exp(log_min + f * (log_max - log_min));
    }
    // Pin the endpoints exactly; the interior stays geometric to roundoff.
    grid.values.front() = spec.min;
    grid.values.back() = spec.max;
    return grid;
}

Landscape::Landscape(const GammaGrid& grid, const HistSpec& hist_spec)
    : gamma_grid(grid), hist(hist_spec) {
    if (hist.bins < 1 || !(hist.log10_max > hist.log10_min)) {
        throw BadSpec("histogram requires bins >= 1 and log10_max > log10_min");
    }
    const std::size_t cols = grid.values.size();
    counts.assign(cols * static_cast<std::size_t>(hist.bins), 0);
    overflow.assign(cols, 0);
    clamped_low.assign(cols, 0);
    clamped_high.assign(cols, 0);
    coherent.assign(cols, 0);
    min_t.assign(cols, std::numeric_limits<double>::infinity());
}

void Landscape::record(int gamma_index, const TransferResult& result) {
    const std::size_t g = static_cast<std::size_t>(gamma_index);
    if (result.status != TransferStatus::Converged) {
        ++overflow[g];
        return;
    }
    const double t = result.transfer_time;
    const double x = std::log10(t);
    int bin = static_cast<int>(std::floor((x - hist.log10_min) / hist.width()));
    if (bin < 0) {
        bin = 0;
        ++clamped_low[g];
    } else if (bin >= hist.bins) {
        bin = hist.bins - 1;
        ++clamped_high[g];
    }
    ++counts[g * static_cast<std::size_t>(hist.bins) + static_cast<std::size_t>(bin)];
    min_t[g] = std::min(min_t[g], t);
}

void Landscape::merge(const Landscape& other) {
    if (other.counts.size() != counts.size() || other.overflow.size() != overflow.size()) {
        throw InputError("cannot merge landscapes with different shapes");
    }
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    for (std::size_t g = 0; g < overflow.size(); ++g) {
        overflow[g] += other.overflow[g];
        clamped_low[g] += other.clamped_low[g];
        clamped_high[g] += other.clamped_high[g];
        coherent[g] += other.coherent[g];
        min_t[g] = std::min(min_t[g], other.min_t[g]);
    }
    n_samples += other.n_samples;
}

Landscape run_landscape(const ModelParams& params, const GammaGrid& grid,
                        std::int64_t n_samples, std::uint64_t master_seed, int workers,
                        const HistSpec& hist) {
    params.validate();
    if (n_samples < 1) {
        throw UsageError("n_samples must be >= 1");
    }
    if (workers < 1) {
        throw UsageError("workers must be >= 1");
    }

    const int n_gamma = static_cast<int>(grid.values.size());
    std::vector<Landscape> partials(static_cast<std::size_t>(workers), Landscape(grid, hist));
    std::vector<TransferSolver> solvers(static_cast<std::size_t>(workers));

    parallel_for_indexed(n_samples, workers, [&](std::int64_t seed_index, int worker) {
        Landscape& local = partials[static_cast<std::size_t>(worker)];
        TransferSolver& solver = solvers[static_cast<std::size_t>(worker)];

        const Configuration config =
            sample_configuration(params, master_seed, static_cast<std::uint64_t>(seed_index));
        const NetworkModel model = build_model(config, params);
        solver.set_model(model);

        for (int g = 0; g < n_gamma; ++g) {
            const double gamma_abs = grid.values[static_cast<std::size_t>(g)] * model.sink_rate;
            const TransferResult result = solver.at_gamma(gamma_abs);
            local.record(g, result);
            if (result.status == TransferStatus::Converged) {
                const double t_deph =
                    1.0 / (4.0 * grid.values[static_cast<std::size_t>(g)] *
                           params.sink_rate_multiplier);
                if (result.transfer_time < t_deph) {
                    ++local.coherent[static_cast<std::size_t>(g)];
                }
            }
        }
        ++local.n_samples;
    });

    Landscape merged(grid, hist);
    for (const Landscape& part : partials) {
        merged.merge(part);
    }
    return merged;
}

std::vector<std::vector<double>> density(const Landscape& landscape) {
    const std::size_t cols = landscape.gamma_grid.values.size();
    const int bins = landscape.hist.bins;
    const double width = landscape.hist.width();
    std::vector<std::vector<double>> out(cols, std::vector<double>(static_cast<std::size_t>(bins)));
    for (std::size_t g = 0; g < cols; ++g) {
        std::int64_t col_total = 0;
        for (int b = 0; b < bins; ++b) {
            col_total += landscape.count_at(static_cast<int>(g), b);
        }
        if (col_total == 0) {
            throw EmptyColumn("no converged sample at gamma/Gamma = " +
                              std::to_string(landscape.gamma_grid.values[g]));
        }
        const double norm =
            static_cast<double>(col_total) /
            static_cast<double>(col_total + landscape.overflow[g]); // = 1 - overflow fraction
        for (int b = 0; b < bins; ++b) {
            out[g][static_cast<std::size_t>(b)] =
                static_cast<double>(landscape.count_at(static_cast<int>(g), b)) /
                (static_cast<double>(col_total) * width) * norm;
        }
    }
    return out;
}

CurveSummary summarize(const Landscape& landscape) {
    const std::size_t cols = landscape.gamma_grid.values.size();
    const int bins = landscape.hist.bins;
    const double width = landscape.hist.width();

    CurveSummary summary;
    summary.gamma_over_Gamma = landscape.gamma_grid.values;
    summary.median_t.resize(cols);
    summary.min_t = landscape.min_t;
    summary.overflow_fraction.resize(cols);

    for (std::size_t g = 0; g < cols; ++g) {
        std::int64_t col_total = 0;
        for (int b = 0; b < bins; ++b) {
            col_total += landscape.count_at(static_cast<int>(g), b);
        }
        if (col_total == 0) {
            throw EmptyColumn("no converged sample at gamma/Gamma = " +
                              std::to_string(landscape.gamma_grid.values[g]));
        }
        summary.overflow_fraction[g] =
            static_cast<double>(landscape.overflow[g]) /
            static_cast<double>(col_total + landscape.overflow[g]);

        // Linear interpolation inside the bin containing the half count.
        const double half = 0.5 * static_cast<double>(col_total);
        std::int64_t below = 0;
        for (int b = 0; b < bins; ++b) {
            const std::int64_t c = landscape.count_at(static_cast<int>(g), b);
            if (static_cast<double>(below + c) >= half) {
                const double frac =
                    (half - static_cast<double>(below)) / static_cast<double>(c);
                const double log_median = landscape.hist.log10_min + width * (b + frac);
                summary.median_t[g] = std::pow(10.0, log_median);
                break;
            }
            below += c;
        }
    }
    return summary;
}

ReferenceLines reference_lines(const GammaGrid& grid, double sink_rate_multiplier) {
    ReferenceLines lines;
    lines.t_deph.reserve(grid.values.size());
    lines.classical.assign(grid.values.size(), 1.0);
    for (double ratio : grid.values) {
        if (ratio > 0.0) {
            lines.t_deph.push_back(1.0 / (4.0 * sink_rate_multiplier * ratio));
        } else {
            lines.t_deph.push_back(std::numeric_limits<double>::infinity());
        }
    }
    return lines;
}

} // namespace qxfer
