#pragma once

#include <cstdint>
#include <vector>

#include "qxfer/dynamics.hpp"
#include "qxfer/network.hpp"

namespace qxfer {

// Geometric grid of dephasing rates in units of Gamma.
struct GammaGridSpec {
    double min = 1e-5;
    double max = 1e3;
    int steps = 60;
};

struct GammaGrid {
    std::vector<double> values; // gamma/Gamma, strictly increasing
    GammaGridSpec spec;
};

// Logarithmically equispaced values inclusive of both endpoints (pinned
// exactly). Throws BadSpec for degenerate or inverted ranges.
GammaGrid make_gamma_grid(const GammaGridSpec& spec);

// Histogram layout over log10(transfer_time / T).
struct HistSpec {
    double log10_min = -2.0;
    double log10_max = 6.0;
    int bins = 160;

    double width() const { return (log10_max - log10_min) / bins; }
};

// Log-binned transfer-time histogram plus per-gamma exact summaries. All
// count fields merge by addition and minima by element-wise min, so partial
// landscapes combine associatively and independent of order.
struct Landscape {
    GammaGrid gamma_grid;
    HistSpec hist;
    std::vector<std::int64_t> counts;        // [gamma_index * bins + bin]
    std::vector<std::int64_t> overflow;      // Divergent / IllConditioned per gamma
    std::vector<std::int64_t> clamped_low;   // converged but below the histogram range
    std::vector<std::int64_t> clamped_high;  // converged but at/above the top edge
    std::vector<std::int64_t> coherent;      // converged with T_transfer < T_deph(gamma)
    std::vector<double> min_t;               // exact running minimum of T_transfer/T
    std::int64_t n_samples = 0;

    Landscape() = default;
    Landscape(const GammaGrid& grid, const HistSpec& hist_spec);

    std::int64_t count_at(int gamma_index, int bin) const {
        return counts[static_cast<std::size_t>(gamma_index) * hist.bins + bin];
    }

    // Files one solver result into the column for gamma_grid.values[g].
    void record(int gamma_index, const TransferResult& result);

    // Element-wise merge of a partial landscape over the same grid and bins.
    void merge(const Landscape& other);
};

// Monte Carlo sweep: for each seed_index, sample one configuration, build the
// model once, then scan the whole gamma grid through a workspace-reusing
// solver. Bit-identical output for fixed (master_seed, n_samples, grid)
// regardless of worker count.
Landscape run_landscape(const ModelParams& params, const GammaGrid& grid,
                        std::int64_t n_samples, std::uint64_t master_seed, int workers,
                        const HistSpec& hist = {});

// Per-gamma probability density over log10(T_transfer/T): counts normalized
// so the column integrates to 1 - overflow_fraction. Throws EmptyColumn if a
// column holds no converged sample.
std::vector<std::vector<double>> density(const Landscape& landscape);

struct CurveSummary {
    std::vector<double> gamma_over_Gamma;
    std::vector<double> median_t;   // units of T, from histogram interpolation
    std::vector<double> min_t;      // units of T, exact
    std::vector<double> overflow_fraction;
};

// Median by linear interpolation inside the median bin (log10 coordinates),
// minimum from the exact running scalar. Throws EmptyColumn on a column with
// no converged sample.
CurveSummary summarize(const Landscape& landscape);

struct ReferenceLines {
    std::vector<double> t_deph;     // T_deph/T per gamma; +inf marks "absent"
    std::vector<double> classical;  // the direct-time marker, identically 1
};

// T_deph = 1/(4 gamma) converted to units of T: 1/(4 * multiplier * ratio).
ReferenceLines reference_lines(const GammaGrid& grid, double sink_rate_multiplier = 10.0);

} // namespace qxfer
