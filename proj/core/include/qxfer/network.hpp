#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace qxfer {

// Model parameters shared by every module. Defaults realize the unit choice
// alpha = 1, R = 1/2: pole-to-pole distance 1, hence v_in,out = 1, T = pi/2
// and Gamma = 20/pi. All reported times are in units of T and all dephasing
// rates in units of Gamma, so results are independent of this choice.
struct ModelParams {
    int n_sites = 7;
    double alpha = 1.0;
    double sphere_radius = 0.5;
    double min_separation = 0.05;
    double gamma = 0.0;                // dephasing rate, absolute units (1/time)
    double sink_rate_multiplier = 10.0; // Gamma = multiplier / T

    // Throws UsageError when a field is outside its declared range.
    void validate() const;
};

// One disorder realization: site positions with the generating stream index.
// positions[0] is the injection site on the north pole (0, 0, +R),
// positions[n-1] the sink-coupled site on the south pole (0, 0, -R); the
// intermediates lie strictly inside the sphere.
struct Configuration {
    std::uint64_t seed_index = 0;
    std::vector<Eigen::Vector3d> positions;
};

// Geometry mapped to couplings and derived time scales.
struct NetworkModel {
    Eigen::MatrixXd couplings; // v_ij = alpha * r_ij^-3, symmetric, zero diagonal
    double direct_time = 0.0;  // T = pi / (2 v_in,out)
    double sink_rate = 0.0;    // Gamma = sink_rate_multiplier / T
    ModelParams params;

    int in_site() const { return 0; }
    int out_site() const { return static_cast<int>(couplings.rows()) - 1; }
};

// Draws one configuration from the given stream: poles pinned, intermediates
// i.i.d. uniform over the ball interior, with whole-set resampling until the
// min_separation invariant holds (default 1000 retries).
// Throws SeparationUnsatisfiable when the retry budget is exhausted.
Configuration sample_configuration(const ModelParams& params, std::mt19937_64& stream,
                                   std::uint64_t seed_index, int max_retries = 1000);

// Convenience overload deriving the stream from (master_seed, seed_index) in
// the LandscapeSample domain.
Configuration sample_configuration(const ModelParams& params, std::uint64_t master_seed,
                                   std::uint64_t seed_index, int max_retries = 1000);

// Maps positions to the coupling matrix and fills in T and Gamma.
// Throws DegenerateGeometry if any pair sits closer than min_separation.
NetworkModel build_model(const Configuration& config, const ModelParams& params);

// Multiplies every position by s (> 0). Couplings scale by s^-3 and T by s^3;
// the dimensionless pair (T_transfer/T, gamma/Gamma) is invariant.
Configuration scale_configuration(const Configuration& config, double s);

// JSON round-trip of one configuration: {"seed_index": n, "positions": [[x,y,z],...]}.
Configuration load_configuration(const std::string& path);
void save_configuration(const Configuration& config, const std::string& path);
Configuration configuration_from_json_text(const std::string& text);
std::string configuration_to_json_text(const Configuration& config);

} // namespace qxfer
