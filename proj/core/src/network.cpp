#include "qxfer/network.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "qxfer/errors.hpp"
#include "qxfer/rng.hpp"

namespace qxfer {

void ModelParams::validate() const {
    if (n_sites < 2) {
        throw UsageError("n_sites must be >= 2, got " + std::to_string(n_sites));
    }
    if (!(alpha > 0.0)) {
        throw UsageError("alpha must be > 0");
    }
    if (!(sphere_radius > 0.0)) {
        throw UsageError("sphere_radius must be > 0");
    }
    if (!(min_separation >= 0.0) || !(min_separation < 2.0 * sphere_radius)) {
        throw UsageError("min_separation must lie in [0, 2*sphere_radius)");
    }
    if (!(gamma >= 0.0)) {
        throw UsageError("gamma must be >= 0");
    }
    if (!(sink_rate_multiplier > 0.0)) {
        throw UsageError("sink_rate_multiplier must be > 0");
    }
}

namespace {

bool separation_ok(const std::vector<Eigen::Vector3d>& positions, double min_separation) {
    const std::size_t n = positions.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if ((positions[i] - positions[j]).norm() < min_separation) {
                return false;
            }
        }
    }
    return true;
}

} // namespace

Configuration sample_configuration(const ModelParams& params, std::mt19937_64& stream,
                                   std::uint64_t seed_index, int max_retries) {
    params.validate();
    const int n = params.n_sites;
    const double r = params.sphere_radius;

    Configuration config;
    config.seed_index = seed_index;
    config.positions.resize(static_cast<std::size_t>(n));
    config.positions.front() = Eigen::Vector3d(0.0, 0.0, +r);
    config.positions.back() = Eigen::Vector3d(0.0, 0.0, -r);
    if (n == 2) {
        return config;
    }

    // Resample the whole intermediate set on a violation so the accepted
    // distribution stays a plain conditional of the i.i.d. uniform law.
    for (int attempt = 0; attempt < max_retries; ++attempt) {
        for (int i = 1; i < n - 1; ++i) {
            config.positions[static_cast<std::size_t>(i)] = uniform_in_ball(stream, r);
        }
        if (separation_ok(config.positions, params.min_separation)) {
            return config;
        }
    }
    throw SeparationUnsatisfiable(
        "no valid configuration after " + std::to_string(max_retries) +
        " retries; min_separation " + std::to_string(params.min_separation) +
        " is too large for sphere_radius " + std::to_string(params.sphere_radius));
}

Configuration sample_configuration(const ModelParams& params, std::uint64_t master_seed,
                                   std::uint64_t seed_index, int max_retries) {
    std::mt19937_64 stream = derive_stream(master_seed, StreamDomain::LandscapeSample, seed_index);
    return sample_configuration(params, stream, seed_index, max_retries);
}

NetworkModel build_model(const Configuration& config, const ModelParams& params) {
    params.validate();
    const int n = static_cast<int>(config.positions.size());
    if (n != params.n_sites) {
        throw InputError("configuration has " + std::to_string(n) + " positions, params expect " +
                         std::to_string(params.n_sites));
    }

    NetworkModel model;
    model.params = params;
    model.couplings = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double r = (config.positions[static_cast<std::size_t>(i)] -
                              config.positions[static_cast<std::size_t>(j)])
                                 .norm();
            if (r < params.min_separation || r <= 0.0) {
                throw DegenerateGeometry("sites " + std::to_string(i) + " and " + std::to_string(j) +
                                         " are " + std::to_string(r) + " apart, below min_separation " +
                                         std::to_string(params.min_separation));
            }
            const double v = params.alpha / (r * r * r);
            model.couplings(i, j) = v;
            model.couplings(j, i) = v;
        }
    }

    const double v_in_out = model.couplings(model.in_site(), model.out_site());
    model.direct_time = std::numbers::pi / (2.0 * v_in_out);
    model.sink_rate = params.sink_rate_multiplier / model.direct_time;
    return model;
}

Configuration scale_configuration(const Configuration& config, double s) {
    if (!(s > 0.0)) {
        throw InputError("scale factor must be > 0");
    }
    Configuration scaled = config;
    for (Eigen::Vector3d& p : scaled.positions) {
        p *= s;
    }
    return scaled;
}

Configuration configuration_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(std::string("configuration JSON parse error: ") + e.what());
    }
    if (!j.is_object() || !j.contains("positions") || !j["positions"].is_array()) {
        throw InputError("configuration JSON must be an object with a \"positions\" array");
    }
    Configuration config;
    config.seed_index = j.value("seed_index", std::uint64_t{0});
    for (const auto& p : j["positions"]) {
        if (!p.is_array() || p.size() != 3 || !p[0].is_number() || !p[1].is_number() ||
            !p[2].is_number()) {
            throw InputError("each position must be a [x, y, z] number triple");
        }
        config.positions.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
    }
    if (config.positions.size() < 2) {
        throw InputError("configuration needs at least the two pole sites");
    }
    return config;
}

std::string configuration_to_json_text(const Configuration& config) {
    nlohmann::ordered_json j;
    j["seed_index"] = config.seed_index;
    nlohmann::ordered_json positions = nlohmann::ordered_json::array();
    for (const Eigen::Vector3d& p : config.positions) {
        positions.push_back({p.x(), p.y(), p.z()});
    }
    j["positions"] = std::move(positions);
    return j.dump(2) + "\n";
}

Configuration load_configuration(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open configuration file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return configuration_from_json_text(buf.str());
}

void save_configuration(const Configuration& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write configuration file: " + path);
    }
    out << configuration_to_json_text(config);
    if (!out) {
        throw IoError("write failed: " + path);
    }
}

} // namespace qxfer
