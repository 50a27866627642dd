#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <vector>

#include "qxfer/errors.hpp"
#include "qxfer/network.hpp"
#include "qxfer/rng.hpp"

using namespace qxfer;

namespace {

Configuration two_site_poles(double radius = 0.5) {
    Configuration c;
    c.positions = {Eigen::Vector3d(0, 0, radius), Eigen::Vector3d(0, 0, -radius)};
    return c;
}

} // namespace

TEST_CASE("poles are pinned exactly") {
    ModelParams params;
    for (std::uint64_t idx : {0ull, 1ull, 999ull}) {
        const Configuration c = sample_configuration(params, 42, idx);
        REQUIRE(c.positions.size() == 7);
        CHECK(c.positions.front().x() == 0.0);
        CHECK(c.positions.front().y() == 0.0);
        CHECK(c.positions.front().z() == params.sphere_radius);
        CHECK(c.positions.back().x() == 0.0);
        CHECK(c.positions.back().y() == 0.0);
        CHECK(c.positions.back().z() == -params.sphere_radius);
        CHECK(c.seed_index == idx);
    }
}

TEST_CASE("sampled configurations satisfy the geometric invariants") {
    ModelParams params;
    for (std::uint64_t idx = 0; idx < 10000; ++idx) {
        const Configuration c = sample_configuration(params, 7, idx);
        for (std::size_t i = 1; i + 1 < c.positions.size(); ++i) {
            REQUIRE(c.positions[i].norm() < params.sphere_radius);
        }
        for (std::size_t i = 0; i < c.positions.size(); ++i) {
            for (std::size_t j = i + 1; j < c.positions.size(); ++j) {
                REQUIRE((c.positions[i] - c.positions[j]).norm() >= params.min_separation);
            }
        }
    }
}

TEST_CASE("intermediates are uniform over the ball") {
    // With the separation constraint off, radius^3 is uniform on (0, 1), so
    // the mean of (|r|/R)^3 over 1e6 intermediate draws is 1/2 +- 0.002
    // (7 standard errors).
    ModelParams params;
    params.min_separation = 0.0;
    double sum = 0.0;
    std::int64_t count = 0;
    for (std::uint64_t idx = 0; idx < 200000; ++idx) {
        const Configuration c = sample_configuration(params, 11, idx);
        for (std::size_t i = 1; i + 1 < c.positions.size(); ++i) {
            const double ratio = c.positions[i].norm() / params.sphere_radius;
            sum += ratio * ratio * ratio;
            ++count;
        }
    }
    REQUIRE(count == 1000000);
    CHECK(std::abs(sum / static_cast<double>(count) - 0.5) < 0.002);
}

TEST_CASE("sampling is bit-deterministic") {
    ModelParams params;
    const Configuration a = sample_configuration(params, 101, 5);
    const Configuration b = sample_configuration(params, 101, 5);
    REQUIRE(a.positions.size() == b.positions.size());
    for (std::size_t i = 0; i < a.positions.size(); ++i) {
        CHECK(a.positions[i].x() == b.positions[i].x());
        CHECK(a.positions[i].y() == b.positions[i].y());
        CHECK(a.positions[i].z() == b.positions[i].z());
    }
}

TEST_CASE("unsatisfiable separation throws after the retry budget") {
    ModelParams params;
    params.min_separation = 0.99; // five intermediates cannot be pairwise this far apart
    CHECK_THROWS_AS((void)sample_configuration(params, 1, 0), SeparationUnsatisfiable);
}

TEST_CASE("two-site model realizes the unit choice") {
    ModelParams params;
    params.n_sites = 2;
    const NetworkModel m = build_model(two_site_poles(), params);
    CHECK(m.couplings(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(m.direct_time == doctest::Approx(std::numbers::pi / 2).epsilon(1e-15));
    CHECK(m.sink_rate == doctest::Approx(20.0 / std::numbers::pi).epsilon(1e-15));
    CHECK(m.in_site() == 0);
    CHECK(m.out_site() == 1);
}

TEST_CASE("separation-2 dimer has coupling 1/8") {
    ModelParams params;
    params.n_sites = 2;
    params.sphere_radius = 1.0;
    const NetworkModel m = build_model(two_site_poles(1.0), params);
    CHECK(m.couplings(0, 1) == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(m.direct_time == doctest::Approx(4.0 * std::numbers::pi).epsilon(1e-15));
}

TEST_CASE("couplings are symmetric, positive, and monotone in distance") {
    ModelParams params;
    const Configuration c = sample_configuration(params, 3, 17);
    const NetworkModel m = build_model(c, params);
    for (int i = 0; i < 7; ++i) {
        CHECK(m.couplings(i, i) == 0.0);
        for (int j = i + 1; j < 7; ++j) {
            CHECK(m.couplings(i, j) == m.couplings(j, i));
            CHECK(m.couplings(i, j) > 0.0);
            const double r = (c.positions[static_cast<std::size_t>(i)] -
                              c.positions[static_cast<std::size_t>(j)])
                                 .norm();
            CHECK(m.couplings(i, j) == doctest::Approx(1.0 / (r * r * r)).epsilon(1e-14));
        }
    }
}

TEST_CASE("degenerate geometry is rejected") {
    ModelParams params;
    params.n_sites = 3;
    Configuration c = two_site_poles();
    c.positions.insert(c.positions.begin() + 1, Eigen::Vector3d(0, 0, 0.48)); // 0.02 from the pole
    CHECK_THROWS_AS((void)build_model(c, params), DegenerateGeometry);

    // Exact coincidence is degenerate even with the constraint disabled.
    params.min_separation = 0.0;
    c.positions[1] = c.positions[0];
    CHECK_THROWS_AS((void)build_model(c, params), DegenerateGeometry);
}

TEST_CASE("scale_configuration rescales couplings by s^-3 and T by s^3") {
    ModelParams params;
    const Configuration c = sample_configuration(params, 13, 4);
    const NetworkModel base = build_model(c, params);

    for (double s : {0.5, 2.0}) {
        const Configuration scaled = scale_configuration(c, s);
        ModelParams sp = params;
        sp.sphere_radius *= s;
        sp.min_separation *= s;
        const NetworkModel m = build_model(scaled, sp);
        CHECK(m.couplings(0, 6) ==
              doctest::Approx(base.couplings(0, 6) / (s * s * s)).epsilon(1e-12));
        CHECK(m.direct_time == doctest::Approx(base.direct_time * s * s * s).epsilon(1e-12));
        // Gamma*T is the fixed multiplier, so Gamma scales inversely with T.
        CHECK(m.sink_rate * m.direct_time ==
              doctest::Approx(params.sink_rate_multiplier).epsilon(1e-12));
    }
    CHECK_THROWS_AS((void)scale_configuration(c, 0.0), InputError);
    CHECK_THROWS_AS((void)scale_configuration(c, -1.0), InputError);
}

TEST_CASE("configuration JSON round-trip is exact") {
    ModelParams params;
    const Configuration c = sample_configuration(params, 99, 123);
    const std::string text = configuration_to_json_text(c);
    const Configuration back = configuration_from_json_text(text);
    CHECK(back.seed_index == c.seed_index);
    REQUIRE(back.positions.size() == c.positions.size());
    for (std::size_t i = 0; i < c.positions.size(); ++i) {
        CHECK(back.positions[i].x() == c.positions[i].x());
        CHECK(back.positions[i].y() == c.positions[i].y());
        CHECK(back.positions[i].z() == c.positions[i].z());
    }

    const auto path = std::filesystem::temp_directory_path() / "qxfer_test_config.json";
    save_configuration(c, path.string());
    const Configuration loaded = load_configuration(path.string());
    CHECK(loaded.seed_index == c.seed_index);
    for (std::size_t i = 0; i < c.positions.size(); ++i) {
        CHECK((loaded.positions[i] - c.positions[i]).norm() == 0.0);
    }
    std::filesystem::remove(path);

    CHECK_THROWS_AS((void)configuration_from_json_text("{"), InputError);
    CHECK_THROWS_AS((void)configuration_from_json_text("{\"seed_index\": 0}"), InputError);
    CHECK_THROWS_AS((void)load_configuration("/nonexistent/q.json"), IoError);
}

TEST_CASE("parameter validation rejects out-of-range fields") {
    ModelParams params;
    params.n_sites = 1;
    CHECK_THROWS_AS(params.validate(), UsageError);
    params = ModelParams{};
    params.alpha = 0.0;
    CHECK_THROWS_AS(params.validate(), UsageError);
    params = ModelParams{};
    params.min_separation = 1.0; // equals the pole distance 2R
    CHECK_THROWS_AS(params.validate(), UsageError);
    params = ModelParams{};
    params.sink_rate_multiplier = -1.0;
    CHECK_THROWS_AS(params.validate(), UsageError);
    params = ModelParams{};
    params.gamma = -1e-9;
    CHECK_THROWS_AS(params.validate(), UsageError);
}
