#include <benchmark/benchmark.h>

#include "qxfer/dynamics.hpp"
#include "qxfer/landscape.hpp"
#include "qxfer/network.hpp"
#include "qxfer/oracle.hpp"

using namespace qxfer;

namespace {

NetworkModel model_at(std::uint64_t idx) {
    ModelParams params;
    return build_model(sample_configuration(params, 1, idx), params);
}

void BM_sample_configuration(benchmark::State& state) {
    ModelParams params;
    std::uint64_t idx = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(sample_configuration(params, 1, idx++));
    }
}
BENCHMARK(BM_sample_configuration);

void BM_build_model(benchmark::State& state) {
    ModelParams params;
    const Configuration c = sample_configuration(params, 1, 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(build_model(c, params));
    }
}
BENCHMARK(BM_build_model);

void BM_liouvillian_assembly(benchmark::State& state) {
    const NetworkModel m = model_at(0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(build_liouvillian(m, 1.0));
    }
}
BENCHMARK(BM_liouvillian_assembly);

// The sampling hot path: one gamma update plus the two refined solves.
void BM_transfer_lu(benchmark::State& state) {
    const NetworkModel m = model_at(0);
    TransferSolver solver;
    solver.set_model(m);
    double gamma = 0.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(solver.at_gamma(gamma));
        gamma = gamma == 0.0 ? m.sink_rate : 0.0;
    }
}
BENCHMARK(BM_transfer_lu);

void BM_transfer_eig(benchmark::State& state) {
    const NetworkModel m = model_at(0);
    const Liouvillian liou = build_liouvillian(m, m.sink_rate);
    for (auto _ : state) {
        benchmark::DoNotOptimize(transfer_time_eig(liou));
    }
}
BENCHMARK(BM_transfer_eig);

void BM_oracle_two_site(benchmark::State& state) {
    ModelParams params;
    params.n_sites = 2;
    Configuration c;
    c.positions = {Eigen::Vector3d(0, 0, 0.5), Eigen::Vector3d(0, 0, -0.5)};
    const NetworkModel m = build_model(c, params);
    const Liouvillian liou = build_liouvillian(m, 0.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(evolve_oracle(liou, 10.0 * m.direct_time, 1e-10));
    }
}
BENCHMARK(BM_oracle_two_site);

// One full gamma column of the landscape at a small sample count.
void BM_landscape_column(benchmark::State& state) {
    ModelParams params;
    GammaGrid column;
    column.values = {1.0};
    column.spec = {1.0, 1.0, 1};
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_landscape(params, column, 100, 1, 1));
    }
}
BENCHMARK(BM_landscape_column);

} // namespace

BENCHMARK_MAIN();
