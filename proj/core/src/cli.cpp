#include "qxfer/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "qxfer/dynamics.hpp"
#include "qxfer/errors.hpp"
#include "qxfer/optimizer.hpp"
#include "qxfer/oracle.hpp"
#include "qxfer/version.hpp"

namespace qxfer {

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

int default_workers() {
    if (const char* env = std::getenv("QXFER_WORKERS")) {
        char* end = nullptr;
        const long parsed = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && parsed >= 1 && parsed <= 4096) {
            return static_cast<int>(parsed);
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

const char* command_name(Command c) {
    switch (c) {
    case Command::Run:
        return "run";
    case Command::Sample:
        return "sample";
    case Command::Optimize:
        return "optimize";
    default:
        return "sweep";
    }
}

// Reads the flat params/manifest JSON and overlays every key whose
// corresponding flag was not given on the command line. Unknown keys are
// rejected by name.
struct FileOverlay {
    nlohmann::json doc;

    explicit FileOverlay(const std::string& path) {
        std::ifstream in(path);
        if (!in) {
            throw IoError("cannot open params file: " + path);
        }
        try {
            in >> doc;
        } catch (const nlohmann::json::parse_error& e) {
            throw InputError("params file " + path + ": " + e.what());
        }
        if (!doc.is_object()) {
            throw InputError("params file " + path + " must hold a JSON object");
        }
    }

    template <typename T>
    void apply(const char* key, T& target, const CLI::Option* flag) {
        auto it = doc.find(key);
        if (it == doc.end()) {
            return;
        }
        if (flag != nullptr && flag->count() > 0) {
            return; // flags override file values
        }
        try {
            target = it->get<T>();
        } catch (const nlohmann::json::exception&) {
            throw UsageError(std::string("params key '") + key + "' has the wrong type");
        }
    }
};

void check_known_keys(const nlohmann::json& doc) {
    static const char* known[] = {
        "command",     "code_version",   "n_sites",        "alpha",
        "sphere_radius", "min_separation", "sink_rate_multiplier", "gamma_over_Gamma",
        "gamma_min",   "gamma_max",      "gamma_steps",    "hist_bins",
        "hist_log10_min", "hist_log10_max", "n_samples",   "master_seed",
        "workers",     "restarts",       "budget",         "out_dir",
        "configuration",
    };
    for (const auto& item : doc.items()) {
        const std::string& key = item.key();
        const bool ok = std::any_of(std::begin(known), std::end(known),
                                    [&](const char* k) { return key == k; });
        if (!ok) {
            throw UsageError("unknown key in params file: " + key);
        }
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open for writing: " + path.string());
    }
    out << content;
    out.flush();
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

std::string landscape_csv(const Landscape& landscape) {
    const auto dens = density(landscape);
    const double width = landscape.hist.width();
    std::string out = "gamma_over_Gamma,log10_T_bin_center,density\n";
    for (std::size_t g = 0; g < landscape.gamma_grid.values.size(); ++g) {
        const std::string gamma = g17(landscape.gamma_grid.values[g]);
        for (int b = 0; b < landscape.hist.bins; ++b) {
            const double center = landscape.hist.log10_min + width * (b + 0.5);
            out += gamma;
            out += ',';
            out += g17(center);
            out += ',';
            out += g17(dens[g][static_cast<std::size_t>(b)]);
            out += '\n';
        }
    }
    return out;
}

std::string curves_csv(const Landscape& landscape, double sink_rate_multiplier) {
    const CurveSummary summary = summarize(landscape);
    const ReferenceLines lines = reference_lines(landscape.gamma_grid, sink_rate_multiplier);
    std::string out = "gamma_over_Gamma,median_T_over_T,min_T_over_T,overflow_fraction,T_deph_over_T\n";
    for (std::size_t g = 0; g < summary.gamma_over_Gamma.size(); ++g) {
        out += g17(summary.gamma_over_Gamma[g]);
        out += ',';
        out += g17(summary.median_t[g]);
        out += ',';
        out += g17(summary.min_t[g]);
        out += ',';
        out += g17(summary.overflow_fraction[g]);
        out += ',';
        out += g17(lines.t_deph[g]);
        out += '\n';
    }
    return out;
}

std::string sweep_csv(const SweepCurve& curve) {
    std::string out = "gamma_over_Gamma,T_over_T\n";
    for (std::size_t g = 0; g < curve.gamma_over_Gamma.size(); ++g) {
        out += g17(curve.gamma_over_Gamma[g]);
        out += ',';
        out += g17(curve.t_over_T[g]);
        out += '\n';
    }
    return out;
}

void print_run_report(const RunSpec& spec, std::ostream& out) {
    const NetworkModel model = build_model(spec.config, spec.params);
    const double gamma_abs = spec.gamma_over_Gamma * model.sink_rate;
    const Liouvillian liou = build_liouvillian(model, gamma_abs);
    const TransferResult result = transfer_time(liou);

    out << "command = run\n";
    out << "gamma_over_Gamma = " << g17(spec.gamma_over_Gamma) << '\n';
    out << "transfer_time_over_T = " << g17(result.transfer_time) << '\n';
    out << "status = " << to_string(result.status) << '\n';
    out << "absorption_total = " << g17(result.absorption_total) << '\n';
    out << "residual = " << g17(result.residual) << '\n';
    out << "direct_time = " << g17(model.direct_time) << '\n';
    out << "sink_rate = " << g17(model.sink_rate) << '\n';

    // Purity along the oracle trajectory, decimated for readability.
    const double horizon =
        10.0 * std::max(result.status == TransferStatus::Converged
                            ? result.transfer_time * model.direct_time
                            : model.direct_time,
                        model.direct_time);
    const OracleResult trajectory = evolve_oracle(liou, horizon, 1e-10);
    if (trajectory.budget_exhausted) {
        out << "oracle_budget_exhausted = true\n";
    }
    out << "\npurity_trace:\nt_over_T,purity\n";
    const std::size_t n_snap = trajectory.times.size();
    const std::size_t stride = std::max<std::size_t>(1, n_snap / 48);
    for (std::size_t k = 0; k < n_snap; k += stride) {
        const ExcitedState state{trajectory.states[k], trajectory.ground_population[k]};
        if (state.rho.trace().real() < 1e-10) {
            break;
        }
        out << g17(trajectory.times[k] / model.direct_time) << ',' << g17(purity(state)) << '\n';
    }

    const EigenstateReport report = eigenstate_report(model);
    out << "\neigenstates:\nenergy,in_weight,out_weight\n";
    for (const EigenstateRow& row : report.rows) {
        out << g17(row.energy) << ',' << g17(row.in_weight) << ',' << g17(row.out_weight) << '\n';
    }
    out << "in_trapped = " << (report.in_trapped ? "true" : "false") << '\n';
}

} // namespace

RunSpec parse_spec(const std::vector<std::string>& args) {
    RunSpec spec;
    spec.workers = default_workers();

    std::string params_path;
    std::string config_path;

    CLI::App app{"single-excitation transport landscape toolkit", "qxfer"};
    app.require_subcommand(1);

    // Option pointers for one subcommand; each subcommand gets its own set so
    // the file overlay can ask "was this flag given on the parsed subcommand".
    struct Flags {
        CLI::Option* n_sites = nullptr;
        CLI::Option* alpha = nullptr;
        CLI::Option* sphere_radius = nullptr;
        CLI::Option* min_separation = nullptr;
        CLI::Option* sink_multiplier = nullptr;
        CLI::Option* gamma = nullptr;
        CLI::Option* gamma_min = nullptr;
        CLI::Option* gamma_max = nullptr;
        CLI::Option* gamma_steps = nullptr;
        CLI::Option* hist_bins = nullptr;
        CLI::Option* hist_min = nullptr;
        CLI::Option* hist_max = nullptr;
        CLI::Option* n_samples = nullptr;
        CLI::Option* seed = nullptr;
        CLI::Option* workers = nullptr;
        CLI::Option* restarts = nullptr;
        CLI::Option* budget = nullptr;
        CLI::Option* out = nullptr;
        CLI::Option* config = nullptr;
    };
    Flags run_flags, sample_flags, optimize_flags, sweep_flags;

    auto add_common = [&](CLI::App* cmd, Flags& f) {
        cmd->add_option("--params", params_path, "JSON parameter file (a manifest works too)");
        f.out = cmd->add_option("--out", spec.out_dir, "output directory");
        f.seed = cmd->add_option("--seed", spec.master_seed, "master RNG seed");
        f.workers = cmd->add_option("--workers", spec.workers, "worker thread count");
        f.n_sites = cmd->add_option("--n-sites", spec.params.n_sites, "number of sites");
        f.alpha = cmd->add_option("--alpha", spec.params.alpha, "dipole coupling constant");
        f.sphere_radius =
            cmd->add_option("--sphere-radius", spec.params.sphere_radius, "sphere radius");
        f.min_separation =
            cmd->add_option("--min-separation", spec.params.min_separation, "minimum site distance");
        f.sink_multiplier = cmd->add_option("--sink-multiplier", spec.params.sink_rate_multiplier,
                                            "Gamma = multiplier / T");
    };
    auto add_grid = [&](CLI::App* cmd, Flags& f) {
        f.gamma_min = cmd->add_option("--gamma-min", spec.grid.min, "grid minimum, gamma/Gamma");
        f.gamma_max = cmd->add_option("--gamma-max", spec.grid.max, "grid maximum, gamma/Gamma");
        f.gamma_steps = cmd->add_option("--gamma-steps", spec.grid.steps, "grid point count");
    };

    CLI::App* cmd_run = app.add_subcommand("run", "replay one configuration and print diagnostics");
    add_common(cmd_run, run_flags);
    run_flags.config = cmd_run->add_option("--config", config_path, "configuration JSON to replay");
    run_flags.gamma =
        cmd_run->add_option("--gamma", spec.gamma_over_Gamma, "dephasing rate, gamma/Gamma");

    CLI::App* cmd_sample = app.add_subcommand("sample", "Monte Carlo transfer-time landscape");
    add_common(cmd_sample, sample_flags);
    add_grid(cmd_sample, sample_flags);
    sample_flags.n_samples =
        cmd_sample->add_option("--n-samples", spec.n_samples, "configurations to sample");
    sample_flags.hist_bins = cmd_sample->add_option("--hist-bins", spec.hist.bins, "histogram bin count");
    sample_flags.hist_min =
        cmd_sample->add_option("--hist-min", spec.hist.log10_min, "histogram lower edge, log10(T/T)");
    sample_flags.hist_max =
        cmd_sample->add_option("--hist-max", spec.hist.log10_max, "histogram upper edge, log10(T/T)");

    CLI::App* cmd_optimize = app.add_subcommand("optimize", "optimize the gamma=0 configuration");
    add_common(cmd_optimize, optimize_flags);
    add_grid(cmd_optimize, optimize_flags);
    optimize_flags.restarts =
        cmd_optimize->add_option("--restarts", spec.restarts, "multi-start count");
    optimize_flags.budget =
        cmd_optimize->add_option("--budget", spec.budget, "evaluations per restart");

    CLI::App* cmd_sweep = app.add_subcommand("sweep", "re-evaluate a configuration over the grid");
    add_common(cmd_sweep, sweep_flags);
    add_grid(cmd_sweep, sweep_flags);
    sweep_flags.config =
        cmd_sweep->add_option("--config", config_path, "configuration JSON to sweep");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        std::ostringstream help;
        help << app.help();
        throw HelpRequested(help.str());
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }

    const Flags* flags_ptr = &sweep_flags;
    if (cmd_run->parsed()) {
        spec.command = Command::Run;
        flags_ptr = &run_flags;
    } else if (cmd_sample->parsed()) {
        spec.command = Command::Sample;
        flags_ptr = &sample_flags;
    } else if (cmd_optimize->parsed()) {
        spec.command = Command::Optimize;
        flags_ptr = &optimize_flags;
    } else {
        spec.command = Command::Sweep;
    }
    const Flags& flags = *flags_ptr;
    CLI::Option* config_flag = flags.config;

    bool config_embedded = false;
    if (!params_path.empty()) {
        FileOverlay overlay(params_path);
        check_known_keys(overlay.doc);
        overlay.apply("n_sites", spec.params.n_sites, flags.n_sites);
        overlay.apply("alpha", spec.params.alpha, flags.alpha);
        overlay.apply("sphere_radius", spec.params.sphere_radius, flags.sphere_radius);
        overlay.apply("min_separation", spec.params.min_separation, flags.min_separation);
        overlay.apply("sink_rate_multiplier", spec.params.sink_rate_multiplier,
                      flags.sink_multiplier);
        overlay.apply("gamma_over_Gamma", spec.gamma_over_Gamma, flags.gamma);
        overlay.apply("gamma_min", spec.grid.min, flags.gamma_min);
        overlay.apply("gamma_max", spec.grid.max, flags.gamma_max);
        overlay.apply("gamma_steps", spec.grid.steps, flags.gamma_steps);
        overlay.apply("hist_bins", spec.hist.bins, flags.hist_bins);
        overlay.apply("hist_log10_min", spec.hist.log10_min, flags.hist_min);
        overlay.apply("hist_log10_max", spec.hist.log10_max, flags.hist_max);
        overlay.apply("n_samples", spec.n_samples, flags.n_samples);
        overlay.apply("master_seed", spec.master_seed, flags.seed);
        overlay.apply("workers", spec.workers, flags.workers);
        overlay.apply("restarts", spec.restarts, flags.restarts);
        overlay.apply("budget", spec.budget, flags.budget);
        overlay.apply("out_dir", spec.out_dir, flags.out);
        if (overlay.doc.contains("configuration") &&
            (config_flag == nullptr || config_flag->count() == 0)) {
            spec.config = configuration_from_json_text(overlay.doc["configuration"].dump());
            spec.have_config = true;
            config_embedded = true;
        }
    }

    if (!config_path.empty() && !config_embedded) {
        spec.config = load_configuration(config_path);
        spec.have_config = true;
    }

    // Range validation after the three-way merge.
    if (spec.command == Command::Run || spec.command == Command::Sweep) {
        if (!spec.have_config) {
            throw UsageError("missing --config (or a configuration embedded in --params)");
        }
        spec.params.n_sites = static_cast<int>(spec.config.positions.size());
    }
    spec.params.validate();
    if (spec.n_samples < 1) {
        throw UsageError("--n-samples must be >= 1");
    }
    if (spec.workers < 1) {
        throw UsageError("--workers must be >= 1");
    }
    if (spec.restarts < 1) {
        throw UsageError("--restarts must be >= 1");
    }
    if (spec.budget < 100) {
        throw UsageError("--budget must be >= 100");
    }
    if (!(spec.gamma_over_Gamma >= 0.0)) {
        throw UsageError("--gamma must be >= 0");
    }
    if (spec.command != Command::Run) {
        make_gamma_grid(spec.grid); // BadSpec (a UsageError) on a degenerate range
    }
    if (spec.hist.bins < 1 || !(spec.hist.log10_max > spec.hist.log10_min)) {
        throw UsageError("histogram needs bins >= 1 and hist-max > hist-min");
    }
    return spec;
}

std::string manifest_text(const RunSpec& spec) {
    nlohmann::ordered_json j;
    j["command"] = command_name(spec.command);
    j["code_version"] = std::string(k_code_version);
    j["n_sites"] = spec.params.n_sites;
    j["alpha"] = spec.params.alpha;
    j["sphere_radius"] = spec.params.sphere_radius;
    j["min_separation"] = spec.params.min_separation;
    j["sink_rate_multiplier"] = spec.params.sink_rate_multiplier;
    j["gamma_over_Gamma"] = spec.gamma_over_Gamma;
    j["gamma_min"] = spec.grid.min;
    j["gamma_max"] = spec.grid.max;
    j["gamma_steps"] = spec.grid.steps;
    j["hist_bins"] = spec.hist.bins;
    j["hist_log10_min"] = spec.hist.log10_min;
    j["hist_log10_max"] = spec.hist.log10_max;
    j["n_samples"] = spec.n_samples;
    j["master_seed"] = spec.master_seed;
    j["workers"] = spec.workers;
    j["restarts"] = spec.restarts;
    j["budget"] = spec.budget;
    j["out_dir"] = spec.out_dir;
    if (spec.have_config) {
        j["configuration"] = nlohmann::ordered_json::parse(configuration_to_json_text(spec.config));
    }
    return j.dump(2) + "\n";
}

int execute(const RunSpec& spec, std::ostream& out) {
    if (spec.command == Command::Run) {
        print_run_report(spec, out);
        return 0;
    }

    std::error_code ec;
    std::filesystem::create_directories(spec.out_dir, ec);
    if (ec) {
        throw IoError("cannot create output directory " + spec.out_dir + ": " + ec.message());
    }
    const std::filesystem::path dir(spec.out_dir);

    if (spec.command == Command::Sample) {
        const GammaGrid grid = make_gamma_grid(spec.grid);
        const Landscape landscape = run_landscape(spec.params, grid, spec.n_samples,
                                                  spec.master_seed, spec.workers, spec.hist);
        write_text_file(dir / "landscape.csv", landscape_csv(landscape));
        write_text_file(dir / "curves.csv",
                        curves_csv(landscape, spec.params.sink_rate_multiplier));
        write_text_file(dir / "manifest.json", manifest_text(spec));
        return 0;
    }

    if (spec.command == Command::Optimize) {
        const GammaGrid grid = make_gamma_grid(spec.grid);
        const OptimizationResult result = optimize_gamma0(spec.params, spec.master_seed,
                                                          spec.restarts, spec.budget, spec.workers);
        const SweepCurve curve = sweep_optimized(result, grid);
        save_configuration(result.best_config, (dir / "best_config.json").string());
        write_text_file(dir / "optimized_curve.csv", sweep_csv(curve));
        write_text_file(dir / "manifest.json", manifest_text(spec));
        out << "best_T_over_T = " << g17(result.best_T) << '\n';
        out << "restarts_used = " << result.restarts_used << '\n';
        return 0;
    }

    const GammaGrid grid = make_gamma_grid(spec.grid);
    const SweepCurve curve = sweep_configuration(spec.config, spec.params, grid);
    write_text_file(dir / "sweep_curve.csv", sweep_csv(curve));
    write_text_file(dir / "manifest.json", manifest_text(spec));
    return 0;
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    args.reserve(static_cast<std::size_t>(argc > 0 ? argc - 1 : 0));
    for (int i = 1; i < argc; ++i) {
        args.emplace_back(argv[i]);
    }
    try {
        const RunSpec spec = parse_spec(args);
        return execute(spec, std::cout);
    } catch (const HelpRequested& help) {
        std::cout << help.text();
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 3;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return 5;
    } catch (const Error& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace qxfer
