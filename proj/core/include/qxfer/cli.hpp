#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qxfer/landscape.hpp"
#include "qxfer/network.hpp"

namespace qxfer {

enum class Command { Run, Sample, Optimize, Sweep };

// Fully resolved invocation: flags override params-file values override
// defaults. The worker default comes from QXFER_WORKERS, else the hardware
// thread count; nothing else reads the environment.
struct RunSpec {
    Command command = Command::Sample;
    ModelParams params;            // gamma field unused here; see gamma_over_Gamma
    double gamma_over_Gamma = 0.0; // `run` evaluation point
    GammaGridSpec grid;
    HistSpec hist;
    std::int64_t n_samples = 200000;
    std::uint64_t master_seed = 1;
    int workers = 1;
    int restarts = 32;
    std::int64_t budget = 20000;
    std::string out_dir = ".";
    Configuration config; // run/sweep input, loaded or embedded
    bool have_config = false;
};

// --help / subcommand help was requested; carries the help text.
class HelpRequested : public std::exception {
public:
    explicit HelpRequested(std::string text) : text_(std::move(text)) {}
    const char* what() const noexcept override { return text_.c_str(); }
    const std::string& text() const { return text_; }

private:
    std::string text_;
};

// Parses argv (without the program name). Throws UsageError on unknown flags
// or keys, out-of-range values, or a missing required input.
RunSpec parse_spec(const std::vector<std::string>& args);

// Serialized manifest for the spec; accepted back via --params for replay.
std::string manifest_text(const RunSpec& spec);

// Executes one resolved invocation. Writes output files under spec.out_dir
// (sample: landscape.csv curves.csv manifest.json; optimize: best_config.json
// optimized_curve.csv manifest.json; sweep: sweep_curve.csv manifest.json)
// and prints the `run` report to `out`. Returns 0 on success; throws a
// categorized error otherwise, never leaving a success exit with partial
// output.
int execute(const RunSpec& spec, std::ostream& out);

// Top-level entry: parse + execute with the documented exit-code mapping
// (0 success, 2 usage, 3 input, 4 solver, 5 io).
int run_cli(int argc, char** argv);

} // namespace qxfer
