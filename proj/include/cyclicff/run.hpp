#pragma once

#include "cyclicff/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace cyclicff {

struct RunArtifacts {
    Metrics metrics;
    std::filesystem::path checkpoint;  // empty for the bp-chain baseline
    std::filesystem::path metrics_csv;
    std::filesystem::path manifest;
};

/// Trains cfg on data and writes run-<hash>-<seed>.{ckpt,csv,json} into
/// cfg.out_dir. The FF network is rounded to checkpoint precision before
/// scoring, so re-evaluating the checkpoint reproduces test_err exactly.
RunArtifacts execute_run(const RunConfig& cfg, const Splits& data);

/// "run-<hash>-<seed>"
std::string run_stem(const RunConfig& cfg);

/// Output of `git describe --always --dirty`, or "unknown".
std::string git_describe();

// ---------------------------------------------------------------------------
// Sweeps over config keys.
// ---------------------------------------------------------------------------
struct SweepAxis {
    std::string key;
    std::vector<std::string> values;
};

/// "key=v1,v2,..."; empty lists and unknown keys throw ConfigError.
SweepAxis parse_sweep_axis(std::string_view text);
/// "1..5" or "1,3,7".
std::vector<std::uint64_t> parse_seed_list(std::string_view text);

struct SweepRow {
    std::vector<std::string> values;  // one per axis
    std::size_t n_runs = 0;
    double mean_test_err = 0.0;
    double std_test_err = 0.0;  // sample standard deviation; 0 for one run
    double mean_val_err = 0.0;
    bool best = false;          // lowest mean validation error
};

struct SweepReport {
    std::vector<SweepAxis> axes;
    std::vector<SweepRow> rows;
    std::filesystem::path summary_csv;
};

/// Cross product of the axes times the seeds, run through sweep().
SweepReport run_sweep(const Settings& base, const std::vector<SweepAxis>& axes,
                      const std::vector<std::uint64_t>& seeds, std::size_t jobs);

void write_sweep_csv(const SweepReport& report, std::ostream& out);

// ---------------------------------------------------------------------------

/// Edge list, degrees, resolved d_in per neuron and cyclicity.
void write_graph_report(const RunConfig& cfg, std::ostream& out);

} // namespace cyclicff
