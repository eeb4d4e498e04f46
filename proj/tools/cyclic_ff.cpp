// cyclic_ff: command-line driver for training, evaluating and sweeping
// forward-forward graph networks.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include "cyclicff/run.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace cyclicff;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CommonArgs {
    std::string config;
    std::vector<std::string> sets;
    std::string out;
};

// Config file (if any), then --set overrides, then --out.
Settings gather_settings(const CommonArgs& args, LineMap& lines) {
    Settings s;
    if (!args.config.empty())
        s = read_config_file(args.config, &lines);
    for (const std::string& a : args.sets) {
        apply_override(s, a);
        lines.erase(a.substr(0, a.find('=')));
    }
    if (!args.out.empty())
        s["out_dir"] = args.out;
    return s;
}

// Prefixes line-numbered config errors with the file name ("x.cfg:3: ...").
template <typename Fn>
auto with_config_context(const CommonArgs& args, Fn fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        if (args.config.empty() || e.line() == 0)
            throw;
        const std::string what = e.what();
        throw ConfigError(args.config + ":" + std::to_string(e.line()) + ": " +
                          what.substr(what.find(": ") + 2));
    }
}

RunConfig load_run_config(const CommonArgs& args) {
    return with_config_context(args, [&] {
        LineMap lines;
        const Settings s = gather_settings(args, lines);
        return resolve(s, &lines);
    });
}

void print_result(const char* key, double value) {
    std::printf("%s=%.4f\n", key, value);
}

int cmd_train(const CommonArgs& args) {
    const RunConfig cfg = load_run_config(args);
    check_data_available(cfg.data);
    const Splits data = load_splits(cfg.data);
    std::cerr << "train " << data.train.size() << " / val " << data.val.size() << " / test "
              << data.test.size() << " (" << data.train.name << ")\n";
    const RunArtifacts art = execute_run(cfg, data);
    for (const EpochRecord& r : art.metrics.epochs)
        std::cerr << "epoch " << r.epoch << "  neuron_loss " << r.neuron_loss << "  readout_loss "
                  << r.readout_loss << "  train_err " << r.train_err << "  val_err " << r.val_err
                  << "  " << r.seconds << "s\n";
    std::cerr << "best epoch " << art.metrics.best_epoch << "; wrote " << art.metrics_csv.string();
    if (!art.checkpoint.empty())
        std::cerr << ", " << art.checkpoint.string();
    std::cerr << ", " << art.manifest.string() << '\n';
    print_result("test_error_pct", art.metrics.test_err);
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint) {
    const RunConfig cfg = load_run_config(args);
    check_data_available(cfg.data);
    if (!fs::exists(checkpoint))
        throw ConfigError("checkpoint '" + checkpoint + "' not found");
    const CyclicNet net = load_checkpoint(checkpoint);
    const Splits data = load_splits(cfg.data);
    print_result("test_error_pct", evaluate(net, data.test));
    return 0;
}

int cmd_sweep(const CommonArgs& args, const std::string& seeds_text, std::size_t jobs) {
    // "key=a,b,c" is an axis; a single "key=value" is an ordinary override.
    LineMap lines;
    CommonArgs base_args = args;
    base_args.sets.clear();
    std::vector<SweepAxis> axes;
    for (const std::string& a : args.sets) {
        if (a.find(',') == std::string::npos && a.find('=') + 1 < a.size())
            base_args.sets.push_back(a);
        else
            axes.push_back(parse_sweep_axis(a));
    }
    const Settings base = with_config_context(args, [&] { return gather_settings(base_args, lines); });
    const std::vector<std::uint64_t> seeds =
        seeds_text.empty() ? std::vector<std::uint64_t>{resolve(base).train.seed}
                           : parse_seed_list(seeds_text);
    // Surface config/data errors before any run starts.
    check_data_available(with_config_context(args, [&] { return resolve(base, &lines); }).data);

    const SweepReport report = run_sweep(base, axes, seeds, jobs);
    write_sweep_csv(report, std::cout);
    std::cerr << "wrote " << report.summary_csv.string() << '\n';
    return 0;
}

int cmd_inspect_graph(const CommonArgs& args) {
    write_graph_report(load_run_config(args), std::cout);
    return 0;
}

int cmd_export_template(const std::string& out, std::size_t samples, std::size_t dim,
                        std::size_t classes, std::uint64_t seed) {
    if (classes < 2 || classes > dim)
        throw ConfigError("--classes must lie in [2, --dim]");
    const std::size_t per_class = (samples + classes - 1) / classes;
    Dataset d = synth_blobs(per_class, dim, classes, 3.0, Rng(seed, Stream::synth_data));
    std::vector<std::size_t> keep(samples);
    for (std::size_t i = 0; i < samples; ++i)
        keep[i] = i;
    d = subset(d, keep);
    save_embeddings(d, out);
    std::cout << "wrote " << out << ": " << samples << " samples, dim " << dim << ", " << classes
              << " classes\n"
              << "layout (little-endian): 'CNNE' | u32 version=1 | u32 n_samples | u32 dim | "
                 "u32 n_classes | n_samples*dim f32 | n_samples u16 labels\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Forward-forward training of neural networks wired as arbitrary (cyclic) graphs"};
    app.require_subcommand(1);

    CommonArgs common;
    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* opt = sub->add_option("--config", common.config, "key = value config file or run manifest");
        if (config_required)
            opt->required();
        sub->add_option("--set", common.sets, "key=value override (repeatable)");
    };

    std::uint64_t seed = 0;
    auto* train = app.add_subcommand("train", "train one configuration and write its artifacts");
    add_common(train, false);
    auto* seed_opt = train->add_option("--seed", seed, "run seed (overrides the config)");
    train->add_option("--out", common.out, "output directory");

    std::string checkpoint;
    auto* eval = app.add_subcommand("eval", "score a checkpoint on the configured test set");
    add_common(eval, false);
    eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();

    std::string seeds;
    std::size_t jobs = 1;
    auto* sweep_cmd = app.add_subcommand("sweep", "cross product of --set key=a,b,c lists (single values are plain overrides), one run per seed");
    add_common(sweep_cmd, false);
    sweep_cmd->add_option("--seeds", seeds, "seed range 'a..b' or list 'a,b,c'");
    sweep_cmd->add_option("--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--out", common.out, "output directory");

    auto* inspect = app.add_subcommand("inspect-graph", "print the generated topology and resolved dimensions");
    add_common(inspect, false);

    std::string template_out;
    std::size_t samples = 100, dim = 768, classes = 2;
    std::uint64_t template_seed = 0;
    auto* tmpl = app.add_subcommand("export-embeddings-template",
                                    "write a small synthetic file in the embedding format");
    tmpl->add_option("--out", template_out, "output path")->required();
    tmpl->add_option("--samples", samples, "number of rows");
    tmpl->add_option("--dim", dim, "embedding width");
    tmpl->add_option("--classes", classes, "number of classes");
    tmpl->add_option("--seed", template_seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*seed_opt)
            common.sets.push_back("seed=" + std::to_string(seed));
        if (*train)
            return cmd_train(common);
        if (*eval)
            return cmd_eval(common, checkpoint);
        if (*sweep_cmd)
            return cmd_sweep(common, seeds, jobs);
        if (*inspect)
            return cmd_inspect_graph(common);
        if (*tmpl)
            return cmd_export_template(template_out, samples, dim, classes, template_seed);
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}
