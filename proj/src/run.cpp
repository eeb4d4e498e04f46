#include "cyclicff/run.hpp"

#include <json.hpp>

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>

namespace cyclicff {

namespace fs = std::filesystem;

namespace {

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_atomically(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << text;
        if (!out)
            throw Error("could not write '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

bool is_data_key(const std::string& key) {
    static const std::set<std::string> keys{
        "dataset", "data_dir", "mnist_dir", "train_path", "test_path", "val_fraction",
        "train_limit", "test_limit", "blobs_per_class", "blobs_test_per_class", "blobs_dim",
        "blobs_classes", "blobs_separation", "data_seed"};
    return keys.contains(key);
}

} // namespace

std::string run_stem(const RunConfig& cfg) {
    return "run-" + config_hash(cfg.effective) + "-" + std::to_string(cfg.train.seed);
}

std::string git_describe() {
    std::FILE* pipe = popen("git describe --always --dirty 2>/dev/null", "r");
    if (pipe == nullptr)
        return "unknown";
    std::array<char, 256> buf{};
    std::string out;
    while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe) != nullptr)
        out += buf.data();
    pclose(pipe);
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r'))
        out.pop_back();
    return out.empty() ? "unknown" : out;
}

RunArtifacts execute_run(const RunConfig& cfg, const Splits& data) {
    const std::string started = utc_timestamp();
    fs::create_directories(cfg.out_dir);
    const std::string stem = run_stem(cfg);
    RunArtifacts art;
    art.metrics_csv = cfg.out_dir / (stem + ".csv");
    art.manifest = cfg.out_dir / (stem + ".json");

    // Everything is computed before the first artifact is written.
    std::optional<CyclicNet> net;
    if (cfg.train.baseline == Baseline::bp_chain) {
        BaselineResult r = bp_chain_baseline(cfg.train, data.train, data.val);
        r.metrics.test_err = evaluate(r.model, data.test);
        art.metrics = std::move(r.metrics);
    } else {
        TrainResult r = train_loop(cfg.train, data.train, data.val);
        round_weights_to_float(r.net);
        r.metrics.test_err = evaluate(r.net, data.test);
        art.metrics = std::move(r.metrics);
        net = std::move(r.net);
    }

    if (net) {
        art.checkpoint = cfg.out_dir / (stem + ".ckpt");
        save_checkpoint(*net, art.checkpoint);
    }
    {
        const fs::path tmp = art.metrics_csv.string() + ".tmp";
        write_metrics_csv(art.metrics, tmp);
        fs::rename(tmp, art.metrics_csv);
    }

    nlohmann::ordered_json manifest;
    manifest["config"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : cfg.effective)
        manifest["config"][k] = v;
    manifest["seeds"] = {{"run", cfg.train.seed},
                         {"graph", cfg.train.generator.seed},
                         {"data", cfg.data.data_seed}};
    manifest["artifacts"] = {{"checkpoint", art.checkpoint.string()},
                             {"metrics_csv", art.metrics_csv.string()}};
    manifest["git_describe"] = git_describe();
    manifest["started_at"] = started;
    manifest["finished_at"] = utc_timestamp();
    manifest["best_epoch"] = art.metrics.best_epoch;
    manifest["epochs_run"] = art.metrics.epochs.size();
    manifest["test_error_pct"] = art.metrics.test_err;
    write_atomically(art.manifest, manifest.dump(2) + "\n");
    return art;
}

// ---------------------------------------------------------------------------

SweepAxis parse_sweep_axis(std::string_view text) {
    const auto eq = text.find('=');
    if (eq == std::string_view::npos)
        throw ConfigError("sweep axis '" + std::string(text) + "' is not key=v1,v2,...");
    SweepAxis axis{std::string(text.substr(0, eq)), {}};
    if (!default_settings().contains(axis.key))
        throw ConfigError("unknown key '" + axis.key + "' in sweep");
    std::string_view rest = text.substr(eq + 1);
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string_view item = rest.substr(0, comma);
        if (!item.empty())
            axis.values.emplace_back(item);
        if (comma == std::string_view::npos)
            break;
        rest.remove_prefix(comma + 1);
    }
    if (axis.values.empty())
        throw ConfigError("sweep key '" + axis.key + "' has an empty value list");
    return axis;
}

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
    auto number = [&](std::string_view s) {
        std::uint64_t v = 0;
        auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || end != s.data() + s.size())
            throw ConfigError("bad seed list '" + std::string(text) + "'");
        return v;
    };
    std::vector<std::uint64_t> seeds;
    if (const auto dots = text.find(".."); dots != std::string_view::npos) {
        const std::uint64_t lo = number(text.substr(0, dots));
        const std::uint64_t hi = number(text.substr(dots + 2));
        if (hi < lo)
            throw ConfigError("bad seed range '" + std::string(text) + "'");
        for (std::uint64_t s = lo; s <= hi; ++s)
            seeds.push_back(s);
        return seeds;
    }
    for (const std::string& v : parse_sweep_axis("seed=" + std::string(text)).values)
        seeds.push_back(number(v));
    return seeds;
}

SweepReport run_sweep(const Settings& base, const std::vector<SweepAxis>& axes,
                      const std::vector<std::uint64_t>& seeds, std::size_t jobs) {
    if (seeds.empty())
        throw ConfigError("sweep needs at least one seed");
    for (const SweepAxis& a : axes) {
        if (a.values.empty())
            throw ConfigError("sweep key '" + a.key + "' has an empty value list");
        if (is_data_key(a.key))
            throw ConfigError("sweep key '" + a.key + "' changes the dataset; run separate sweeps");
        if (a.key == "seed")
            throw ConfigError("use --seeds to vary the seed");
    }

    // Cross product, last axis fastest.
    std::vector<std::vector<std::string>> combos(1);
    for (const SweepAxis& a : axes) {
        std::vector<std::vector<std::string>> next;
        for (const auto& prefix : combos)
            for (const std::string& v : a.values) {
                auto c = prefix;
                c.push_back(v);
                next.push_back(std::move(c));
            }
        combos = std::move(next);
    }

    std::vector<RunConfig> configs;
    for (const auto& combo : combos)
        for (std::uint64_t seed : seeds) {
            Settings s = base;
            for (std::size_t i = 0; i < axes.size(); ++i)
                s[axes[i].key] = combo[i];
            s["seed"] = std::to_string(seed);
            configs.push_back(resolve(s));
        }

    const Splits data = load_splits(configs.front().data);
    std::vector<TrainConfig> grid;
    for (const RunConfig& c : configs)
        grid.push_back(c.train);
    const SweepResult result = sweep(grid, data.train, data.val, data.test, jobs);

    SweepReport report;
    report.axes = axes;
    const fs::path out_dir = configs.front().out_dir;
    fs::create_directories(out_dir);
    for (std::size_t i = 0; i < configs.size(); ++i)
        write_metrics_csv(result.runs[i], out_dir / (run_stem(configs[i]) + ".csv"));

    for (std::size_t c = 0; c < combos.size(); ++c) {
        SweepRow row;
        row.values = combos[c];
        std::vector<double> test, val;
        for (std::size_t k = 0; k < seeds.size(); ++k) {
            const Metrics& m = result.runs[c * seeds.size() + k];
            test.push_back(m.test_err);
            val.push_back(best_val_err(m));
        }
        row.n_runs = test.size();
        row.mean_test_err = std::accumulate(test.begin(), test.end(), 0.0) / static_cast<double>(test.size());
        row.mean_val_err = std::accumulate(val.begin(), val.end(), 0.0) / static_cast<double>(val.size());
        if (test.size() > 1) {
            double ss = 0.0;
            for (double x : test)
                ss += (x - row.mean_test_err) * (x - row.mean_test_err);
            row.std_test_err = std::sqrt(ss / static_cast<double>(test.size() - 1));
        }
        report.rows.push_back(std::move(row));
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < report.rows.size(); ++i)
        if (report.rows[i].mean_val_err < report.rows[best].mean_val_err)
            best = i;
    report.rows[best].best = true;

    Settings hash_basis = base;
    for (const SweepAxis& a : axes) {
        std::string joined;
        for (const std::string& v : a.values)
            joined += (joined.empty() ? "" : ",") + v;
        hash_basis[a.key] = joined;
    }
    report.summary_csv = out_dir / ("sweep-" + config_hash(hash_basis) + ".csv");
    std::ofstream out(report.summary_csv, std::ios::trunc);
    write_sweep_csv(report, out);
    return report;
}

void write_sweep_csv(const SweepReport& report, std::ostream& out) {
    for (const SweepAxis& a : report.axes)
        out << a.key << ',';
    out << "n_runs,mean_test_err,std_test_err,mean_val_err,best\n";
    out.precision(10);
    for (const SweepRow& r : report.rows) {
        for (const std::string& v : r.values)
            out << v << ',';
        out << r.n_runs << ',' << r.mean_test_err << ',' << r.std_test_err << ','
            << r.mean_val_err << ',' << (r.best ? 1 : 0) << '\n';
    }
}

// ---------------------------------------------------------------------------

void write_graph_report(const RunConfig& cfg, std::ostream& out) {
    const Topology t = generate(cfg.train.generator);
    const std::size_t raw = raw_feature_dim(cfg.data);
    const std::size_t classes = class_count(cfg.data);
    const std::size_t base = cfg.train.fusion.fused_dim(raw, classes);

    out << to_edge_list(t);
    out << "synapses: " << t.n_synapses() << '\n';
    out << "base_dim: " << base << '\n';
    out << "neuron in_degree out_degree d_in d_out\n";
    for (std::size_t j = 0; j < t.n_neurons(); ++j)
        out << j << ' ' << t.in_degree(j) << ' ' << t.out_degree(j) << ' '
            << base + t.in_degree(j) * cfg.train.d_out << ' ' << cfg.train.d_out << '\n';
    out << "readout_cols: " << t.n_neurons() * cfg.train.d_out << '\n';
    out << "cyclic: " << (has_cycle(t) ? "yes" : "no") << '\n';
}

} // namespace cyclicff
