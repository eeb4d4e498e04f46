#include "cyclicff/config.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

namespace cyclicff {

namespace fs = std::filesystem;

ConfigError::ConfigError(const std::string& message, std::size_t line)
    : ParameterError(line > 0 ? "line " + std::to_string(line) + ": " + message : message),
      line_(line) {}

const Settings& default_settings() {
    static const Settings defaults{
        // data
        {"dataset", "blobs"},
        {"data_dir", ""},
        {"mnist_dir", ""},
        {"train_path", ""},
        {"test_path", ""},
        {"val_fraction", "auto"},
        {"train_limit", "0"},
        {"test_limit", "0"},
        {"blobs_per_class", "1000"},
        {"blobs_test_per_class", "500"},
        {"blobs_dim", "20"},
        {"blobs_classes", "2"},
        {"blobs_separation", "6"},
        {"data_seed", "0"},
        // graph
        {"graph", "complete"},
        {"n", "4"},
        {"ws_k", "2"},
        {"ws_p", "0.3"},
        {"ba_m", "2"},
        {"graph_seed", "auto"},
        // model and optimisation
        {"d_out", "200"},
        {"T", "3"},
        {"theta", "1"},
        {"lr", "0.001"},
        {"weight_decay", "0"},
        {"batch_size", "64"},
        {"max_epochs", "100"},
        {"patience", "10"},
        {"seed", "1"},
        {"freeze_neurons", "false"},
        {"freeze_readout", "false"},
        {"fusion", "auto"},
        {"baseline", "none"},
        {"timing", "wall"},
        {"out_dir", "runs"},
    };
    return defaults;
}

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Typed accessors that know which line a key came from.
class Reader {
public:
    Reader(const Settings& s, const LineMap* lines) : s_(s), lines_(lines) {}

    const std::string& text(const std::string& key) const { return s_.at(key); }

    std::size_t count(const std::string& key) const {
        const std::string& v = text(key);
        std::size_t out = 0;
        auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || end != v.data() + v.size())
            fail(key, "expected a non-negative integer, got '" + v + "'");
        return out;
    }
    std::uint64_t u64(const std::string& key) const {
        const std::string& v = text(key);
        std::uint64_t out = 0;
        auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || end != v.data() + v.size())
            fail(key, "expected an unsigned integer, got '" + v + "'");
        return out;
    }
    double real(const std::string& key) const {
        const std::string& v = text(key);
        double out = 0.0;
        auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || end != v.data() + v.size() || !std::isfinite(out))
            fail(key, "expected a number, got '" + v + "'");
        return out;
    }
    bool flag(const std::string& key) const {
        const std::string& v = text(key);
        if (v == "true" || v == "1" || v == "yes" || v == "on")
            return true;
        if (v == "false" || v == "0" || v == "no" || v == "off")
            return false;
        fail(key, "expected true or false, got '" + v + "'");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& why) const {
        std::size_t line = 0;
        if (lines_ != nullptr)
            if (auto it = lines_->find(key); it != lines_->end())
                line = it->second;
        throw ConfigError(key + ": " + why, line);
    }

private:
    const Settings& s_;
    const LineMap* lines_;
};

template <typename Fn>
auto checked(const Reader& r, const std::string& key, Fn parse) {
    try {
        return parse(r.text(key));
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        r.fail(key, e.what());
    }
}

std::string env_data_dir() {
    const char* v = std::getenv("CYCLIC_FF_DATA_DIR");
    return v == nullptr ? std::string() : std::string(v);
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace

Settings parse_config_text(std::string_view text, LineMap* lines) {
    Settings out;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        const std::string content = trim(line);
        if (content.empty())
            continue;
        const auto eq = content.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected 'key = value', got '" + content + "'", line_no);
        const std::string key = trim(std::string_view(content).substr(0, eq));
        const std::string value = trim(std::string_view(content).substr(eq + 1));
        if (key.empty())
            throw ConfigError("missing key before '='", line_no);
        if (!default_settings().contains(key))
            throw ConfigError("unknown key '" + key + "'", line_no);
        if (out.contains(key))
            throw ConfigError("duplicate key '" + key + "'", line_no);
        out[key] = value;
        if (lines != nullptr)
            (*lines)[key] = line_no;
    }
    return out;
}

Settings read_config_file(const fs::path& path, LineMap* lines) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config file '" + path.string() + "'");
    const std::string text{std::istreambuf_iterator<char>(in), {}};
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        // A run manifest: replay its recorded settings.
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("'" + path.string() + "': invalid JSON: " + e.what());
        }
        if (!doc.contains("config") || !doc["config"].is_object())
            throw ConfigError("'" + path.string() + "': manifest has no config object");
        Settings out;
        for (auto& [key, value] : doc["config"].items()) {
            if (!default_settings().contains(key))
                throw ConfigError("manifest: unknown key '" + key + "'");
            out[key] = value.get<std::string>();
        }
        return out;
    }
    return parse_config_text(text, lines);
}

void apply_override(Settings& s, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos)
        throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
    const std::string key = trim(assignment.substr(0, eq));
    if (!default_settings().contains(key))
        throw ConfigError("unknown key '" + key + "' in override");
    s[key] = trim(assignment.substr(eq + 1));
}

RunConfig resolve(const Settings& given, const LineMap* lines) {
    Settings s = default_settings();
    for (const auto& [k, v] : given) {
        if (!s.contains(k))
            throw ConfigError("unknown key '" + k + "'");
        s[k] = v;
    }
    const Reader r(s, lines);
    RunConfig cfg;
    DataConfig& d = cfg.data;
    TrainConfig& t = cfg.train;

    const std::string& dataset = r.text("dataset");
    if (dataset == "mnist")
        d.kind = DatasetKind::mnist;
    else if (dataset == "embeddings")
        d.kind = DatasetKind::embeddings;
    else if (dataset == "blobs")
        d.kind = DatasetKind::blobs;
    else
        r.fail("dataset", "expected mnist, embeddings or blobs, got '" + dataset + "'");

    if (s["data_dir"].empty())
        s["data_dir"] = env_data_dir();
    const fs::path data_dir = s["data_dir"];
    auto under_data_dir = [&](const std::string& p) -> fs::path {
        if (p.empty())
            return {};
        const fs::path path = p;
        if (path.is_relative() && !fs::exists(path) && !data_dir.empty())
            return data_dir / path;
        return path;
    };
    if (s["mnist_dir"].empty() && !data_dir.empty())
        s["mnist_dir"] = (data_dir / "mnist").string();
    d.mnist_dir = under_data_dir(s["mnist_dir"]);
    d.train_path = under_data_dir(s["train_path"]);
    d.test_path = under_data_dir(s["test_path"]);

    // MNIST keeps its 50k/10k train/validation split.
    if (s["val_fraction"] == "auto")
        s["val_fraction"] = d.kind == DatasetKind::mnist ? format_double(1.0 / 6.0) : "0.2";
    d.val_fraction = r.real("val_fraction");
    if (!(d.val_fraction >= 0.0 && d.val_fraction < 1.0))
        r.fail("val_fraction", "must lie in [0, 1)");
    d.train_limit = r.count("train_limit");
    d.test_limit = r.count("test_limit");
    d.blobs_per_class = r.count("blobs_per_class");
    d.blobs_test_per_class = r.count("blobs_test_per_class");
    d.blobs_dim = r.count("blobs_dim");
    d.blobs_classes = r.count("blobs_classes");
    d.blobs_separation = r.real("blobs_separation");
    d.data_seed = r.u64("data_seed");

    t.generator.kind = checked(r, "graph", [](const std::string& v) { return parse_graph_kind(v); });
    t.generator.n = r.count("n");
    t.generator.ws_k = r.count("ws_k");
    t.generator.ws_p = r.real("ws_p");
    t.generator.ba_m = r.count("ba_m");
    t.seed = r.u64("seed");
    t.generator.seed = s["graph_seed"] == "auto" ? t.seed : r.u64("graph_seed");

    t.d_out = r.count("d_out");
    t.steps = r.count("T");
    t.theta = r.real("theta");
    t.lr = r.real("lr");
    t.weight_decay = r.real("weight_decay");
    t.batch_size = r.count("batch_size");
    t.max_epochs = r.count("max_epochs");
    t.patience = r.count("patience");
    t.freeze_neurons = r.flag("freeze_neurons");
    t.freeze_readout = r.flag("freeze_readout");
    if (s["fusion"] == "auto")
        s["fusion"] = d.kind == DatasetKind::mnist ? "overlay" : "concat";
    t.fusion.kind = checked(r, "fusion", [](const std::string& v) { return parse_fusion_kind(v); });
    t.baseline = checked(r, "baseline", [](const std::string& v) { return parse_baseline(v); });
    const std::string& timing = s["timing"];
    if (timing != "wall" && timing != "off")
        r.fail("timing", "expected wall or off, got '" + timing + "'");
    t.record_wall_time = timing == "wall";
    cfg.out_dir = s["out_dir"];

    try {
        t.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    cfg.effective = std::move(s);
    return cfg;
}

std::string canonical_text(const Settings& s) {
    std::string out;
    for (const auto& [k, v] : s)
        out += k + " = " + v + "\n";
    return out;
}

std::string config_hash(const Settings& s) {
    Settings without_seed = s;
    without_seed.erase("seed");
    // Output locations do not change what is computed.
    without_seed.erase("out_dir");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(canonical_text(without_seed))));
    return buf;
}

// ---------------------------------------------------------------------------

namespace {

// First existing candidate among the plain and gzip names.
fs::path find_idx(const fs::path& dir, const std::string& stem) {
    for (const char* suffix : {"", ".gz"}) {
        const fs::path p = dir / (stem + suffix);
        if (fs::exists(p))
            return p;
    }
    throw ConfigError("dataset file '" + (dir / stem).string() + "[.gz]' not found" +
                      (dir.empty() ? " (set mnist_dir, data_dir or CYCLIC_FF_DATA_DIR)" : ""));
}

void require_file(const fs::path& p, const char* key) {
    if (p.empty())
        throw ConfigError(std::string(key) + " must be set for dataset = embeddings");
    if (!fs::exists(p))
        throw ConfigError(std::string(key) + ": dataset file '" + p.string() + "' not found");
}

Dataset head(const Dataset& d, std::size_t limit) {
    if (limit == 0 || limit >= d.size())
        return d;
    std::vector<std::size_t> idx(limit);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Dataset out = subset(d, idx);
    out.name = d.name;
    return out;
}

} // namespace

void check_data_available(const DataConfig& cfg) {
    switch (cfg.kind) {
    case DatasetKind::mnist:
        for (const char* stem : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                                 "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"})
            find_idx(cfg.mnist_dir, stem);
        break;
    case DatasetKind::embeddings:
        require_file(cfg.train_path, "train_path");
        require_file(cfg.test_path, "test_path");
        break;
    case DatasetKind::blobs:
        if (cfg.blobs_classes > cfg.blobs_dim || cfg.blobs_classes < 2)
            throw ConfigError("blobs_classes must lie in [2, blobs_dim]");
        break;
    }
}

Splits load_splits(const DataConfig& cfg) {
    check_data_available(cfg);
    Dataset pool;
    Dataset test;
    switch (cfg.kind) {
    case DatasetKind::mnist:
        pool = load_mnist_idx(find_idx(cfg.mnist_dir, "train-images-idx3-ubyte"),
                              find_idx(cfg.mnist_dir, "train-labels-idx1-ubyte"));
        test = load_mnist_idx(find_idx(cfg.mnist_dir, "t10k-images-idx3-ubyte"),
                              find_idx(cfg.mnist_dir, "t10k-labels-idx1-ubyte"));
        pool.name = "mnist";
        test.name = "mnist:test";
        break;
    case DatasetKind::embeddings:
        pool = load_embeddings(cfg.train_path);
        test = load_embeddings(cfg.test_path);
        if (pool.dim() != test.dim() || pool.n_classes != test.n_classes)
            throw ConsistencyError("embedding train and test files disagree on dim or classes");
        break;
    case DatasetKind::blobs: {
        // One draw for train+test so both share the class directions.
        const Dataset all = synth_blobs(cfg.blobs_per_class + cfg.blobs_test_per_class, cfg.blobs_dim,
                                        cfg.blobs_classes, cfg.blobs_separation,
                                        Rng(cfg.data_seed, Stream::synth_data));
        const std::size_t n_test = cfg.blobs_test_per_class * cfg.blobs_classes;
        std::vector<std::size_t> test_idx(n_test), pool_idx(all.size() - n_test);
        std::iota(test_idx.begin(), test_idx.end(), std::size_t{0});
        std::iota(pool_idx.begin(), pool_idx.end(), n_test);
        pool = subset(all, pool_idx);
        test = subset(all, test_idx);
        pool.name = "blobs";
        test.name = "blobs:test";
        break;
    }
    }
    Split split = split_dataset(pool, cfg.val_fraction, Rng(cfg.data_seed, Stream::data_shuffle));
    return Splits{head(split.train, cfg.train_limit), std::move(split.val), head(test, cfg.test_limit)};
}

std::size_t raw_feature_dim(const DataConfig& cfg) {
    switch (cfg.kind) {
    case DatasetKind::mnist:
        return 784;
    case DatasetKind::blobs:
        return cfg.blobs_dim;
    case DatasetKind::embeddings:
        require_file(cfg.train_path, "train_path");
        return load_embeddings(cfg.train_path).dim();
    }
    return 0;
}

std::size_t class_count(const DataConfig& cfg) {
    switch (cfg.kind) {
    case DatasetKind::mnist:
        return 10;
    case DatasetKind::blobs:
        return cfg.blobs_classes;
    case DatasetKind::embeddings:
        require_file(cfg.train_path, "train_path");
        return load_embeddings(cfg.train_path).n_classes;
    }
    return 0;
}

} // namespace cyclicff
