#include "cyclicff/training.hpp"

#include "epoch_loop.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace cyclicff {

std::string_view to_string(Baseline b) {
    return b == Baseline::none ? "none" : "bp-chain";
}

Baseline parse_baseline(std::string_view name) {
    if (name == "none")
        return Baseline::none;
    if (name == "bp-chain")
        return Baseline::bp_chain;
    throw ParameterError("unknown baseline '" + std::string(name) + "' (expected none or bp-chain)");
}

void TrainConfig::validate() const {
    generator.validate();
    if (d_out < 1 || steps < 1 || batch_size < 1 || max_epochs < 1)
        throw ParameterError("config: d_out, T, batch_size and max_epochs must all be >= 1");
    if (patience < 1)
        throw ParameterError("config: patience must be >= 1");
    if (!(lr > 0.0))
        throw ParameterError("config: lr must be positive");
    if (!(weight_decay >= 0.0))
        throw ParameterError("config: weight_decay must be non-negative");
    if (!(theta >= 0.0))
        throw ParameterError("config: theta must be non-negative");
}

// ---------------------------------------------------------------------------

namespace {

void put_number(std::ostream& out, double v) {
    if (std::isnan(v))
        out << "nan";
    else
        out << v;
}

} // namespace

void write_metrics_csv(const Metrics& m, std::ostream& out) {
    out << "epoch,neuron_loss,readout_loss,train_err,val_err,seconds\n";
    out << std::setprecision(17);
    for (const EpochRecord& r : m.epochs) {
        out << r.epoch << ',';
        put_number(out, r.neuron_loss);
        out << ',';
        put_number(out, r.readout_loss);
        out << ',';
        put_number(out, r.train_err);
        out << ',';
        put_number(out, r.val_err);
        out << ',';
        put_number(out, r.seconds);
        out << '\n';
    }
}

void write_metrics_csv(const Metrics& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    write_metrics_csv(m, out);
    if (!out)
        throw Error("could not write metrics '" + path.string() + "'");
}

// ---------------------------------------------------------------------------

EarlyStopper::EarlyStopper(std::size_t patience) : patience_(patience) {
    if (patience < 1)
        throw ParameterError("early stopping: patience must be >= 1");
}

bool EarlyStopper::update(std::size_t epoch, double monitored) {
    if (monitored < best_) {
        best_ = monitored;
        best_epoch_ = epoch;
        since_best_ = 0;
        return true;
    }
    ++since_best_;
    return false;
}

double error_rate(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
    if (predicted.size() != truth.size())
        throw ShapeError("error_rate: prediction and label counts differ");
    if (truth.empty())
        throw UndefinedMetric("error rate of an empty dataset");
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        wrong += predicted[i] != truth[i] ? 1 : 0;
    return 100.0 * static_cast<double>(wrong) / static_cast<double>(truth.size());
}

double evaluate(const CyclicNet& net, const Dataset& d) {
    if (d.size() == 0)
        throw UndefinedMetric("evaluate: empty dataset '" + d.name + "'");
    return error_rate(predict(net, d.features), d.labels);
}

CyclicNet make_network(const TrainConfig& cfg, std::size_t raw_dim, std::size_t n_classes) {
    NetworkSpec spec;
    spec.raw_dim = raw_dim;
    spec.n_classes = n_classes;
    spec.fusion = cfg.fusion;
    spec.d_out = cfg.d_out;
    spec.theta = cfg.theta;
    spec.steps = cfg.steps;
    spec.adam = cfg.adam();
    return build_network(generate(cfg.generator), spec, Rng(cfg.seed, Stream::weights));
}

namespace {

void check_datasets(const Dataset& train, const Dataset& val) {
    train.validate();
    val.validate();
    if (val.size() > 0 && (train.dim() != val.dim() || train.n_classes != val.n_classes))
        throw ParameterError("train and validation sets disagree on dim or class count");
}

} // namespace

TrainResult train_loop(const TrainConfig& cfg, const Dataset& train, const Dataset& val) {
    cfg.validate();
    check_datasets(train, val);
    if (cfg.baseline != Baseline::none)
        throw ParameterError("train_loop: config selects the bp-chain baseline");

    TrainResult result{make_network(cfg, train.dim(), train.n_classes), {}};
    const TrainFlags flags{cfg.freeze_neurons, cfg.freeze_readout};

    auto run_epoch = [&](CyclicNet& net, const std::vector<std::vector<std::size_t>>& batches,
                         Rng& neg_rng) {
        detail::EpochStats stats;
        std::size_t seen = 0;
        for (const auto& idx : batches) {
            const Matrix x = gather_rows(train.features, idx);
            std::vector<std::size_t> y;
            y.reserve(idx.size());
            for (std::size_t i : idx)
                y.push_back(train.labels[i]);
            const FusedBatch fused = fuse_inputs(x, y, train.n_classes, cfg.fusion, neg_rng);
            const IterationResult it = train_iteration(net, fused, flags);

            double mean_neuron = 0.0;
            for (double l : it.neuron_losses)
                mean_neuron += l;
            mean_neuron /= static_cast<double>(it.neuron_losses.size());
            const double w = static_cast<double>(idx.size());
            stats.neuron_loss += mean_neuron * w;
            stats.readout_loss += it.readout_loss * w;
            stats.train_errors += it.readout_errors;
            seen += idx.size();
        }
        if (seen > 0) {
            stats.neuron_loss /= static_cast<double>(seen);
            stats.readout_loss /= static_cast<double>(seen);
        }
        return stats;
    };
    auto score = [](const CyclicNet& net, const Dataset& d) { return evaluate(net, d); };

    result.metrics = detail::drive_epochs(cfg, result.net, train, val, run_epoch, score);
    return result;
}

double best_val_err(const Metrics& m) {
    for (const EpochRecord& r : m.epochs)
        if (r.epoch == m.best_epoch)
            return r.val_err;
    return std::numeric_limits<double>::quiet_NaN();
}

} // namespace cyclicff
