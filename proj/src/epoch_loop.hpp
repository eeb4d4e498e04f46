#pragma once

// Epoch driver shared by the FF trainer and the backprop baseline.

#include "cyclicff/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <utility>

namespace cyclicff::detail {

struct EpochStats {
    double neuron_loss = 0.0;   // batch-weighted mean
    double readout_loss = 0.0;  // batch-weighted mean
    std::size_t train_errors = 0;
};

/// run_epoch(model, batches, neg_rng) -> EpochStats; score(model, dataset) -> error %.
/// Leaves `model` at the best snapshot.
template <typename Model, typename RunEpoch, typename Score>
Metrics drive_epochs(const TrainConfig& cfg, Model& model, const Dataset& train, const Dataset& val,
                     RunEpoch run_epoch, Score score) {
    Metrics metrics;
    metrics.seed = cfg.seed;
    EarlyStopper stopper(cfg.patience);
    Model best = model;
    const Rng shuffle_root(cfg.seed, Stream::data_shuffle);
    const Rng negative_root(cfg.seed, Stream::negative_labels);

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        const auto batches = epoch_batches(train.size(), cfg.batch_size, shuffle_root.substream(epoch));
        Rng neg_rng = negative_root.substream(epoch);
        const EpochStats stats = run_epoch(model, batches, neg_rng);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.neuron_loss = stats.neuron_loss;
        rec.readout_loss = stats.readout_loss;
        rec.train_err = train.size() == 0
                            ? std::numeric_limits<double>::quiet_NaN()
                            : 100.0 * static_cast<double>(stats.train_errors) /
                                  static_cast<double>(train.size());
        rec.val_err = val.size() == 0 ? std::numeric_limits<double>::quiet_NaN() : score(model, val);
        if (cfg.record_wall_time)
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        metrics.epochs.push_back(rec);

        // Without a validation set the training readout loss is monitored.
        double monitored = val.size() == 0 ? rec.readout_loss : rec.val_err;
        if (std::isnan(monitored))
            monitored = std::numeric_limits<double>::infinity();
        if (stopper.update(epoch, monitored) || stopper.best_epoch() == 0)
            best = model;
        if (stopper.should_stop())
            break;
    }
    metrics.best_epoch = stopper.best_epoch();
    model = std::move(best);
    return metrics;
}

} // namespace cyclicff::detail
