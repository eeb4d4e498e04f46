#pragma once

#include "cyclicff/data.hpp"
#include "cyclicff/graph.hpp"
#include "cyclicff/network.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace cyclicff {

enum class Baseline { none, bp_chain };

std::string_view to_string(Baseline b);
Baseline parse_baseline(std::string_view name);

struct TrainConfig {
    GeneratorSpec generator{};
    std::size_t d_out = 200;
    std::size_t steps = 3;  // T
    double theta = 1.0;
    double lr = 1e-3;
    double weight_decay = 0.0;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 100;
    std::size_t patience = 10;
    std::uint64_t seed = 1;
    bool freeze_neurons = false;
    bool freeze_readout = false;
    FusionMode fusion{};
    Baseline baseline = Baseline::none;
    /// When false the per-epoch seconds column is written as 0 so that runs
    /// compare byte-for-byte.
    bool record_wall_time = true;

    void validate() const;
    AdamHyper adam() const { return AdamHyper{lr, 0.9, 0.999, 1e-8, weight_decay}; }
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double neuron_loss = 0.0;
    double readout_loss = 0.0;
    double train_err = 0.0;  // % over the epoch's training batches, pre-update readout
    double val_err = 0.0;    // % on the validation set; NaN when it is empty
    double seconds = 0.0;
};

struct Metrics {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    double test_err = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t seed = 0;
};

/// Header: epoch,neuron_loss,readout_loss,train_err,val_err,seconds
void write_metrics_csv(const Metrics& m, std::ostream& out);
void write_metrics_csv(const Metrics& m, const std::filesystem::path& path);

/// Patience rule: stop once `patience` consecutive epochs fail to strictly
/// improve on the best monitored value.
class EarlyStopper {
public:
    explicit EarlyStopper(std::size_t patience);

    /// Records one epoch; true when it is a new best.
    bool update(std::size_t epoch, double monitored);
    bool should_stop() const { return since_best_ >= patience_; }
    std::size_t best_epoch() const { return best_epoch_; }
    double best_value() const { return best_; }

private:
    std::size_t patience_;
    std::size_t best_epoch_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
    std::size_t since_best_ = 0;
};

/// 100 * misclassified / total. Throws UndefinedMetric on empty input.
double error_rate(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);
double evaluate(const CyclicNet& net, const Dataset& d);

struct TrainResult {
    CyclicNet net;
    Metrics metrics;
};

/// Builds the network for cfg and the datasets' shape.
CyclicNet make_network(const TrainConfig& cfg, std::size_t raw_dim, std::size_t n_classes);

/// Epoch loop with early stopping on validation error (or on the mean
/// readout loss when val is empty). Returns the best-epoch snapshot.
TrainResult train_loop(const TrainConfig& cfg, const Dataset& train, const Dataset& val);

// ---------------------------------------------------------------------------
// BP-Chain*: a plain MLP trained end to end with backpropagation.
// ---------------------------------------------------------------------------
inline constexpr std::size_t kBpHiddenLayers = 4;

/// Hidden layers are ReLU(x Wᵀ + b); the head is softmax(x Wᵀ + b).
struct MlpModel {
    std::vector<Matrix> weights;  // out x in, per layer
    std::vector<Matrix> biases;   // 1 x out, per layer
    std::vector<AdamState> adam_w;
    std::vector<AdamState> adam_b;

    static MlpModel init(std::size_t raw_dim, std::size_t width, std::size_t hidden_layers,
                         std::size_t n_classes, AdamHyper hyper, Rng rng);
    std::size_t n_layers() const { return weights.size(); }
};

struct MlpGrad {
    double loss = 0.0;
    std::vector<Matrix> weights;
    std::vector<Matrix> biases;
};

Matrix mlp_logits(const MlpModel& m, const Matrix& x);
std::vector<std::size_t> mlp_predict(const MlpModel& m, const Matrix& x);
double mlp_loss(const MlpModel& m, const Matrix& x, std::span<const std::size_t> labels);
/// Mean softmax cross-entropy and its exact gradient by backpropagation.
MlpGrad mlp_loss_and_grad(const MlpModel& m, const Matrix& x, std::span<const std::size_t> labels);
void mlp_step(MlpModel& m, const MlpGrad& g);
double evaluate(const MlpModel& m, const Dataset& d);

struct BaselineResult {
    MlpModel model;
    Metrics metrics;
};

/// Same batching, optimizer and early stopping as train_loop, on raw
/// (unfused) features.
BaselineResult bp_chain_baseline(const TrainConfig& cfg, const Dataset& train, const Dataset& val);

// ---------------------------------------------------------------------------
// Sweeps.
// ---------------------------------------------------------------------------
struct SweepResult {
    std::vector<Metrics> runs;  // one per grid entry, test_err filled in
    std::size_t best_index = 0; // lowest best-epoch validation error
};

/// Trains one config (FF network or baseline) and scores it on test.
Metrics run_config(const TrainConfig& cfg, const Dataset& train, const Dataset& val,
                   const Dataset& test);

/// Runs every config independently, up to `jobs` at a time; the result is
/// independent of `jobs`.
SweepResult sweep(const std::vector<TrainConfig>& grid, const Dataset& train, const Dataset& val,
                  const Dataset& test, std::size_t jobs = 1);

/// Validation error of the epoch that early stopping kept.
double best_val_err(const Metrics& m);

} // namespace cyclicff
