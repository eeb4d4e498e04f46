#include "cyclicff/errors.hpp"
#include "cyclicff/training.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

using namespace cyclicff;

namespace {

struct Blobs {
    Dataset train, val, test;
};

const Blobs& blobs() {
    static const Blobs b = [] {
        const Dataset pool = synth_blobs(500, 20, 2, 6.0, Rng(0, Stream::synth_data));
        std::vector<std::size_t> head(400), tail(600);
        std::iota(head.begin(), head.end(), std::size_t{0});
        std::iota(tail.begin(), tail.end(), std::size_t{400});
        const Split s = split_dataset(subset(pool, tail), 0.2, Rng(0, Stream::data_shuffle));
        return Blobs{s.train, s.val, subset(pool, head)};
    }();
    return b;
}

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.d_out = 16;
    cfg.max_epochs = 5;
    cfg.patience = 3;
    cfg.fusion = {FusionKind::concat};
    cfg.record_wall_time = false;
    return cfg;
}

std::string csv_of(const Metrics& m) {
    std::ostringstream out;
    write_metrics_csv(m, out);
    return out.str();
}

} // namespace

TEST_CASE("early stopping follows the patience rule") {
    EarlyStopper s(10);
    std::size_t stopped_at = 0;
    for (std::size_t epoch = 1; epoch <= 100; ++epoch) {
        s.update(epoch, epoch == 1 ? 10.0 : 9.0);
        if (s.should_stop()) {
            stopped_at = epoch;
            break;
        }
    }
    CHECK(stopped_at == 12);
    CHECK(s.best_epoch() == 2);
    CHECK(s.best_value() == 9.0);
    CHECK_THROWS_AS(EarlyStopper(0), ParameterError);
}

TEST_CASE("error rate arithmetic") {
    std::vector<std::size_t> truth(1000, 1), pred(1000, 1);
    CHECK(error_rate(pred, truth) == 0.0);
    pred[0] = pred[10] = pred[999] = 0;
    CHECK(error_rate(pred, truth) == doctest::Approx(0.3).epsilon(1e-15));
    std::fill(pred.begin(), pred.end(), 2);
    CHECK(error_rate(pred, truth) == 100.0);
    CHECK_THROWS_AS(error_rate({}, {}), UndefinedMetric);

    const CyclicNet net = make_network(small_config(), 20, 2);
    Dataset empty;
    empty.features = Matrix(0, 20);
    empty.n_classes = 2;
    CHECK_THROWS_AS(evaluate(net, empty), UndefinedMetric);
}

TEST_CASE("config validation") {
    TrainConfig cfg = small_config();
    cfg.patience = 0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = small_config();
    cfg.lr = 0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = small_config();
    cfg.steps = 0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    CHECK(parse_baseline("bp-chain") == Baseline::bp_chain);
    CHECK_THROWS_AS(parse_baseline("bp"), ParameterError);
}

TEST_CASE("max_epochs caps the run; metrics are well formed") {
    TrainConfig cfg = small_config();
    cfg.max_epochs = 1;
    cfg.patience = 50;
    const TrainResult r = train_loop(cfg, blobs().train, blobs().val);
    REQUIRE(r.metrics.epochs.size() == 1);
    CHECK(r.metrics.epochs[0].epoch == 1);
    CHECK(r.metrics.best_epoch == 1);
    CHECK(csv_of(r.metrics).rfind("epoch,neuron_loss,readout_loss,train_err,val_err,seconds\n", 0) == 0);
}

TEST_CASE("training is deterministic for a fixed seed") {
    const TrainConfig cfg = small_config();
    const TrainResult a = train_loop(cfg, blobs().train, blobs().val);
    const TrainResult b = train_loop(cfg, blobs().train, blobs().val);
    CHECK(csv_of(a.metrics) == csv_of(b.metrics));
    CHECK(a.net.readout_w == b.net.readout_w);

    TrainConfig other = cfg;
    other.seed = 2;
    CHECK(csv_of(train_loop(other, blobs().train, blobs().val).metrics) != csv_of(a.metrics));
}

TEST_CASE("early stopping keeps the best recorded snapshot") {
    // a hard, noisy problem so validation error moves around between epochs
    const Dataset pool = synth_blobs(150, 10, 4, 1.5, Rng(3, Stream::synth_data));
    const Split s = split_dataset(pool, 0.3, Rng(3, Stream::data_shuffle));
    TrainConfig cfg = small_config();
    cfg.max_epochs = 12;
    cfg.patience = 3;
    cfg.lr = 0.01;
    const TrainResult r = train_loop(cfg, s.train, s.val);
    double best = INFINITY;
    std::size_t best_epoch = 0;
    for (const EpochRecord& e : r.metrics.epochs) {
        CHECK(e.val_err >= 0.0);
        CHECK(e.val_err <= 100.0);
        CHECK(e.train_err >= 0.0);
        CHECK(e.train_err <= 100.0);
        if (e.val_err < best) {
            best = e.val_err;
            best_epoch = e.epoch;
        }
    }
    CHECK(r.metrics.best_epoch == best_epoch);
    CHECK(best_val_err(r.metrics) == best);
    CHECK(evaluate(r.net, s.val) == best);
    const std::size_t ran = r.metrics.epochs.size();
    CHECK((ran == cfg.max_epochs || ran - best_epoch == cfg.patience));
    for (std::size_t i = 0; i < ran; ++i) CHECK(r.metrics.epochs[i].epoch == i + 1);
}

TEST_CASE("without a validation set the readout loss is monitored") {
    Dataset empty;
    empty.features = Matrix(0, 20);
    empty.n_classes = 2;
    TrainConfig cfg = small_config();
    cfg.max_epochs = 3;
    const TrainResult r = train_loop(cfg, blobs().train, empty);
    REQUIRE(r.metrics.epochs.size() == 3);
    CHECK(std::isnan(r.metrics.epochs[0].val_err));
    std::size_t expect = 1;
    for (std::size_t i = 1; i < 3; ++i)
        if (r.metrics.epochs[i].readout_loss < r.metrics.epochs[expect - 1].readout_loss) expect = i + 1;
    CHECK(r.metrics.best_epoch == expect);
    CHECK(csv_of(r.metrics).find(",nan,") != std::string::npos);
}

TEST_CASE("FF-Complete learns separable blobs") {
    TrainConfig cfg;
    cfg.fusion = {FusionKind::concat};
    cfg.d_out = 64;
    cfg.max_epochs = 10;
    cfg.record_wall_time = false;
    const TrainResult r = train_loop(cfg, blobs().train, blobs().val);
    CHECK(evaluate(r.net, blobs().test) < 5.0);
}

TEST_CASE("freezing the readout leaves the classifier near chance") {
    for (std::size_t classes : {2, 10}) {
        const Dataset pool = synth_blobs(300, 20, classes, 6.0, Rng(4, Stream::synth_data));
        const Split s = split_dataset(pool, 0.5, Rng(4, Stream::data_shuffle));
        TrainConfig cfg = small_config();
        cfg.d_out = 200;
        cfg.freeze_readout = true;
        cfg.max_epochs = 3;
        const double chance = 100.0 * (1.0 - 1.0 / static_cast<double>(classes));
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            cfg.seed = seed;
            const TrainResult r = train_loop(cfg, s.train, s.val);
            CHECK(r.net.readout_w == make_network(cfg, 20, classes).readout_w);
            CHECK(std::abs(evaluate(r.net, s.val) - chance) <= 5.0);
        }
    }
}

TEST_CASE("BP baseline: gradients, lr = 0 and separable data") {
    const auto g = oracle::check_mlp_gradients(50, 303);
    CHECK(g.checked == 50);
    CHECK(g.worst < oracle::kGradTolerance);

    MlpModel m = MlpModel::init(20, 16, kBpHiddenLayers, 2, AdamHyper{0.0}, Rng(5, 1));
    CHECK(m.n_layers() == kBpHiddenLayers + 1);
    const MlpModel before = m;
    const Dataset& train = blobs().train;
    mlp_step(m, mlp_loss_and_grad(m, train.features, train.labels));
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
        CHECK(m.weights[l] == before.weights[l]);
        CHECK(m.biases[l] == before.biases[l]);
    }

    TrainConfig cfg = small_config();
    cfg.baseline = Baseline::bp_chain;
    cfg.max_epochs = 10;
    cfg.patience = 10;  // the deep narrow net sits on a plateau for a few epochs
    const BaselineResult r = bp_chain_baseline(cfg, blobs().train, blobs().val);
    CHECK(evaluate(r.model, blobs().test) < 2.0);
    CHECK(mlp_loss(r.model, train.features, train.labels) ==
          doctest::Approx(oracle::mlp_loss(r.model, train.features, train.labels)).epsilon(1e-10));
    CHECK_THROWS_AS(train_loop(cfg, blobs().train, blobs().val), ParameterError);
}

TEST_CASE("sweep: a one-entry grid equals a single run; results keep grid order") {
    TrainConfig cfg = small_config();
    cfg.max_epochs = 2;
    const Metrics single = run_config(cfg, blobs().train, blobs().val, blobs().test);
    const SweepResult one = sweep({cfg}, blobs().train, blobs().val, blobs().test, 1);
    REQUIRE(one.runs.size() == 1);
    CHECK(csv_of(one.runs[0]) == csv_of(single));
    CHECK(one.runs[0].test_err == single.test_err);

    std::vector<TrainConfig> grid;
    for (double theta : {0.0, 0.5, 1.0, 2.0}) {
        TrainConfig c = cfg;
        c.theta = theta;
        grid.push_back(c);
    }
    const SweepResult serial = sweep(grid, blobs().train, blobs().val, blobs().test, 1);
    const SweepResult parallel = sweep(grid, blobs().train, blobs().val, blobs().test, 3);
    REQUIRE(parallel.runs.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(csv_of(serial.runs[i]) == csv_of(parallel.runs[i]));
    CHECK(serial.best_index == parallel.best_index);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(best_val_err(serial.runs[serial.best_index]) <= best_val_err(serial.runs[i]));
    CHECK_THROWS_AS(sweep({}, blobs().train, blobs().val, blobs().test, 1), ParameterError);
}
