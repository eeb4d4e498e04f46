#include "cyclicff/training.hpp"

#include "epoch_loop.hpp"

#include <cmath>

namespace cyclicff {

namespace {

// x · Wᵀ + b, with b broadcast over rows.
Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
    Matrix z = matmul_nt(x, w);
    for (std::size_t r = 0; r < z.rows(); ++r) {
        auto row = z.row(r);
        for (std::size_t c = 0; c < row.size(); ++c)
            row[c] += b(0, c);
    }
    return z;
}

// activations[0] is the input, activations[l] the output of hidden layer l.
std::vector<Matrix> hidden_activations(const MlpModel& m, const Matrix& x) {
    if (m.n_layers() == 0 || x.cols() != m.weights.front().cols())
        throw ShapeError("mlp: input has " + std::to_string(x.cols()) + " columns");
    std::vector<Matrix> acts{x};
    for (std::size_t l = 0; l + 1 < m.n_layers(); ++l) {
        Matrix z = affine(acts.back(), m.weights[l], m.biases[l]);
        relu_inplace(z);
        acts.push_back(std::move(z));
    }
    return acts;
}

double cross_entropy_row(std::span<const double> z, std::size_t y) {
    const double peak = z[argmax(z)];
    double total = 0.0;
    for (double v : z)
        total += std::exp(v - peak);
    return peak + std::log(total) - z[y];
}

} // namespace

MlpModel MlpModel::init(std::size_t raw_dim, std::size_t width, std::size_t hidden_layers,
                        std::size_t n_classes, AdamHyper hyper, Rng rng) {
    if (raw_dim == 0 || width == 0 || n_classes < 2)
        throw ParameterError("mlp: dimensions must be positive and n_classes >= 2");
    MlpModel m;
    std::size_t fan_in = raw_dim;
    for (std::size_t l = 0; l <= hidden_layers; ++l) {
        const std::size_t fan_out = l == hidden_layers ? n_classes : width;
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Rng layer_rng = rng.substream(l);
        Matrix w(fan_out, fan_in);
        for (double& v : w.values())
            v = layer_rng.uniform(-bound, bound);
        Matrix b(1, fan_out);
        for (double& v : b.values())
            v = layer_rng.uniform(-bound, bound);
        m.adam_w.push_back(AdamState::fresh(fan_out, fan_in, hyper));
        m.adam_b.push_back(AdamState::fresh(1, fan_out, hyper));
        m.weights.push_back(std::move(w));
        m.biases.push_back(std::move(b));
        fan_in = fan_out;
    }
    return m;
}

Matrix mlp_logits(const MlpModel& m, const Matrix& x) {
    const auto acts = hidden_activations(m, x);
    return affine(acts.back(), m.weights.back(), m.biases.back());
}

std::vector<std::size_t> mlp_predict(const MlpModel& m, const Matrix& x) {
    const Matrix logits = mlp_logits(m, x);
    std::vector<std::size_t> out(logits.rows());
    for (std::size_t r = 0; r < logits.rows(); ++r)
        out[r] = argmax(logits.row(r));
    return out;
}

double mlp_loss(const MlpModel& m, const Matrix& x, std::span<const std::size_t> labels) {
    const Matrix logits = mlp_logits(m, x);
    if (labels.size() != logits.rows())
        throw ShapeError("mlp_loss: label count mismatch");
    if (labels.empty())
        return 0.0;
    double loss = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r)
        loss += cross_entropy_row(logits.row(r), labels[r]);
    return loss / static_cast<double>(labels.size());
}

MlpGrad mlp_loss_and_grad(const MlpModel& m, const Matrix& x, std::span<const std::size_t> labels) {
    const auto acts = hidden_activations(m, x);
    const Matrix logits = affine(acts.back(), m.weights.back(), m.biases.back());
    if (labels.size() != logits.rows())
        throw ShapeError("mlp_loss_and_grad: label count mismatch");
    const std::size_t batch = labels.size();
    const std::size_t layers = m.n_layers();

    MlpGrad g;
    g.weights.resize(layers);
    g.biases.resize(layers);
    if (batch == 0) {
        for (std::size_t l = 0; l < layers; ++l) {
            g.weights[l] = Matrix(m.weights[l].rows(), m.weights[l].cols());
            g.biases[l] = Matrix(1, m.biases[l].cols());
        }
        return g;
    }
    const double inv_b = 1.0 / static_cast<double>(batch);

    Matrix delta = softmax_rows(logits);
    for (std::size_t r = 0; r < batch; ++r) {
        if (labels[r] >= logits.cols())
            throw ParameterError("mlp: label out of range");
        g.loss += cross_entropy_row(logits.row(r), labels[r]);
        delta(r, labels[r]) -= 1.0;
    }
    g.loss *= inv_b;
    for (double& d : delta.values())
        d *= inv_b;

    for (std::size_t l = layers; l-- > 0;) {
        g.weights[l] = matmul_tn(delta, acts[l]);
        Matrix gb(1, delta.cols());
        for (std::size_t r = 0; r < delta.rows(); ++r)
            for (std::size_t c = 0; c < delta.cols(); ++c)
                gb(0, c) += delta(r, c);
        g.biases[l] = std::move(gb);
        if (l == 0)
            break;
        Matrix back = matmul(delta, m.weights[l]);
        const Matrix& a = acts[l];
        for (std::size_t i = 0; i < back.size(); ++i)
            if (a.data()[i] <= 0.0)
                back.data()[i] = 0.0;
        delta = std::move(back);
    }
    return g;
}

void mlp_step(MlpModel& m, const MlpGrad& g) {
    if (g.weights.size() != m.n_layers() || g.biases.size() != m.n_layers())
        throw ShapeError("mlp_step: gradient layer count mismatch");
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
        adam_step(m.weights[l], g.weights[l], m.adam_w[l]);
        adam_step(m.biases[l], g.biases[l], m.adam_b[l]);
    }
}

double evaluate(const MlpModel& m, const Dataset& d) {
    if (d.size() == 0)
        throw UndefinedMetric("evaluate: empty dataset '" + d.name + "'");
    return error_rate(mlp_predict(m, d.features), d.labels);
}

BaselineResult bp_chain_baseline(const TrainConfig& cfg, const Dataset& train, const Dataset& val) {
    cfg.validate();
    train.validate();
    val.validate();
    if (val.size() > 0 && (train.dim() != val.dim() || train.n_classes != val.n_classes))
        throw ParameterError("train and validation sets disagree on dim or class count");

    BaselineResult result{MlpModel::init(train.dim(), cfg.d_out, kBpHiddenLayers, train.n_classes,
                                         cfg.adam(), Rng(cfg.seed, Stream::weights)),
                          {}};

    auto run_epoch = [&](MlpModel& model, const std::vector<std::vector<std::size_t>>& batches, Rng&) {
        detail::EpochStats stats;
        std::size_t seen = 0;
        for (const auto& idx : batches) {
            const Matrix x = gather_rows(train.features, idx);
            std::vector<std::size_t> y;
            y.reserve(idx.size());
            for (std::size_t i : idx)
                y.push_back(train.labels[i]);
            // Pre-update predictions give the running training error.
            const auto pred = mlp_predict(model, x);
            for (std::size_t r = 0; r < y.size(); ++r)
                stats.train_errors += pred[r] != y[r] ? 1 : 0;
            const MlpGrad g = mlp_loss_and_grad(model, x, y);
            mlp_step(model, g);
            stats.readout_loss += g.loss * static_cast<double>(idx.size());
            seen += idx.size();
        }
        if (seen > 0)
            stats.readout_loss /= static_cast<double>(seen);
        return stats;
    };
    auto score = [](const MlpModel& model, const Dataset& d) { return evaluate(model, d); };

    result.metrics = detail::drive_epochs(cfg, result.model, train, val, run_epoch, score);
    return result;
}

} // namespace cyclicff
