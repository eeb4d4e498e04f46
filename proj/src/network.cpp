#include "cyclicff/network.hpp"

#include <cmath>
#include <numeric>

namespace cyclicff {

namespace {

// Rows per chunk during inference; fixed so results do not depend on the
// size of the evaluated set.
constexpr std::size_t kPredictChunk = 1024;

Matrix readout_input(const CyclicNet& net, const std::vector<Matrix>& outputs) {
    if (outputs.size() != net.neurons.size())
        throw ShapeError("readout: expected " + std::to_string(net.neurons.size()) +
                         " neuron outputs, got " + std::to_string(outputs.size()));
    std::vector<const Matrix*> parts;
    parts.reserve(outputs.size());
    for (const Matrix& m : outputs)
        parts.push_back(&m);
    return hconcat(parts);
}

std::vector<std::size_t> default_order(std::size_t n, std::span<const std::size_t> order) {
    if (order.empty()) {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        return all;
    }
    std::vector<std::size_t> out(order.begin(), order.end());
    std::vector<bool> seen(n, false);
    if (out.size() != n)
        throw ParameterError("propagate: order must list every neuron once");
    for (std::size_t j : out) {
        if (j >= n || seen[j])
            throw ParameterError("propagate: order must list every neuron once");
        seen[j] = true;
    }
    return out;
}

} // namespace

std::size_t CyclicNet::readout_cols() const {
    std::size_t cols = 0;
    for (const NeuronParams& p : neurons)
        cols += p.d_out();
    return cols;
}

void CyclicNet::check_consistency() {
    if (neurons.size() != topology.n_neurons())
        throw ConstructionError("network: " + std::to_string(neurons.size()) + " neurons for a " +
                                std::to_string(topology.n_neurons()) + "-node topology");
    if (steps < 1)
        throw ConstructionError("network: T must be at least 1");
    preds.clear();
    for (std::size_t j = 0; j < neurons.size(); ++j) {
        preds.push_back(topology.predecessors(j));
        std::size_t expect = base_dim();
        for (std::size_t i : preds.back())
            expect += neurons[i].d_out();
        if (neurons[j].d_in() != expect)
            throw ConstructionError("network: neuron " + std::to_string(j) + " has d_in " +
                                    std::to_string(neurons[j].d_in()) + ", topology implies " +
                                    std::to_string(expect));
    }
    if (readout_w.rows() != n_classes || readout_w.cols() != readout_cols())
        throw ConstructionError("network: readout must be " + std::to_string(n_classes) + "x" +
                                std::to_string(readout_cols()));
}

CyclicNet build_network(const Topology& topology, const NetworkSpec& spec, Rng rng) {
    if (spec.steps < 1)
        throw ConstructionError("build_network: T must be at least 1");
    if (spec.d_out < 1)
        throw ConstructionError("build_network: d_out must be at least 1");
    if (spec.n_classes < 2)
        throw ConstructionError("build_network: need at least 2 classes");
    if (spec.fusion.kind == FusionKind::overlay && spec.raw_dim < spec.n_classes)
        throw ConstructionError("build_network: overlay fusion needs raw_dim >= n_classes");

    CyclicNet net;
    net.topology = topology;
    net.raw_dim = spec.raw_dim;
    net.n_classes = spec.n_classes;
    net.fusion = spec.fusion;
    net.steps = spec.steps;
    const std::size_t n = topology.n_neurons();
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t d_in = spec.base_dim() + topology.in_degree(j) * spec.d_out;
        Rng neuron_rng = rng.substream(j);
        net.neurons.push_back(NeuronParams::init(d_in, spec.d_out, spec.theta, spec.adam, neuron_rng));
    }
    const std::size_t cols = n * spec.d_out;
    net.readout_w = Matrix(spec.n_classes, cols);
    Rng readout_rng = rng.substream(n);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    for (double& w : net.readout_w.values())
        w = readout_rng.uniform(-bound, bound);
    net.readout_adam = AdamState::fresh(spec.n_classes, cols, spec.adam);
    net.check_consistency();
    return net;
}

void round_weights_to_float(CyclicNet& net) {
    auto round = [](Matrix& m) {
        for (double& x : m.values())
            x = static_cast<double>(static_cast<float>(x));
    };
    for (NeuronParams& p : net.neurons)
        round(p.W);
    round(net.readout_w);
}

// ---------------------------------------------------------------------------

std::vector<Matrix> zero_outputs(const CyclicNet& net, std::size_t batch) {
    std::vector<Matrix> out;
    out.reserve(net.neurons.size());
    for (const NeuronParams& p : net.neurons)
        out.emplace_back(batch, p.d_out());
    return out;
}

PropagationState zero_state(const CyclicNet& net, std::size_t batch) {
    PropagationState s;
    for (auto& stream : s.outputs)
        stream = zero_outputs(net, batch);
    return s;
}

Matrix neuron_input(const CyclicNet& net, std::size_t j, const Matrix& base,
                    const std::vector<Matrix>& prev) {
    if (base.cols() != net.base_dim())
        throw ShapeError("propagate: base input has " + std::to_string(base.cols()) +
                         " columns, network expects " + std::to_string(net.base_dim()));
    if (prev.size() != net.neurons.size())
        throw ShapeError("propagate: state holds " + std::to_string(prev.size()) +
                         " neurons, network has " + std::to_string(net.neurons.size()));
    std::vector<const Matrix*> parts{&base};
    for (std::size_t i : net.preds[j])
        parts.push_back(&prev[i]);
    return hconcat(parts);
}

std::vector<Matrix> propagate_stream(const CyclicNet& net, const std::vector<Matrix>& prev,
                                     const Matrix& base, std::span<const std::size_t> order) {
    std::vector<Matrix> next(net.neurons.size());
    for (std::size_t j : default_order(net.neurons.size(), order))
        next[j] = neuron_forward(net.neurons[j], neuron_input(net, j, base, prev));
    return next;
}

PropagationState propagate_step(const CyclicNet& net, const PropagationState& state,
                                const FusedBatch& fused, std::span<const std::size_t> order) {
    PropagationState next;
    next[StreamKind::pos] = propagate_stream(net, state[StreamKind::pos], fused.pos, order);
    next[StreamKind::neg] = propagate_stream(net, state[StreamKind::neg], fused.neg, order);
    next[StreamKind::neu] = propagate_stream(net, state[StreamKind::neu], fused.neu, order);
    return next;
}

// ---------------------------------------------------------------------------

ReadoutResult readout_forward_loss_grad(const CyclicNet& net, const std::vector<Matrix>& neu_outputs,
                                        std::span<const std::size_t> labels) {
    const Matrix input = readout_input(net, neu_outputs);
    if (labels.size() != input.rows())
        throw ShapeError("readout: " + std::to_string(input.rows()) + " rows but " +
                         std::to_string(labels.size()) + " labels");
    const Matrix logits = matmul_nt(input, net.readout_w);
    ReadoutResult out{softmax_rows(logits), 0.0, {}};

    const std::size_t batch = labels.size();
    Matrix delta = out.probs;  // softmax - onehot
    for (std::size_t r = 0; r < batch; ++r) {
        const std::size_t y = labels[r];
        if (y >= net.n_classes)
            throw ParameterError("readout: label " + std::to_string(y) + " out of range");
        // -log softmax_y, via log-sum-exp for saturated rows.
        auto z = logits.row(r);
        const double peak = z[argmax(z)];
        double total = 0.0;
        for (double v : z)
            total += std::exp(v - peak);
        out.loss += peak + std::log(total) - z[y];
        delta(r, y) -= 1.0;
    }
    if (batch == 0) {
        out.grad = Matrix(net.readout_w.rows(), net.readout_w.cols());
        return out;
    }
    const double inv_b = 1.0 / static_cast<double>(batch);
    out.loss *= inv_b;
    for (double& d : delta.values())
        d *= inv_b;
    out.grad = matmul_tn(delta, input);
    return out;
}

ReadoutResult readout_forward_loss_grad(const CyclicNet& net, const PropagationState& state,
                                        std::span<const std::size_t> labels) {
    return readout_forward_loss_grad(net, state[StreamKind::neu], labels);
}

IterationResult train_iteration(CyclicNet& net, const FusedBatch& fused, TrainFlags flags) {
    if (fused.pos.cols() != net.base_dim())
        throw ShapeError("train_iteration: fused width " + std::to_string(fused.pos.cols()) +
                         " but network base_dim is " + std::to_string(net.base_dim()));
    const std::size_t n = net.neurons.size();
    IterationResult result;
    result.neuron_losses.assign(n, 0.0);

    PropagationState prev = zero_state(net, fused.size());
    for (std::size_t t = 0; t < net.steps; ++t) {
        PropagationState next;
        for (auto& stream : next.outputs)
            stream.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            NeuronParams& neuron = net.neurons[j];
            NeuronActivation pos =
                neuron_forward_cached(neuron, neuron_input(net, j, fused.pos, prev[StreamKind::pos]));
            NeuronActivation neg =
                neuron_forward_cached(neuron, neuron_input(net, j, fused.neg, prev[StreamKind::neg]));
            next[StreamKind::neu][j] =
                neuron_forward(neuron, neuron_input(net, j, fused.neu, prev[StreamKind::neu]));

            if (flags.freeze_neurons) {
                result.neuron_losses[j] += ff_loss_from_outputs(neuron.theta, pos.output, neg.output);
            } else {
                FfLossGrad lg = ff_loss_and_grad(neuron, pos, neg);
                result.neuron_losses[j] += lg.loss;
                neuron_step(neuron, lg.grad_w);
            }
            // Cached outputs are the pre-update ones; they feed round t + 1.
            next[StreamKind::pos][j] = std::move(pos.output);
            next[StreamKind::neg][j] = std::move(neg.output);
        }
        prev = std::move(next);
    }
    for (double& l : result.neuron_losses)
        l /= static_cast<double>(net.steps);

    ReadoutResult ro = readout_forward_loss_grad(net, prev[StreamKind::neu], fused.true_labels);
    result.readout_loss = ro.loss;
    for (std::size_t r = 0; r < fused.size(); ++r)
        if (argmax(ro.probs.row(r)) != fused.true_labels[r])
            ++result.readout_errors;
    if (!flags.freeze_readout)
        adam_step(net.readout_w, ro.grad, net.readout_adam);
    return result;
}

Matrix predict_logits(const CyclicNet& net, const Matrix& features) {
    if (features.cols() != net.raw_dim)
        throw ShapeError("predict: features have " + std::to_string(features.cols()) +
                         " columns, network expects " + std::to_string(net.raw_dim));
    Matrix logits(features.rows(), net.n_classes);
    for (std::size_t start = 0; start < features.rows(); start += kPredictChunk) {
        const std::size_t end = std::min(features.rows(), start + kPredictChunk);
        std::vector<std::size_t> rows(end - start);
        std::iota(rows.begin(), rows.end(), start);
        const Matrix base = fuse_neutral(gather_rows(features, rows), net.n_classes, net.fusion);
        std::vector<Matrix> state = zero_outputs(net, rows.size());
        for (std::size_t t = 0; t < net.steps; ++t)
            state = propagate_stream(net, state, base);
        const Matrix chunk = matmul_nt(readout_input(net, state), net.readout_w);
        for (std::size_t r = 0; r < chunk.rows(); ++r) {
            auto src = chunk.row(r);
            std::copy(src.begin(), src.end(), logits.row(start + r).begin());
        }
    }
    return logits;
}

std::vector<std::size_t> predict(const CyclicNet& net, const Matrix& features) {
    const Matrix logits = predict_logits(net, features);
    std::vector<std::size_t> out(logits.rows());
    for (std::size_t r = 0; r < logits.rows(); ++r)
        out[r] = argmax(logits.row(r));
    return out;
}

} // namespace cyclicff
