#pragma once

#include "cyclicff/data.hpp"
#include "cyclicff/graph.hpp"
#include "cyclicff/neuron.hpp"
#include "cyclicff/numerics.hpp"

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace cyclicff {

/// Shape and hyperparameters needed to assemble a network.
struct NetworkSpec {
    std::size_t raw_dim = 0;  // unfused feature width
    std::size_t n_classes = 2;
    FusionMode fusion{};
    std::size_t d_out = 200;
    double theta = 1.0;
    std::size_t steps = 3;  // T, synchronous propagation rounds
    AdamHyper adam{};

    std::size_t base_dim() const { return fusion.fused_dim(raw_dim, n_classes); }
};

/// Neurons wired by a topology plus the softmax readout over all of them.
///
/// Neuron j reads concat(base input, outputs of predecessors(j) ascending),
/// so d_in(j) = base_dim + Σ d_out(i) over those predecessors.
struct CyclicNet {
    Topology topology;
    std::vector<NeuronParams> neurons;
    Matrix readout_w;  // n_classes x Σ d_out
    AdamState readout_adam;
    std::size_t raw_dim = 0;
    std::size_t n_classes = 0;
    FusionMode fusion{};
    std::size_t steps = 1;
    std::vector<std::vector<std::size_t>> preds;  // cached predecessors(j)

    std::size_t base_dim() const { return fusion.fused_dim(raw_dim, n_classes); }
    std::size_t readout_cols() const;

    /// Re-derives preds and checks every dimension invariant.
    void check_consistency();
};

CyclicNet build_network(const Topology& topology, const NetworkSpec& spec, Rng rng);

/// Rounds every weight to the nearest float, i.e. what a checkpoint stores.
void round_weights_to_float(CyclicNet& net);

// ---------------------------------------------------------------------------
// Propagation.
// ---------------------------------------------------------------------------
enum class StreamKind : std::size_t { pos = 0, neg = 1, neu = 2 };

struct PropagationState {
    std::array<std::vector<Matrix>, 3> outputs;  // [stream][neuron] batch x d_out

    std::vector<Matrix>& operator[](StreamKind s) { return outputs[static_cast<std::size_t>(s)]; }
    const std::vector<Matrix>& operator[](StreamKind s) const {
        return outputs[static_cast<std::size_t>(s)];
    }
};

/// All-zero outputs for a batch of the given size.
std::vector<Matrix> zero_outputs(const CyclicNet& net, std::size_t batch);
PropagationState zero_state(const CyclicNet& net, std::size_t batch);

/// Input of neuron j: the base batch followed by the previous outputs of its
/// predecessors.
Matrix neuron_input(const CyclicNet& net, std::size_t j, const Matrix& base,
                    const std::vector<Matrix>& prev);

/// One synchronous round on a single stream. Every neuron reads prev only,
/// so visiting order (defaults to ascending) cannot change the result.
std::vector<Matrix> propagate_stream(const CyclicNet& net, const std::vector<Matrix>& prev,
                                     const Matrix& base, std::span<const std::size_t> order = {});

PropagationState propagate_step(const CyclicNet& net, const PropagationState& state,
                                const FusedBatch& fused, std::span<const std::size_t> order = {});

// ---------------------------------------------------------------------------
// Readout, training and inference.
// ---------------------------------------------------------------------------
struct ReadoutResult {
    Matrix probs;  // batch x n_classes
    double loss = 0.0;
    Matrix grad;   // shape of readout_w
};

/// Softmax cross-entropy over concat(neutral outputs in neuron order).
ReadoutResult readout_forward_loss_grad(const CyclicNet& net, const std::vector<Matrix>& neu_outputs,
                                        std::span<const std::size_t> labels);
ReadoutResult readout_forward_loss_grad(const CyclicNet& net, const PropagationState& state,
                                        std::span<const std::size_t> labels);

struct TrainFlags {
    bool freeze_neurons = false;
    bool freeze_readout = false;
};

struct IterationResult {
    std::vector<double> neuron_losses;  // per neuron, averaged over the T rounds
    double readout_loss = 0.0;
    std::size_t readout_errors = 0;     // neutral-stream misclassifications in this batch
};

/// T rounds of propagate-then-optimise for every neuron on the pos/neg
/// streams, followed by one readout step on the final neutral outputs.
IterationResult train_iteration(CyclicNet& net, const FusedBatch& fused, TrainFlags flags = {});

/// Readout logits for raw features after T neutral rounds from zero state.
Matrix predict_logits(const CyclicNet& net, const Matrix& features);

/// Per-row argmax of predict_logits; ties resolve to the lowest class.
std::vector<std::size_t> predict(const CyclicNet& net, const Matrix& features);

// ---------------------------------------------------------------------------
// Checkpoints: "CNN1", u32 version, topology, shapes, per-neuron weights and
// readout weights as little-endian f32.
// ---------------------------------------------------------------------------
void save_checkpoint(const CyclicNet& net, const std::filesystem::path& path);
CyclicNet load_checkpoint(const std::filesystem::path& path, AdamHyper adam = {});

} // namespace cyclicff
