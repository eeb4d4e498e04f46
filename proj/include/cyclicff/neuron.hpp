#pragma once

#include "cyclicff/numerics.hpp"

#include <cstddef>
#include <vector>

namespace cyclicff {

/// One computational neuron: a bias-free linear map followed by ReLU, with
/// its own goodness threshold and optimizer state.
struct NeuronParams {
    Matrix W;  // d_out x d_in
    AdamState adam;
    double theta = 1.0;

    std::size_t d_in() const { return W.cols(); }
    std::size_t d_out() const { return W.rows(); }

    /// Weights uniform on [-1/sqrt(d_in), +1/sqrt(d_in)].
    static NeuronParams init(std::size_t d_in, std::size_t d_out, double theta, AdamHyper hyper,
                             Rng& rng);
};

/// Forward results kept for the gradient: the row-normalised input and the
/// post-ReLU output.
struct NeuronActivation {
    Matrix normalized_input;
    Matrix output;
};

NeuronActivation neuron_forward_cached(const NeuronParams& p, const Matrix& h_in);

/// relu(normalize_rows(h_in) · Wᵀ), one row per sample.
Matrix neuron_forward(const NeuronParams& p, const Matrix& h_in);

/// Per-row logistic(Σ h² − theta · cols).
std::vector<double> goodness(const Matrix& h, double theta);

struct FfLossGrad {
    double loss = 0.0;
    Matrix grad_w;
};

/// Binary cross-entropy of the goodness probabilities: positives pushed
/// towards 1, negatives towards 0, averaged over the batch. The gradient
/// treats the normalised inputs as constants.
FfLossGrad ff_loss_and_grad(const NeuronParams& p, const Matrix& pos_in, const Matrix& neg_in);
FfLossGrad ff_loss_and_grad(const NeuronParams& p, const NeuronActivation& pos,
                            const NeuronActivation& neg);

/// Loss only; used by finite-difference checks and monitoring.
double ff_loss(const NeuronParams& p, const Matrix& pos_in, const Matrix& neg_in);
/// Same loss from already computed outputs.
double ff_loss_from_outputs(double theta, const Matrix& pos_out, const Matrix& neg_out);

void neuron_step(NeuronParams& p, const Matrix& grad_w);

} // namespace cyclicff
