#include "cyclicff/neuron.hpp"

#include <cmath>

namespace cyclicff {

namespace {

// log(1 + e^x) without overflow.
double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// Σ h² − theta · d per row.
std::vector<double> goodness_logits(const Matrix& h, double theta) {
    const double offset = theta * static_cast<double>(h.cols());
    std::vector<double> out(h.rows());
    for (std::size_t r = 0; r < h.rows(); ++r) {
        double g = 0.0;
        for (double x : h.row(r))
            g += x * x;
        out[r] = g - offset;
    }
    return out;
}

// Scales each output row by coeff[r] * 2: d(Σh²)/dh = 2h, and h is already
// zero wherever the ReLU is inactive.
Matrix output_gradient(const Matrix& h, const std::vector<double>& coeff) {
    Matrix g(h.rows(), h.cols());
    for (std::size_t r = 0; r < h.rows(); ++r) {
        const double c = 2.0 * coeff[r];
        auto src = h.row(r);
        auto dst = g.row(r);
        for (std::size_t k = 0; k < src.size(); ++k)
            dst[k] = c * src[k];
    }
    return g;
}

} // namespace

NeuronParams NeuronParams::init(std::size_t d_in, std::size_t d_out, double theta,
                                AdamHyper hyper, Rng& rng) {
    if (d_in == 0 || d_out == 0)
        throw ParameterError("neuron: d_in and d_out must be positive");
    if (!(theta >= 0.0))
        throw ParameterError("neuron: theta must be non-negative");
    NeuronParams p{Matrix(d_out, d_in), AdamState::fresh(d_out, d_in, hyper), theta};
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
    for (double& w : p.W.values())
        w = rng.uniform(-bound, bound);
    return p;
}

NeuronActivation neuron_forward_cached(const NeuronParams& p, const Matrix& h_in) {
    if (h_in.cols() != p.d_in())
        throw ShapeError("neuron_forward: input has " + std::to_string(h_in.cols()) +
                         " columns, neuron expects " + std::to_string(p.d_in()));
    NeuronActivation act{normalize_rows(h_in), {}};
    act.output = matmul_nt(act.normalized_input, p.W);
    relu_inplace(act.output);
    return act;
}

Matrix neuron_forward(const NeuronParams& p, const Matrix& h_in) {
    return neuron_forward_cached(p, h_in).output;
}

std::vector<double> goodness(const Matrix& h, double theta) {
    auto logits = goodness_logits(h, theta);
    for (double& x : logits)
        x = logistic(x);
    return logits;
}

FfLossGrad ff_loss_and_grad(const NeuronParams& p, const NeuronActivation& pos,
                            const NeuronActivation& neg) {
    if (pos.output.rows() != neg.output.rows())
        throw ShapeError("ff_loss_and_grad: positive batch has " +
                         std::to_string(pos.output.rows()) + " rows, negative has " +
                         std::to_string(neg.output.rows()));
    const std::size_t batch = pos.output.rows();
    if (batch == 0)
        return {0.0, Matrix(p.d_out(), p.d_in())};
    const double inv_b = 1.0 / static_cast<double>(batch);

    // -log p(x) = softplus(-x) and -log(1 - p(x)) = softplus(x) for p = logistic.
    const auto x_pos = goodness_logits(pos.output, p.theta);
    const auto x_neg = goodness_logits(neg.output, p.theta);
    double loss = 0.0;
    std::vector<double> d_pos(batch), d_neg(batch);
    for (std::size_t r = 0; r < batch; ++r) {
        loss += softplus(-x_pos[r]) + softplus(x_neg[r]);
        d_pos[r] = -logistic(-x_pos[r]) * inv_b;
        d_neg[r] = logistic(x_neg[r]) * inv_b;
    }

    Matrix grad = matmul_tn(output_gradient(pos.output, d_pos), pos.normalized_input);
    const Matrix grad_neg = matmul_tn(output_gradient(neg.output, d_neg), neg.normalized_input);
    double* g = grad.data();
    const double* gn = grad_neg.data();
    for (std::size_t i = 0; i < grad.size(); ++i)
        g[i] += gn[i];
    return {loss * inv_b, std::move(grad)};
}

FfLossGrad ff_loss_and_grad(const NeuronParams& p, const Matrix& pos_in, const Matrix& neg_in) {
    if (pos_in.rows() != neg_in.rows())
        throw ShapeError("ff_loss_and_grad: positive and negative batch sizes differ");
    return ff_loss_and_grad(p, neuron_forward_cached(p, pos_in), neuron_forward_cached(p, neg_in));
}

double ff_loss(const NeuronParams& p, const Matrix& pos_in, const Matrix& neg_in) {
    if (pos_in.rows() != neg_in.rows())
        throw ShapeError("ff_loss: positive and negative batch sizes differ");
    return ff_loss_from_outputs(p.theta, neuron_forward(p, pos_in), neuron_forward(p, neg_in));
}

double ff_loss_from_outputs(double theta, const Matrix& pos_out, const Matrix& neg_out) {
    if (pos_out.rows() != neg_out.rows())
        throw ShapeError("ff_loss: positive and negative batch sizes differ");
    const auto x_pos = goodness_logits(pos_out, theta);
    const auto x_neg = goodness_logits(neg_out, theta);
    if (x_pos.empty())
        return 0.0;
    double loss = 0.0;
    for (std::size_t r = 0; r < x_pos.size(); ++r)
        loss += softplus(-x_pos[r]) + softplus(x_neg[r]);
    return loss / static_cast<double>(x_pos.size());
}

void neuron_step(NeuronParams& p, const Matrix& grad_w) {
    require_same_shape(p.W, grad_w, "neuron_step");
    adam_step(p.W, grad_w, p.adam);
}

} // namespace cyclicff
