#include "cyclicff/numerics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace cyclicff {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using Map = Eigen::Map<RowMajor>;

ConstMap view(const Matrix& m) { return ConstMap(m.data(), m.rows(), m.cols()); }
Map view(Matrix& m) { return Map(m.data(), m.rows(), m.cols()); }

std::string shape_text(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

// SplitMix64 finaliser.
std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

} // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw ShapeError("Matrix: data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_)
            throw ShapeError("Matrix: ragged row literal");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

bool all_finite(std::span<const double> values) {
    return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

void require_finite(std::span<const double> values, const char* what) {
    if (!all_finite(values))
        throw InvalidInput(std::string(what) + ": non-finite entry");
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": " + shape_text(a) + " vs " + shape_text(b));
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: " + shape_text(a) + " · " + shape_text(b));
    Matrix out(a.rows(), b.cols());
    if (a.cols() != 0)
        view(out).noalias() = view(a) * view(b);
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw ShapeError("matmul_nt: " + shape_text(a) + " · (" + shape_text(b) + ")ᵀ");
    Matrix out(a.rows(), b.rows());
    if (a.cols() != 0)
        view(out).noalias() = view(a) * view(b).transpose();
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw ShapeError("matmul_tn: (" + shape_text(a) + ")ᵀ · " + shape_text(b));
    Matrix out(a.cols(), b.cols());
    if (a.rows() != 0)
        view(out).noalias() = view(a).transpose() * view(b);
    return out;
}

Matrix hconcat(std::span<const Matrix* const> parts) {
    if (parts.empty())
        return {};
    const std::size_t rows = parts.front()->rows();
    std::size_t cols = 0;
    for (const Matrix* p : parts) {
        if (p->rows() != rows)
            throw ShapeError("hconcat: row counts differ (" + std::to_string(rows) + " vs " +
                             std::to_string(p->rows()) + ")");
        cols += p->cols();
    }
    Matrix out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        double* dst = out.row(r).data();
        for (const Matrix* p : parts) {
            auto src = p->row(r);
            dst = std::copy(src.begin(), src.end(), dst);
        }
    }
    return out;
}

Matrix vconcat(const Matrix& top, const Matrix& bottom) {
    if (top.cols() != bottom.cols())
        throw ShapeError("vconcat: " + shape_text(top) + " over " + shape_text(bottom));
    std::vector<double> data;
    data.reserve(top.size() + bottom.size());
    data.insert(data.end(), top.values().begin(), top.values().end());
    data.insert(data.end(), bottom.values().begin(), bottom.values().end());
    return Matrix(top.rows() + bottom.rows(), top.cols(), std::move(data));
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices) {
    Matrix out(indices.size(), m.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= m.rows())
            throw ShapeError("gather_rows: index out of range");
        auto src = m.row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

std::vector<double> l2_normalize(std::span<const double> v) {
    require_finite(v, "l2_normalize");
    double sq = 0.0;
    for (double x : v)
        sq += x * x;
    const double scale = 1.0 / std::max(std::sqrt(sq), kNormEpsilon);
    std::vector<double> out(v.size());
    std::transform(v.begin(), v.end(), out.begin(), [scale](double x) { return x * scale; });
    return out;
}

Matrix normalize_rows(const Matrix& m) {
    require_finite(m.values(), "normalize_rows");
    Matrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto src = m.row(r);
        double sq = 0.0;
        for (double x : src)
            sq += x * x;
        const double scale = 1.0 / std::max(std::sqrt(sq), kNormEpsilon);
        auto dst = out.row(r);
        for (std::size_t c = 0; c < src.size(); ++c)
            dst[c] = src[c] * scale;
    }
    return out;
}

std::vector<double> softmax_stable(std::span<const double> logits) {
    if (logits.empty())
        throw InvalidInput("softmax_stable: empty input");
    require_finite(logits, "softmax_stable");
    const double peak = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - peak);
        total += out[i];
    }
    for (double& x : out)
        x /= total;
    return out;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        auto p = softmax_stable(logits.row(r));
        std::copy(p.begin(), p.end(), out.row(r).begin());
    }
    return out;
}

void relu_inplace(Matrix& m) {
    for (double& x : m.values())
        x = x > 0.0 ? x : 0.0;
}

double logistic(double x) {
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best])
            best = i;
    return best;
}

// ---------------------------------------------------------------------------

Rng::Rng(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), key_(mix64(seed ^ mix64(stream_id + kGolden))) {}

Rng Rng::substream(std::uint64_t id) const {
    return Rng(seed_, mix64(stream_id_ * kGolden + mix64(id ^ 0xD1B54A32D192ED03ULL)));
}

std::uint64_t Rng::next_u64() {
    return mix64(key_ + kGolden * ++counter_);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
    if (n == 0)
        throw ParameterError("Rng::uniform_index: empty range");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        const std::uint64_t r = next_u64();
        if (r >= threshold)
            return r % n;
    }
}

double Rng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0)
        u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// ---------------------------------------------------------------------------

AdamState AdamState::fresh(std::size_t rows, std::size_t cols, AdamHyper hyper) {
    return AdamState{Matrix(rows, cols), Matrix(rows, cols), 0, hyper};
}

void adam_step(Matrix& params, const Matrix& grad, AdamState& state) {
    require_same_shape(params, grad, "adam_step(params, grad)");
    require_same_shape(params, state.m, "adam_step(params, m)");
    require_same_shape(params, state.v, "adam_step(params, v)");
    require_finite(grad.values(), "adam_step gradient");

    const AdamHyper& h = state.hyper;
    state.t += 1;
    const double t = static_cast<double>(state.t);
    const double bias1 = 1.0 - std::pow(h.beta1, t);
    const double bias2 = 1.0 - std::pow(h.beta2, t);

    double* p = params.data();
    const double* g = grad.data();
    double* m = state.m.data();
    double* v = state.v.data();
    const std::size_t n = params.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double gi = g[i] + h.weight_decay * p[i];
        m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * gi;
        v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * gi * gi;
        const double m_hat = m[i] / bias1;
        const double v_hat = v[i] / bias2;
        p[i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
    }
}

} // namespace cyclicff
