#pragma once

#include "cyclicff/errors.hpp"

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace cyclicff {

// ---------------------------------------------------------------------------
// Matrix: dense, row-major, 64-bit.
// ---------------------------------------------------------------------------
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    /// Row-list literal, mostly for tests: Matrix{{1, 2}, {3, 4}}.
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Throws InvalidInput if any entry is NaN or infinite.
void require_finite(std::span<const double> values, const char* what);
bool all_finite(std::span<const double> values);

/// Throws ShapeError with a "<what>: RxC vs RxC" message.
void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

// Products. All three are backed by Eigen's GEMM over row-major maps.
Matrix matmul(const Matrix& a, const Matrix& b);     // a · b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a · bᵀ
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // aᵀ · b

/// Rows of the parts laid side by side; all parts need the same row count.
Matrix hconcat(std::span<const Matrix* const> parts);
Matrix vconcat(const Matrix& top, const Matrix& bottom);
/// Copy of the given rows, in order.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices);

// ---------------------------------------------------------------------------
// Elementwise and vector helpers.
// ---------------------------------------------------------------------------
inline constexpr double kNormEpsilon = 1e-8;

/// v / max(‖v‖₂, 1e-8).
std::vector<double> l2_normalize(std::span<const double> v);
/// l2_normalize applied to each row.
Matrix normalize_rows(const Matrix& m);

std::vector<double> softmax_stable(std::span<const double> logits);
Matrix softmax_rows(const Matrix& logits);

void relu_inplace(Matrix& m);

/// 1 / (1 + e^-x) without overflow for large |x|.
double logistic(double x);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> v);

// ---------------------------------------------------------------------------
// Counter-based random streams.
// ---------------------------------------------------------------------------

/// Named stream ids. Each consumer of randomness owns one so that, e.g.,
/// changing the batch order never shifts the weight initialisation.
enum class Stream : std::uint64_t {
    weights = 1,
    negative_labels = 2,
    data_shuffle = 3,
    graph = 4,
    synth_data = 5,
};

class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream_id);
    Rng(std::uint64_t seed, Stream stream) : Rng(seed, static_cast<std::uint64_t>(stream)) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }
    std::uint64_t counter() const { return counter_; }

    /// Independent child stream; same (parent, id) always yields the same child.
    Rng substream(std::uint64_t id) const;

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n);
    /// Standard normal via Box-Muller (no cached second value).
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// ---------------------------------------------------------------------------
// Adam with coupled L2 weight decay.
// ---------------------------------------------------------------------------
struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

struct AdamState {
    Matrix m;
    Matrix v;
    std::uint64_t t = 0;
    AdamHyper hyper;

    static AdamState fresh(std::size_t rows, std::size_t cols, AdamHyper hyper = {});
};

/// One bias-corrected Adam update of params in place; weight decay is added
/// to the gradient before the moment updates.
void adam_step(Matrix& params, const Matrix& grad, AdamState& state);

} // namespace cyclicff
