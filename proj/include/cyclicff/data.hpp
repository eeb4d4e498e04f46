#pragma once

#include "cyclicff/numerics.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cyclicff {

struct Dataset {
    Matrix features;                  // n_samples x dim
    std::vector<std::size_t> labels;  // one class index per row
    std::size_t n_classes = 0;
    std::string name;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols(); }

    /// Throws ConsistencyError/InvalidInput when the invariants do not hold.
    void validate() const;
};

/// Rows of d picked by indices, in order.
Dataset subset(const Dataset& d, std::span<const std::size_t> indices);

// ---------------------------------------------------------------------------
// Label fusion.
// ---------------------------------------------------------------------------
enum class FusionKind { concat, overlay };

std::string_view to_string(FusionKind kind);
FusionKind parse_fusion_kind(std::string_view name);

/// concat appends the label vector; overlay writes it over the first
/// n_classes feature entries.
struct FusionMode {
    FusionKind kind = FusionKind::concat;

    std::size_t fused_dim(std::size_t dim, std::size_t n_classes) const {
        return kind == FusionKind::concat ? dim + n_classes : dim;
    }
};

struct FusedBatch {
    Matrix pos;
    Matrix neg;
    Matrix neu;
    std::vector<std::size_t> true_labels;
    std::vector<std::size_t> neg_labels;

    std::size_t size() const { return true_labels.size(); }
};

/// Builds the positive (true label), negative (a false label drawn
/// uniformly from the other n_classes - 1) and neutral (1/n_classes
/// everywhere) inputs for one batch. Negative labels come from rng, so
/// every call draws fresh ones.
FusedBatch fuse_inputs(const Matrix& features, std::span<const std::size_t> labels,
                       std::size_t n_classes, FusionMode mode, Rng& rng);

/// Neutral stream only; this is all inference needs.
Matrix fuse_neutral(const Matrix& features, std::size_t n_classes, FusionMode mode);

// ---------------------------------------------------------------------------
// Loaders.
// ---------------------------------------------------------------------------

/// Reads an IDX image/label pair (plain or gzip). Pixels are scaled to
/// [0, 1] and images flattened row-major.
Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Embedding file: "CNNE", u32 version (1), u32 n_samples, u32 dim,
/// u32 n_classes, n_samples*dim f32, n_samples u16 labels; little-endian.
Dataset load_embeddings(const std::filesystem::path& path);
void save_embeddings(const Dataset& d, const std::filesystem::path& path);

/// Gaussian blobs: class c is N(separation * u_c, I) with u_c a fixed set of
/// orthonormal directions drawn from rng.
Dataset synth_blobs(std::size_t n_per_class, std::size_t dim, std::size_t n_classes,
                    double separation, Rng rng);

// ---------------------------------------------------------------------------
// Splits and batches.
// ---------------------------------------------------------------------------
struct Split {
    Dataset train;
    Dataset val;
};

/// Uniform random split; round(n * val_fraction) rows go to validation.
Split split_dataset(const Dataset& d, double val_fraction, Rng rng);

/// Shuffled index batches for one epoch; the last batch may be short.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n_samples, std::size_t batch_size,
                                                    Rng rng);

} // namespace cyclicff
