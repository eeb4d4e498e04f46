#include "cyclicff/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

namespace cyclicff {

namespace fs = std::filesystem;

void Dataset::validate() const {
    if (features.rows() != labels.size())
        throw ConsistencyError("dataset '" + name + "': " + std::to_string(features.rows()) +
                               " feature rows but " + std::to_string(labels.size()) + " labels");
    for (std::size_t y : labels)
        if (y >= n_classes)
            throw ConsistencyError("dataset '" + name + "': label " + std::to_string(y) +
                                   " outside " + std::to_string(n_classes) + " classes");
    require_finite(features.values(), "dataset features");
}

Dataset subset(const Dataset& d, std::span<const std::size_t> indices) {
    Dataset out{gather_rows(d.features, indices), {}, d.n_classes, d.name};
    out.labels.reserve(indices.size());
    for (std::size_t i : indices)
        out.labels.push_back(d.labels.at(i));
    return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(FusionKind kind) {
    return kind == FusionKind::concat ? "concat" : "overlay";
}

FusionKind parse_fusion_kind(std::string_view name) {
    if (name == "concat")
        return FusionKind::concat;
    if (name == "overlay")
        return FusionKind::overlay;
    throw ParameterError("unknown fusion mode '" + std::string(name) +
                         "' (expected concat or overlay)");
}

namespace {

void check_fusion(std::size_t dim, std::size_t n_classes, FusionMode mode) {
    if (n_classes < 2)
        throw ParameterError("fusion: need at least 2 classes, got " + std::to_string(n_classes));
    if (mode.kind == FusionKind::overlay && dim < n_classes)
        throw ParameterError("fusion: overlay needs dim >= n_classes (" + std::to_string(dim) +
                             " < " + std::to_string(n_classes) + ")");
}

// Writes features row r followed/overlaid by a label vector into dst.
template <typename LabelValue>
void fuse_row(std::span<const double> src, std::size_t n_classes, FusionMode mode,
              std::span<double> dst, LabelValue label_value) {
    std::copy(src.begin(), src.end(), dst.begin());
    const std::size_t offset = mode.kind == FusionKind::concat ? src.size() : 0;
    for (std::size_t c = 0; c < n_classes; ++c)
        dst[offset + c] = label_value(c);
}

} // namespace

FusedBatch fuse_inputs(const Matrix& features, std::span<const std::size_t> labels,
                       std::size_t n_classes, FusionMode mode, Rng& rng) {
    check_fusion(features.cols(), n_classes, mode);
    if (labels.size() != features.rows())
        throw ShapeError("fuse_inputs: " + std::to_string(features.rows()) + " rows but " +
                         std::to_string(labels.size()) + " labels");
    const std::size_t rows = features.rows();
    const std::size_t width = mode.fused_dim(features.cols(), n_classes);
    const double uniform = 1.0 / static_cast<double>(n_classes);

    FusedBatch out{Matrix(rows, width), Matrix(rows, width), Matrix(rows, width),
                   std::vector<std::size_t>(labels.begin(), labels.end()),
                   std::vector<std::size_t>(rows)};
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t y = labels[r];
        if (y >= n_classes)
            throw ParameterError("fuse_inputs: label " + std::to_string(y) + " out of range");
        // Draw from the n_classes - 1 false labels by skipping over y.
        std::size_t false_label = static_cast<std::size_t>(rng.uniform_index(n_classes - 1));
        if (false_label >= y)
            ++false_label;
        out.neg_labels[r] = false_label;

        auto src = features.row(r);
        fuse_row(src, n_classes, mode, out.pos.row(r), [y](std::size_t c) { return c == y ? 1.0 : 0.0; });
        fuse_row(src, n_classes, mode, out.neg.row(r),
                 [false_label](std::size_t c) { return c == false_label ? 1.0 : 0.0; });
        fuse_row(src, n_classes, mode, out.neu.row(r), [uniform](std::size_t) { return uniform; });
    }
    return out;
}

Matrix fuse_neutral(const Matrix& features, std::size_t n_classes, FusionMode mode) {
    check_fusion(features.cols(), n_classes, mode);
    const double uniform = 1.0 / static_cast<double>(n_classes);
    Matrix out(features.rows(), mode.fused_dim(features.cols(), n_classes));
    for (std::size_t r = 0; r < features.rows(); ++r)
        fuse_row(features.row(r), n_classes, mode, out.row(r), [uniform](std::size_t) { return uniform; });
    return out;
}

// ---------------------------------------------------------------------------

namespace {

// Whole file through zlib, which passes uncompressed input through as-is.
std::vector<unsigned char> read_maybe_gzip(const fs::path& path) {
    if (!fs::exists(path))
        throw FormatError("cannot open '" + path.string() + "': no such file");
    gzFile file = gzopen(path.c_str(), "rb");
    if (file == nullptr)
        throw FormatError("cannot open '" + path.string() + "'");
    std::vector<unsigned char> bytes;
    unsigned char chunk[1 << 16];
    for (;;) {
        const int got = gzread(file, chunk, sizeof chunk);
        if (got < 0) {
            gzclose(file);
            throw FormatError("'" + path.string() + "': corrupt gzip stream");
        }
        if (got == 0)
            break;
        bytes.insert(bytes.end(), chunk, chunk + got);
    }
    gzclose(file);
    return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t at) {
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
           (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

} // namespace

Dataset load_mnist_idx(const fs::path& images, const fs::path& labels) {
    const auto img = read_maybe_gzip(images);
    const auto lab = read_maybe_gzip(labels);

    if (img.size() < 16 || read_be32(img, 0) != kIdxImagesMagic)
        throw FormatError("'" + images.string() + "': not an IDX image file (magic 2051)");
    if (lab.size() < 8 || read_be32(lab, 0) != kIdxLabelsMagic)
        throw FormatError("'" + labels.string() + "': not an IDX label file (magic 2049)");

    const std::size_t n_images = read_be32(img, 4);
    const std::size_t rows = read_be32(img, 8);
    const std::size_t cols = read_be32(img, 12);
    const std::size_t n_labels = read_be32(lab, 4);
    const std::size_t pixels = rows * cols;

    if (img.size() != 16 + n_images * pixels)
        throw FormatError("'" + images.string() + "': payload length " +
                          std::to_string(img.size() - 16) + " does not match header");
    if (lab.size() != 8 + n_labels)
        throw FormatError("'" + labels.string() + "': payload length does not match header");
    if (n_images != n_labels)
        throw ConsistencyError("IDX: " + std::to_string(n_images) + " images but " +
                               std::to_string(n_labels) + " labels");

    Dataset d;
    d.name = images.stem().string();
    d.n_classes = 10;
    d.features = Matrix(n_images, pixels);
    double* out = d.features.data();
    for (std::size_t i = 0; i < n_images * pixels; ++i)
        out[i] = static_cast<double>(img[16 + i]) / 255.0;
    d.labels.resize(n_labels);
    for (std::size_t i = 0; i < n_labels; ++i) {
        d.labels[i] = lab[8 + i];
        if (d.labels[i] >= d.n_classes)
            throw FormatError("'" + labels.string() + "': label " + std::to_string(d.labels[i]) +
                              " is not a digit");
    }
    return d;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kEmbeddingMagic[4] = {'C', 'N', 'N', 'E'};
constexpr std::uint32_t kEmbeddingVersion = 1;

std::uint32_t read_le32(const std::vector<unsigned char>& b, std::size_t at) {
    return std::uint32_t{b[at]} | (std::uint32_t{b[at + 1]} << 8) |
           (std::uint32_t{b[at + 2]} << 16) | (std::uint32_t{b[at + 3]} << 24);
}

void put_le32(std::vector<unsigned char>& b, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8)
        b.push_back(static_cast<unsigned char>(v >> s));
}

} // namespace

Dataset load_embeddings(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open '" + path.string() + "'");
    const std::vector<unsigned char> b{std::istreambuf_iterator<char>(in), {}};

    if (b.size() < 20 || !std::equal(std::begin(kEmbeddingMagic), std::end(kEmbeddingMagic), b.begin()))
        throw FormatError("'" + path.string() + "': missing CNNE header");
    if (read_le32(b, 4) != kEmbeddingVersion)
        throw FormatError("'" + path.string() + "': unsupported version " +
                          std::to_string(read_le32(b, 4)));
    const std::size_t n = read_le32(b, 8);
    const std::size_t dim = read_le32(b, 12);
    const std::size_t n_classes = read_le32(b, 16);
    const std::size_t expected = 20 + n * dim * 4 + n * 2;
    if (b.size() != expected)
        throw FormatError("'" + path.string() + "': " + std::to_string(b.size()) +
                          " bytes, header implies " + std::to_string(expected));

    Dataset d;
    d.name = path.stem().string();
    d.n_classes = n_classes;
    d.features = Matrix(n, dim);
    std::size_t at = 20;
    for (double& x : d.features.values()) {
        x = static_cast<double>(std::bit_cast<float>(read_le32(b, at)));
        at += 4;
    }
    d.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i, at += 2)
        d.labels[i] = std::size_t{b[at]} | (std::size_t{b[at + 1]} << 8);
    d.validate();
    return d;
}

void save_embeddings(const Dataset& d, const fs::path& path) {
    d.validate();
    if (d.n_classes > 65536)
        throw ParameterError("save_embeddings: labels must fit in u16");
    std::vector<unsigned char> b(std::begin(kEmbeddingMagic), std::end(kEmbeddingMagic));
    put_le32(b, kEmbeddingVersion);
    put_le32(b, static_cast<std::uint32_t>(d.size()));
    put_le32(b, static_cast<std::uint32_t>(d.dim()));
    put_le32(b, static_cast<std::uint32_t>(d.n_classes));
    for (double x : d.features.values())
        put_le32(b, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
    for (std::size_t y : d.labels) {
        b.push_back(static_cast<unsigned char>(y));
        b.push_back(static_cast<unsigned char>(y >> 8));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    if (!out)
        throw Error("could not write '" + path.string() + "'");
}

// ---------------------------------------------------------------------------

Dataset synth_blobs(std::size_t n_per_class, std::size_t dim, std::size_t n_classes,
                    double separation, Rng rng) {
    if (n_classes > dim)
        throw ParameterError("synth_blobs: n_classes (" + std::to_string(n_classes) +
                             ") exceeds dim (" + std::to_string(dim) + ")");
    if (n_classes < 1)
        throw ParameterError("synth_blobs: need at least one class");
    if (!(separation >= 0.0))
        throw ParameterError("synth_blobs: separation must be non-negative");

    // Gram-Schmidt over Gaussian draws gives the class directions.
    Rng dir_rng = rng.substream(0);
    std::vector<std::vector<double>> dirs;
    while (dirs.size() < n_classes) {
        std::vector<double> u(dim);
        for (double& x : u)
            x = dir_rng.normal();
        for (const auto& prev : dirs) {
            double dot = 0.0;
            for (std::size_t i = 0; i < dim; ++i)
                dot += u[i] * prev[i];
            for (std::size_t i = 0; i < dim; ++i)
                u[i] -= dot * prev[i];
        }
        double norm = 0.0;
        for (double x : u)
            norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-6)
            continue;
        for (double& x : u)
            x /= norm;
        dirs.push_back(std::move(u));
    }

    const std::size_t n = n_per_class * n_classes;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng order_rng = rng.substream(1);
    order_rng.shuffle(order);

    Rng noise = rng.substream(2);
    Dataset d;
    d.name = "blobs";
    d.n_classes = n_classes;
    d.features = Matrix(n, dim);
    d.labels.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t c = order[s] / n_per_class;
        d.labels[s] = c;
        auto row = d.features.row(s);
        for (std::size_t i = 0; i < dim; ++i)
            row[i] = separation * dirs[c][i] + noise.normal();
    }
    return d;
}

// ---------------------------------------------------------------------------

Split split_dataset(const Dataset& d, double val_fraction, Rng rng) {
    if (!(val_fraction >= 0.0 && val_fraction < 1.0))
        throw ParameterError("split: val_fraction must lie in [0, 1)");
    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(d.size())));
    std::span<const std::size_t> all(order);
    Split s{subset(d, all.subspan(n_val)), subset(d, all.first(n_val))};
    s.train.name = d.name + ":train";
    s.val.name = d.name + ":val";
    return s;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n_samples, std::size_t batch_size,
                                                    Rng rng) {
    if (batch_size < 1)
        throw ParameterError("batch size must be at least 1");
    std::vector<std::size_t> order(n_samples);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n_samples; start += batch_size) {
        const std::size_t end = std::min(n_samples, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

} // namespace cyclicff
