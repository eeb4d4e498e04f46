#include "cyclicff/network.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace cyclicff {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'C', 'N', 'N', '1'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    void u32(std::uint64_t v) {
        if (v > 0xFFFFFFFFULL)
            throw ParameterError("checkpoint: value does not fit in u32");
        for (int s = 0; s < 32; s += 8)
            bytes_.push_back(static_cast<char>(v >> s));
    }
    void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void f64(double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int s = 0; s < 64; s += 8)
            bytes_.push_back(static_cast<char>(bits >> s));
    }
    void matrix(const Matrix& m) {
        u32(m.rows());
        u32(m.cols());
        for (double x : m.values())
            f32(x);
    }
    void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
    const std::vector<char>& bytes() const { return bytes_; }

private:
    std::vector<char> bytes_;
};

class Reader {
public:
    explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= std::uint32_t{static_cast<unsigned char>(bytes_[pos_++])} << (8 * i);
        return v;
    }
    double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= std::uint64_t{static_cast<unsigned char>(bytes_[pos_++])} << (8 * i);
        return std::bit_cast<double>(v);
    }
    Matrix matrix() {
        const std::size_t rows = u32();
        const std::size_t cols = u32();
        need(rows * cols * 4);
        Matrix m(rows, cols);
        for (double& x : m.values())
            x = f32();
        return m;
    }
    bool magic_ok() {
        need(4);
        const bool ok = std::equal(std::begin(kMagic), std::end(kMagic), bytes_.begin());
        pos_ += 4;
        return ok;
    }
    bool at_end() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n)
            throw FormatError("checkpoint: truncated file");
    }
    std::vector<char> bytes_;
    std::size_t pos_ = 0;
};

} // namespace

void save_checkpoint(const CyclicNet& net, const fs::path& path) {
    Writer w;
    w.raw(kMagic, 4);
    w.u32(kVersion);
    w.u32(net.topology.n_neurons());
    w.u32(net.topology.n_synapses());
    for (const Synapse& s : net.topology.synapses()) {
        w.u32(s.src);
        w.u32(s.dst);
    }
    w.u32(net.raw_dim);
    w.u32(net.n_classes);
    w.u32(net.fusion.kind == FusionKind::concat ? 0 : 1);
    w.u32(net.steps);
    for (const NeuronParams& p : net.neurons) {
        w.u32(p.d_in());
        w.u32(p.d_out());
        w.f64(p.theta);
        for (double x : p.W.values())
            w.f32(x);
    }
    w.matrix(net.readout_w);

    // Write-then-rename so a crash never leaves a half checkpoint behind.
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
        if (!out)
            throw Error("could not write checkpoint '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

CyclicNet load_checkpoint(const fs::path& path, AdamHyper adam) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open checkpoint '" + path.string() + "'");
    Reader r(std::vector<char>{std::istreambuf_iterator<char>(in), {}});
    if (!r.magic_ok())
        throw FormatError("'" + path.string() + "' is not a CNN1 checkpoint");
    if (const auto v = r.u32(); v != kVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(v));

    CyclicNet net;
    const std::size_t n = r.u32();
    const std::size_t n_syn = r.u32();
    std::vector<Synapse> synapses(n_syn);
    for (Synapse& s : synapses) {
        s.src = r.u32();
        s.dst = r.u32();
    }
    net.topology = Topology(n, std::move(synapses));
    net.raw_dim = r.u32();
    net.n_classes = r.u32();
    const auto fusion = r.u32();
    if (fusion > 1)
        throw FormatError("checkpoint: unknown fusion code " + std::to_string(fusion));
    net.fusion.kind = fusion == 0 ? FusionKind::concat : FusionKind::overlay;
    net.steps = r.u32();
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t d_in = r.u32();
        const std::size_t d_out = r.u32();
        const double theta = r.f64();
        NeuronParams p{Matrix(d_out, d_in), AdamState::fresh(d_out, d_in, adam), theta};
        for (double& x : p.W.values())
            x = r.f32();
        net.neurons.push_back(std::move(p));
    }
    net.readout_w = r.matrix();
    net.readout_adam = AdamState::fresh(net.readout_w.rows(), net.readout_w.cols(), adam);
    if (!r.at_end())
        throw FormatError("checkpoint: trailing bytes");
    try {
        net.check_consistency();
    } catch (const ConstructionError& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
    return net;
}

} // namespace cyclicff
