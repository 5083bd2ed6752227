#include "deblur/srcnn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "deblur/errors.hpp"
#include "deblur/rng.hpp"

namespace deblur {

void SrcnnConfig::validate() const {
    auto odd_positive = [](int v, const char* name) {
        if (v <= 0 || v % 2 == 0)
            throw std::invalid_argument(std::string(name) + " must be odd positive, got " +
                                        std::to_string(v));
    };
    odd_positive(f1, "f1");
    odd_positive(f2, "f2");
    odd_positive(f3, "f3");
    if (n1 <= 0 || n2 <= 0 || channels <= 0)
        throw std::invalid_argument("n1, n2 and channels must be positive");
}

std::size_t SrcnnConfig::parameter_count() const {
    const std::size_t l1 = static_cast<std::size_t>(f1) * f1 * channels * n1 + n1;
    const std::size_t l2 = static_cast<std::size_t>(f2) * f2 * n1 * n2 + n2;
    const std::size_t l3 = static_cast<std::size_t>(f3) * f3 * n2 * channels + channels;
    return l1 + l2 + l3;
}

namespace {
const SrcnnConfig& checked(const SrcnnConfig& cfg) {
    cfg.validate();
    return cfg;
}
} // namespace

SrcnnWeights::SrcnnWeights(const SrcnnConfig& cfg)
    : config(checked(cfg)),
      layer1(cfg.f1, cfg.f1, cfg.channels, cfg.n1),
      layer2(cfg.f2, cfg.f2, cfg.n1, cfg.n2),
      layer3(cfg.f3, cfg.f3, cfg.n2, cfg.channels) {}

SrcnnWeights srcnn_init(const SrcnnConfig& config, std::uint64_t seed) {
    SrcnnWeights w(config);
    GaussianSampler gauss(mix_seed(seed, 0x11ULL));
    auto fill = [&gauss](ConvKernel& k) {
        const double fan_in = static_cast<double>(k.kh) * k.kw * k.in_channels;
        const double std_dev = std::sqrt(2.0 / fan_in);
        for (float& v : k.weights) v = static_cast<float>(std_dev * gauss.next());
    };
    fill(w.layer1);
    fill(w.layer2);
    fill(w.layer3);
    return w;
}

Tensor srcnn_forward(const SrcnnWeights& weights, const Tensor& image) {
    if (image.channels() != weights.config.channels)
        throw std::invalid_argument("srcnn_forward: image has " +
                                    std::to_string(image.channels()) + " channels, model expects " +
                                    std::to_string(weights.config.channels));
    const Tensor h1 = relu(conv2d(image, weights.layer1));
    const Tensor h2 = relu(conv2d(h1, weights.layer2));
    return conv2d(h2, weights.layer3);
}

Tensor srcnn_infer(const SrcnnWeights& weights, const Tensor& image) {
    return clamp01(srcnn_forward(weights, image));
}

SrcnnGraphParams srcnn_register(Graph& g, const SrcnnWeights& weights) {
    return SrcnnGraphParams{g.kernel(weights.layer1), g.kernel(weights.layer2),
                            g.kernel(weights.layer3)};
}

NodeId srcnn_forward_node(Graph& g, const SrcnnGraphParams& params, NodeId image) {
    const NodeId h1 = g.relu(g.conv2d(image, params.layer1));
    const NodeId h2 = g.relu(g.conv2d(h1, params.layer2));
    return g.conv2d(h2, params.layer3);
}

namespace {

class Writer {
public:
    void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

    const std::vector<char>& bytes() const { return bytes_; }

private:
    std::vector<char> bytes_;
};

class Reader {
public:
    explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

    std::size_t offset() const { return pos_; }

    std::uint8_t u8(const char* what) {
        need(1, what);
        return static_cast<std::uint8_t>(bytes_[pos_++]);
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n)
            throw FormatError(std::string("truncated checkpoint while reading ") + what, pos_);
    }

    std::vector<char> bytes_;
    std::size_t pos_ = 0;
};

} // namespace

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
    c.config.validate();
    Writer w;
    w.u8('S');
    w.u8('R');
    w.u8('C');
    w.u8('N');
    w.u8(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(c.config.f1));
    w.u32(static_cast<std::uint32_t>(c.config.f2));
    w.u32(static_cast<std::uint32_t>(c.config.f3));
    w.u32(static_cast<std::uint32_t>(c.config.n1));
    w.u32(static_cast<std::uint32_t>(c.config.n2));
    w.u32(static_cast<std::uint32_t>(c.config.channels));
    w.u32(c.epoch);
    w.f32(c.best_val_ssim);
    w.u64(c.seed);
    for (const ConvKernel* k : {&c.weights.layer1, &c.weights.layer2, &c.weights.layer3}) {
        for (float v : k->weights) w.f32(v);
        for (float v : k->bias) w.f32(v);
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r(std::move(bytes));

    const char magic[4] = {static_cast<char>(r.u8("magic")), static_cast<char>(r.u8("magic")),
                           static_cast<char>(r.u8("magic")), static_cast<char>(r.u8("magic"))};
    if (std::memcmp(magic, "SRCN", 4) != 0) throw FormatError("bad checkpoint magic", 0);

    const std::uint8_t version = r.u8("version");
    if (version != kCheckpointVersion)
        throw FormatError("checkpoint version mismatch: found " + std::to_string(version) +
                              ", expected " + std::to_string(kCheckpointVersion),
                          4);

    const std::size_t config_offset = r.offset();
    SrcnnConfig cfg;
    cfg.f1 = static_cast<int>(r.u32("f1"));
    cfg.f2 = static_cast<int>(r.u32("f2"));
    cfg.f3 = static_cast<int>(r.u32("f3"));
    cfg.n1 = static_cast<int>(r.u32("n1"));
    cfg.n2 = static_cast<int>(r.u32("n2"));
    cfg.channels = static_cast<int>(r.u32("channels"));
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("invalid checkpoint config: ") + e.what(), config_offset);
    }

    Checkpoint c{SrcnnWeights(cfg)};
    c.epoch = r.u32("epoch");
    c.best_val_ssim = r.f32("best_val_ssim");
    c.seed = r.u64("seed");
    for (ConvKernel* k : {&c.weights.layer1, &c.weights.layer2, &c.weights.layer3}) {
        for (float& v : k->weights) v = r.f32("weights");
        for (float& v : k->bias) v = r.f32("bias");
    }
    if (r.remaining() != 0)
        throw FormatError("unexpected trailing bytes in checkpoint", r.offset());
    return c;
}

} // namespace deblur
