#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "deblur/autograd.hpp"
#include "deblur/ops.hpp"
#include "deblur/tensor.hpp"

namespace deblur {

/// Three-layer network: feature extraction (f1), non-linear mapping (f2),
/// reconstruction (f3). Defaults are the 9-1-5 layout with 64/32 feature
/// maps; n1/n2 stay configurable so small test models are cheap.
struct SrcnnConfig {
    int f1 = 9;
    int f2 = 1;
    int f3 = 5;
    int n1 = 64;
    int n2 = 32;
    int channels = 3;

    void validate() const;
    std::size_t parameter_count() const;

    bool operator==(const SrcnnConfig&) const = default;
};

struct SrcnnWeights {
    SrcnnConfig config;
    ConvKernel layer1; // f1 x f1, channels -> n1
    ConvKernel layer2; // f2 x f2, n1 -> n2
    ConvKernel layer3; // f3 x f3, n2 -> channels

    explicit SrcnnWeights(const SrcnnConfig& cfg);
};

/// He-style init: zero-mean Gaussians with std sqrt(2 / fan_in) per layer,
/// zero biases, fully determined by the seed.
SrcnnWeights srcnn_init(const SrcnnConfig& config, std::uint64_t seed);

/// conv(f1) -> relu -> conv(f2) -> relu -> conv(f3). Output spatial dims
/// equal the input's; values are not clamped here (the reconstruction
/// layer output stays unconstrained during training).
Tensor srcnn_forward(const SrcnnWeights& weights, const Tensor& image);

/// Forward plus [0,1] clamping, the inference path.
Tensor srcnn_infer(const SrcnnWeights& weights, const Tensor& image);

/// Kernel handles of one weight set registered in a graph.
struct SrcnnGraphParams {
    KernelId layer1;
    KernelId layer2;
    KernelId layer3;
};

SrcnnGraphParams srcnn_register(Graph& g, const SrcnnWeights& weights);
NodeId srcnn_forward_node(Graph& g, const SrcnnGraphParams& params, NodeId image);

struct Checkpoint {
    SrcnnConfig config;
    SrcnnWeights weights;
    std::uint32_t epoch = 0;
    float best_val_ssim = 0.0f;
    std::uint64_t seed = 0;

    Checkpoint() : weights(SrcnnConfig{}) {}
    explicit Checkpoint(SrcnnWeights w)
        : config(w.config), weights(std::move(w)) {}
};

/// Binary checkpoint, little-endian throughout: magic "SRCN", one format
/// version byte (0x01), six u32 config fields (f1,f2,f3,n1,n2,channels),
/// epoch u32, best-ssim f32, seed u64, then per layer the weights followed
/// by the biases as f32 in kernel order. Round trips bit-identically.
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

inline constexpr std::uint8_t kCheckpointVersion = 0x01;

} // namespace deblur
