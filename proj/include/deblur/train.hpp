#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "deblur/dataset.hpp"
#include "deblur/metrics.hpp"
#include "deblur/optim.hpp"
#include "deblur/srcnn.hpp"

namespace deblur {

struct TrainConfig {
    SrcnnConfig model;
    MsSsimParams loss;
    AdamwHyper optimizer;
    PlateauParams scheduler;
    int epochs = 50;
    int batch_size = 4;
    std::uint64_t seed = 1;
    int patch_size = 0; // 0 trains on full images; otherwise seeded square crops

    void validate() const;
};

struct EpochRow {
    int epoch = 0; // 1-based, contiguous
    LossBreakdown train_loss;
    double val_ssim = 0.0;
    double lr = 0.0; // rate the epoch's updates used
};

/// CSV: `epoch,mse,l1,msssim,total,val_ssim,lr`, six decimals.
struct TrainHistory {
    std::vector<EpochRow> rows;
};

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path);

struct TrainResult {
    Checkpoint best; // highest validation SSIM seen
    TrainHistory history;
    std::uint64_t optimizer_steps = 0;
};

/// Minimizes the combined loss over the train pairs: per epoch a seeded
/// shuffle into minibatches, forward through the graph, backward, one
/// AdamW step per batch; after each epoch the validation mean SSIM drives
/// the plateau scheduler and best-checkpoint tracking. When val_pairs is
/// empty the train pairs double as the monitored set.
TrainResult train(const TrainConfig& config, const std::vector<PairRow>& train_pairs,
                  const std::vector<PairRow>& val_pairs);

/// Inference for one image: forward pass with [0,1] clamping.
Tensor infer_image(const SrcnnWeights& weights, const Tensor& image);

} // namespace deblur
