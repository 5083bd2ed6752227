#include "deblur/train.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>

#include "deblur/errors.hpp"
#include "deblur/image.hpp"
#include "deblur/loss.hpp"
#include "deblur/report.hpp"
#include "deblur/rng.hpp"

namespace deblur {

void TrainConfig::validate() const {
    model.validate();
    optimizer.validate();
    scheduler.validate();
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (patch_size != 0) {
        const int need = std::max(loss.min_input_dim(), std::max(model.f1, model.f3));
        if (patch_size < need)
            throw std::invalid_argument("patch size " + std::to_string(patch_size) +
                                        " too small; needs >= " + std::to_string(need));
    }
}

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "epoch,mse,l1,msssim,total,val_ssim,lr\n";
    for (const EpochRow& r : history.rows)
        out << r.epoch << ',' << format_fixed6(r.train_loss.mse) << ','
            << format_fixed6(r.train_loss.l1) << ',' << format_fixed6(r.train_loss.ms_ssim) << ','
            << format_fixed6(r.train_loss.total) << ',' << format_fixed6(r.val_ssim) << ','
            << format_fixed6(r.lr) << '\n';
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Tensor infer_image(const SrcnnWeights& weights, const Tensor& image) {
    return srcnn_infer(weights, image);
}

namespace {

struct LoadedPair {
    std::string id;
    Tensor degraded;
    Tensor clean;
};

LoadedPair load_pair(const PairRow& row, int channels, int min_dim) {
    LoadedPair p;
    p.id = row.id;
    try {
        p.degraded = to_tensor(read_image(row.degraded));
        if (!row.has_clean()) throw std::runtime_error("row has no clean reference");
        p.clean = to_tensor(read_image(row.clean));
    } catch (const std::exception& e) {
        throw TrainError("failed to load pair '" + row.id + "': " + e.what());
    }
    if (p.degraded.channels() != channels || p.clean.channels() != channels)
        throw TrainError("pair '" + row.id + "' has wrong channel count, model expects " +
                         std::to_string(channels));
    if (!p.degraded.same_shape(p.clean))
        throw TrainError("pair '" + row.id + "' has mismatched degraded/clean sizes");
    if (p.degraded.height() < min_dim || p.degraded.width() < min_dim)
        throw TrainError("pair '" + row.id + "' is smaller than " + std::to_string(min_dim) +
                         " pixels required by the loss window/scales");
    return p;
}

} // namespace

TrainResult train(const TrainConfig& config, const std::vector<PairRow>& train_pairs,
                  const std::vector<PairRow>& val_pairs) {
    config.validate();
    if (train_pairs.empty()) throw std::invalid_argument("train manifest is empty");

    const int min_dim =
        config.patch_size != 0
            ? config.patch_size
            : std::max(config.loss.min_input_dim(), std::max(config.model.f1, config.model.f3));

    std::vector<LoadedPair> train_data;
    train_data.reserve(train_pairs.size());
    for (const PairRow& row : train_pairs)
        train_data.push_back(load_pair(row, config.model.channels, min_dim));

    std::vector<LoadedPair> val_data;
    val_data.reserve(val_pairs.size());
    for (const PairRow& row : val_pairs)
        val_data.push_back(load_pair(row, config.model.channels,
                                     std::max(config.loss.base.window_size,
                                              std::max(config.model.f1, config.model.f3))));

    // row id -> index so shuffled batches can refer back to loaded tensors
    auto find_pair = [&train_data](const std::string& id) -> const LoadedPair& {
        for (const LoadedPair& p : train_data)
            if (p.id == id) return p;
        throw std::logic_error("train: batch row id '" + id + "' not in loaded data");
    };

    SrcnnWeights weights = srcnn_init(config.model, mix_seed(config.seed, 0x1ULL));
    AdamwState state(std::vector<std::size_t>{
        weights.layer1.weights.size(), weights.layer1.bias.size(), weights.layer2.weights.size(),
        weights.layer2.bias.size(), weights.layer3.weights.size(), weights.layer3.bias.size()});
    PlateauScheduler scheduler(config.optimizer.lr, config.scheduler);

    TrainResult result;
    double best_ssim = -std::numeric_limits<double>::infinity();

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto epoch_batches = chunk_rows(std::vector<PairRow>(train_pairs), config.batch_size,
                                              config.seed, static_cast<std::uint32_t>(epoch));
        std::mt19937_64 crop_rng(mix_seed(config.seed, 0xC40FULL + epoch));

        AdamwHyper hyper = config.optimizer;
        hyper.lr = static_cast<float>(scheduler.lr());

        LossBreakdown epoch_loss;
        std::size_t epoch_images = 0;

        for (std::size_t bi = 0; bi < epoch_batches.size(); ++bi) {
            const auto& batch = epoch_batches[bi];
            Graph g;
            const SrcnnGraphParams params = srcnn_register(g, weights);

            NodeId sum{};
            for (std::size_t si = 0; si < batch.size(); ++si) {
                const LoadedPair& pair = find_pair(batch[si].id);
                Tensor degraded = pair.degraded;
                Tensor clean = pair.clean;
                if (config.patch_size != 0) {
                    const int ps = config.patch_size;
                    const int y0 = static_cast<int>(crop_rng() % (degraded.height() - ps + 1));
                    const int x0 = static_cast<int>(crop_rng() % (degraded.width() - ps + 1));
                    degraded = crop(degraded, y0, x0, ps);
                    clean = crop(clean, y0, x0, ps);
                }
                const NodeId image = g.constant(std::move(degraded));
                const NodeId target = g.constant(std::move(clean));
                const NodeId pred = srcnn_forward_node(g, params, image);
                const LossNodes<float> nodes = combined_loss_nodes(g, pred, target, config.loss);
                const LossBreakdown b = read_breakdown(g, nodes);
                epoch_loss.mse += b.mse;
                epoch_loss.l1 += b.l1;
                epoch_loss.ms_ssim += b.ms_ssim;
                epoch_loss.total += b.total;
                ++epoch_images;
                sum = (si == 0) ? nodes.total : g.add(sum, nodes.total);
            }
            const NodeId batch_loss =
                g.affine(sum, 1.0f / static_cast<float>(batch.size()), 0.0f);

            const float loss_value = g.scalar(batch_loss);
            if (!std::isfinite(loss_value))
                throw TrainError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(bi + 1));

            const Gradients grads = g.backward(batch_loss);
            const KernelGrad& g1 = grads.for_kernel(params.layer1);
            const KernelGrad& g2 = grads.for_kernel(params.layer2);
            const KernelGrad& g3 = grads.for_kernel(params.layer3);
            adamw_step<float>(
                {std::span<float>(weights.layer1.weights), std::span<float>(weights.layer1.bias),
                 std::span<float>(weights.layer2.weights), std::span<float>(weights.layer2.bias),
                 std::span<float>(weights.layer3.weights), std::span<float>(weights.layer3.bias)},
                {std::span<const float>(g1.weights), std::span<const float>(g1.bias),
                 std::span<const float>(g2.weights), std::span<const float>(g2.bias),
                 std::span<const float>(g3.weights), std::span<const float>(g3.bias)},
                state, hyper);
        }

        // validation mean SSIM in manifest order
        const std::vector<LoadedPair>& monitored = val_data.empty() ? train_data : val_data;
        double val_acc = 0.0;
        for (const LoadedPair& pair : monitored) {
            const Tensor restored = srcnn_infer(weights, pair.degraded);
            val_acc += ssim(restored, pair.clean, config.loss.base);
        }
        const double val_ssim = val_acc / static_cast<double>(monitored.size());

        EpochRow row;
        row.epoch = epoch;
        row.train_loss.mse = epoch_loss.mse / static_cast<double>(epoch_images);
        row.train_loss.l1 = epoch_loss.l1 / static_cast<double>(epoch_images);
        row.train_loss.ms_ssim = epoch_loss.ms_ssim / static_cast<double>(epoch_images);
        row.train_loss.total = epoch_loss.total / static_cast<double>(epoch_images);
        row.val_ssim = val_ssim;
        row.lr = scheduler.lr();
        result.history.rows.push_back(row);

        if (val_ssim > best_ssim) {
            best_ssim = val_ssim;
            result.best = Checkpoint{weights};
            result.best.epoch = static_cast<std::uint32_t>(epoch);
            result.best.best_val_ssim = static_cast<float>(val_ssim);
            result.best.seed = config.seed;
        }

        scheduler.step(val_ssim);
    }

    result.optimizer_steps = state.step_count();
    return result;
}

} // namespace deblur
