// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails. Heavier end-to-end checks live here rather than in the
// unit tests.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "deblur/autograd.hpp"
#include "deblur/dataset.hpp"
#include "deblur/errors.hpp"
#include "deblur/image.hpp"
#include "deblur/loss.hpp"
#include "deblur/metrics.hpp"
#include "deblur/optim.hpp"
#include "deblur/report.hpp"
#include "deblur/rng.hpp"
#include "deblur/srcnn.hpp"
#include "deblur/train.hpp"
#include "support/corpus.hpp"
#include "support/oracles.hpp"
#include "support/testutil.hpp"

using namespace deblur;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

// ------------------------------------------------------------------
// 1. ssim/psnr/ms_ssim vs independent brute-force oracles
// ------------------------------------------------------------------
Outcome criterion_metric_oracles() {
    Outcome o;
    const double t0 = now_seconds();
    const SsimParams ssim_params; // 11x11, sigma 1.5
    const MsSsimParams ms_params =
        MsSsimParams::with_canonical_weights(SsimParams{5, 1.5, 0.01, 0.03, 1.0}, 3);

    double worst_ssim = 0.0, worst_psnr = 0.0, worst_ms = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto x = oracle::random_tensor(32, 32, 3, 1000 + trial);
        const auto y = oracle::random_tensor(32, 32, 3, 2000 + trial);

        worst_ssim = std::max(
            worst_ssim, std::abs(ssim(x, y, ssim_params) -
                                 oracle::direct_ssim(x, y, ssim_params).full));
        worst_psnr = std::max(worst_psnr, std::abs(psnr(x, y, 1.0) -
                                                   oracle::direct_psnr(x, y, 1.0)));
        worst_ms = std::max(worst_ms, std::abs(ms_ssim(x, y, ms_params) -
                                               oracle::direct_ms_ssim(x, y, ms_params)));
    }
    const double elapsed = now_seconds() - t0;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "max |dssim|=%.2e |dpsnr|=%.2e |dmsssim|=%.2e, %.1fs", worst_ssim,
                  worst_psnr, worst_ms, elapsed);
    o.detail = buf;
    o.require(worst_ssim < 1e-6, "ssim worse than 1e-6");
    o.require(worst_psnr < 1e-6, "psnr worse than 1e-6");
    o.require(worst_ms < 1e-5, "ms_ssim worse than 1e-5");
    o.require(elapsed < 10.0, "exceeded 10 s");
    return o;
}

// ------------------------------------------------------------------
// 2. gradients of each loss component and the composite vs central FD
// ------------------------------------------------------------------
Outcome criterion_gradients() {
    Outcome o;
    const double t0 = now_seconds();
    const MsSsimParams params =
        MsSsimParams::with_canonical_weights(SsimParams{3, 1.5, 0.01, 0.03, 1.0}, 2);
    constexpr double kStep = 1e-4; // 64-bit path; small-window MS-SSIM is curvy

    // values in [0,1] with |pred - target| kept clear of the L1 kink so the
    // finite differences remain valid at this step size
    auto x = oracle::random_tensor(8, 8, 3, 42, 0.2, 0.8);
    auto y = x;
    std::mt19937_64 eng(43);
    for (std::size_t i = 0; i < y.size(); ++i)
        y.data()[i] += ((eng() & 1) ? 1.0 : -1.0) * (0.01 + 0.05 * uniform_unit(eng));

    using Build = std::function<NodeId(GraphT<double>&, NodeId, NodeId)>;
    const std::vector<std::pair<std::string, Build>> components = {
        {"mse", [](GraphT<double>& g, NodeId p, NodeId t) { return mse_node(g, p, t); }},
        {"l1", [](GraphT<double>& g, NodeId p, NodeId t) { return l1_node(g, p, t); }},
        {"ms_ssim",
         [&params](GraphT<double>& g, NodeId p, NodeId t) {
             return ms_ssim_node(g, p, t, params);
         }},
        {"total", [&params](GraphT<double>& g, NodeId p, NodeId t) {
             return combined_loss_nodes(g, p, t, params).total;
         }}};

    double worst_overall = 0.0;
    for (const auto& [name, build] : components) {
        GraphT<double> g;
        const NodeId pred = g.input(x);
        const NodeId loss = build(g, pred, g.constant(y));
        const auto grads = g.backward(loss);
        const auto& analytic = grads.for_input(pred);

        double worst = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            TensorT<double> xp = x, xm = x;
            xp.data()[i] += kStep;
            xm.data()[i] -= kStep;
            GraphT<double> ga, gb;
            const double fp = ga.scalar(build(ga, ga.input(xp), ga.constant(y)));
            const double fm = gb.scalar(build(gb, gb.input(xm), gb.constant(y)));
            const double fd = (fp - fm) / (2.0 * kStep);
            worst = std::max(worst, oracle::rel_err(analytic.data()[i], fd, 1e-6));
        }
        o.require(worst < 1e-4, name + " max rel err " + std::to_string(worst));
        worst_overall = std::max(worst_overall, worst);
    }
    const double elapsed = now_seconds() - t0;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "64-bit path, max rel err %.2e, %.1fs", worst_overall,
                  elapsed);
    o.detail = o.pass ? buf : o.detail + "; " + buf;
    o.require(elapsed < 60.0, "exceeded 60 s");
    return o;
}

// ------------------------------------------------------------------
// 3. plateau scheduler state machine on the pinned trace
// ------------------------------------------------------------------
Outcome criterion_scheduler() {
    Outcome o;
    PlateauParams params; // patience 4, factor 0.5, threshold 1e-5
    PlateauScheduler sched(0.001, params);
    const std::vector<double> trace = {0.5, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6};
    std::vector<double> lrs;
    for (double m : trace) lrs.push_back(sched.step(m));

    int halvings = 0;
    for (std::size_t i = 0; i < lrs.size(); ++i) {
        const double prev = (i == 0) ? 0.001 : lrs[i - 1];
        if (lrs[i] != prev) ++halvings;
    }
    o.require(halvings == 1, "expected exactly one reduction, saw " + std::to_string(halvings));
    for (std::size_t i = 0; i + 1 < lrs.size(); ++i)
        o.require(lrs[i] == 0.001, "reduced before the counter exceeded patience");
    o.require(lrs.back() == 0.0005, "final lr is not exactly half");
    o.detail = "one halving, exactly at the 7th observation";
    return o;
}

// ------------------------------------------------------------------
// 4. adamw fixed point and one-step scalar contract
// ------------------------------------------------------------------
Outcome criterion_adamw() {
    Outcome o;
    {
        std::vector<double> p = {1.5, -2.0, 0.75};
        const std::vector<double> g = {0.0, 0.0, 0.0};
        AdamwStateT<double> state({p.size()});
        AdamwHyperT<double> hyper;
        hyper.weight_decay = 0.0;
        adamw_step<double>({std::span<double>(p)}, {std::span<const double>(g)}, state, hyper);
        o.require(p[0] == 1.5 && p[1] == -2.0 && p[2] == 0.75,
                  "zero-grad/zero-decay step moved the parameters");
        o.require(state.step_count() == 1, "step counter did not advance");
    }
    {
        std::vector<double> p = {1.0};
        const std::vector<double> g = {0.5};
        AdamwStateT<double> state({1});
        const AdamwHyperT<double> h;
        adamw_step<double>({std::span<double>(p)}, {std::span<const double>(g)}, state, h);

        const double m_hat = ((1.0 - 0.9) * 0.5) / (1.0 - 0.9);
        const double v_hat = ((1.0 - 0.999) * 0.25) / (1.0 - 0.999);
        const double want = 1.0 - 0.001 * (m_hat / (std::sqrt(v_hat) + 1e-8) + 0.01 * 1.0);
        const double err = std::abs(p[0] - want);
        char buf[96];
        std::snprintf(buf, sizeof(buf), "scalar step err %.2e", err);
        o.detail = buf;
        o.require(err < 1e-12, "scalar update off the direct formula");
    }
    return o;
}

// ------------------------------------------------------------------
// 5. desk-scale end-to-end: trained model beats the blurred baseline
// ------------------------------------------------------------------
Outcome criterion_end_to_end() {
    Outcome o;
    const double t0 = now_seconds();
    const fs::path root = testutil::fresh_dir("acc_e2e");

    corpus::write_corpus(root / "clean", 200, 64, 0xFACE);
    BlurSpec blur;
    blur.sigma = 1.5;
    blur.kernel_size = 9;
    blur.seed = 7;
    const PairManifest manifest =
        build_synthetic_dataset(root / "clean", root / "data", blur, SplitFractions{}, 7);
    const auto val_rows = manifest.rows_for(Split::Val);
    const auto train_rows = manifest.rows_for(Split::Train);

    const SsimParams eval_params;
    const auto identity = [](const Tensor& t) { return t; };
    const MetricReport baseline = evaluate_pairs(val_rows, identity, eval_params);

    TrainConfig config;
    config.model.n1 = 8;
    config.model.n2 = 4;
    config.epochs = 30; // <= 50 per the budget
    config.batch_size = 4;
    config.optimizer.lr = 0.001f;
    config.seed = 99;
    const TrainResult result = train(config, train_rows, val_rows);

    const MetricReport trained = evaluate_pairs(
        val_rows,
        [&result](const Tensor& t) { return infer_image(result.best.weights, t); },
        eval_params);

    const double dssim = trained.mean_ssim() - baseline.mean_ssim();
    const double dpsnr = trained.mean_psnr() - baseline.mean_psnr();
    const double elapsed = now_seconds() - t0;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "baseline ssim %.4f psnr %.2f -> trained ssim %.4f psnr %.2f "
                  "(+%.4f, +%.2f dB), %d epochs, %.0fs",
                  baseline.mean_ssim(), baseline.mean_psnr(), trained.mean_ssim(),
                  trained.mean_psnr(), dssim, dpsnr, config.epochs, elapsed);
    o.detail = buf;
    o.require(baseline.errors.empty() && trained.errors.empty(), "evaluation errors");
    o.require(dssim >= 0.02, "ssim gain below 0.02");
    o.require(dpsnr >= 0.5, "psnr gain below 0.5 dB");
    o.require(elapsed < 1800.0, "exceeded the 30 minute budget");
    return o;
}

// ------------------------------------------------------------------
// 6. two identical cmd_train runs are byte-identical
// ------------------------------------------------------------------
Outcome criterion_determinism() {
    Outcome o;
    const fs::path root = testutil::fresh_dir("acc_determinism");
    corpus::write_corpus(root / "clean", 12, 24, 0xD1CE);
    BlurSpec blur;
    blur.sigma = 1.2;
    blur.kernel_size = 5;
    build_synthetic_dataset(root / "clean", root / "data", blur, SplitFractions{}, 5);

    const std::string config = std::string("{\n") +
                               "  \"data.manifest\": \"" +
                               (root / "data" / "manifest.csv").string() + "\",\n" +
                               "  \"train.epochs\": 3,\n  \"train.batch_size\": 2,\n" +
                               "  \"train.seed\": 77,\n  \"loss.window\": 5,\n" +
                               "  \"loss.scales\": 2,\n  \"model.n1\": 4,\n" +
                               "  \"model.n2\": 2\n}\n";
    testutil::spit(root / "config.json", config);

    for (const char* run : {"run_a", "run_b"}) {
        const auto r = testutil::run_cli("train --config " + (root / "config.json").string() +
                                         " --out " + (root / run).string());
        o.require(r.code == 0, std::string("cmd_train failed for ") + run + ": " + r.err);
    }
    if (!o.pass) return o;

    const bool history_same = testutil::slurp(root / "run_a" / "history.csv") ==
                              testutil::slurp(root / "run_b" / "history.csv");
    const bool checkpoint_same = testutil::slurp(root / "run_a" / "best.srcn") ==
                                 testutil::slurp(root / "run_b" / "best.srcn");
    o.require(history_same, "history CSVs differ");
    o.require(checkpoint_same, "checkpoints differ");
    o.detail = "history and checkpoint bytes identical across reruns";
    return o;
}

// ------------------------------------------------------------------
// 7. bit-exact formats and rejection of corrupted files
// ------------------------------------------------------------------
Outcome criterion_formats() {
    Outcome o;
    const fs::path root = testutil::fresh_dir("acc_formats");

    { // ppm round trip, byte level
        std::mt19937_64 eng(0xBEEF);
        ImageU8 img;
        img.height = 9;
        img.width = 7;
        img.channels = 3;
        img.samples.resize(img.sample_count());
        for (auto& s : img.samples) s = static_cast<std::uint8_t>(eng() % 256);
        write_image(img, root / "a.ppm");
        const ImageU8 back = read_image(root / "a.ppm");
        o.require(back.samples == img.samples, "ppm sample round trip failed");
        write_image(back, root / "b.ppm");
        o.require(testutil::slurp(root / "a.ppm") == testutil::slurp(root / "b.ppm"),
                  "ppm byte round trip failed");
    }
    { // corrupted ppm files
        testutil::spit(root / "magic.ppm", "P4\n2 2\n255\n............");
        testutil::spit(root / "maxval.ppm", "P6\n2 2\n254\n............");
        testutil::spit(root / "short.ppm", "P6\n2 2\n255\nabc");
        for (const char* name : {"magic.ppm", "maxval.ppm", "short.ppm"}) {
            bool threw = false;
            try {
                read_image(root / name);
            } catch (const FormatError&) {
                threw = true;
            }
            o.require(threw, std::string(name) + " was not rejected as a FormatError");
        }
    }
    { // checkpoint round trip, byte level
        SrcnnConfig cfg;
        cfg.n1 = 5;
        cfg.n2 = 3;
        Checkpoint c{srcnn_init(cfg, 0xABCD)};
        c.epoch = 12;
        c.best_val_ssim = 0.625f;
        c.seed = 321;
        save_checkpoint(c, root / "a.srcn");
        const Checkpoint back = load_checkpoint(root / "a.srcn");
        save_checkpoint(back, root / "b.srcn");
        o.require(testutil::slurp(root / "a.srcn") == testutil::slurp(root / "b.srcn"),
                  "checkpoint byte round trip failed");
        o.require(back.weights.layer1.weights == c.weights.layer1.weights,
                  "checkpoint weights changed in flight");
    }
    { // corrupted checkpoints
        std::string bytes = testutil::slurp(root / "a.srcn");
        std::string magic = bytes;
        magic[0] = 'Z';
        std::string version = bytes;
        version[4] = 0x7f;
        std::string truncated = bytes.substr(0, bytes.size() - 5);
        std::string trailing = bytes + "xx";
        const std::vector<std::pair<const char*, std::string>> cases = {
            {"magic", magic}, {"version", version}, {"truncated", truncated},
            {"trailing", trailing}};
        for (const auto& [name, data] : cases) {
            testutil::spit(root / "bad.srcn", data);
            bool threw = false;
            try {
                load_checkpoint(root / "bad.srcn");
            } catch (const FormatError&) {
                threw = true;
            }
            o.require(threw, std::string("checkpoint ") + name + " corruption not rejected");
        }
    }
    if (o.pass) o.detail = "ppm + checkpoint round trips byte-identical, corruptions rejected";
    return o;
}

// ------------------------------------------------------------------
// 8. combined loss finite over 1000 adversarial in-range pairs
// ------------------------------------------------------------------
Outcome criterion_finiteness() {
    Outcome o;
    const MsSsimParams params =
        MsSsimParams::with_canonical_weights(SsimParams{5, 1.5, 0.01, 0.03, 1.0}, 2);
    std::mt19937_64 eng(0xF1F1);
    int checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int kind = trial % 5;
        Tensor x(16, 16, 1), y(16, 16, 1);
        const float a = static_cast<float>(uniform_unit(eng));
        const float b = static_cast<float>(uniform_unit(eng));
        for (std::size_t i = 0; i < x.size(); ++i) {
            switch (kind) {
                case 0: // constants (including equal constants every 10th trial)
                    x.data()[i] = a;
                    y.data()[i] = (trial % 10 == 0) ? a : b;
                    break;
                case 1: // near-constant with float-eps ripples
                    x.data()[i] = 0.5f + ((i % 3 == 0) ? 1e-7f : 0.0f);
                    y.data()[i] = 0.5f - ((i % 7 == 0) ? 1e-7f : 0.0f);
                    break;
                case 2: // anti-correlated checkerboards
                    x.data()[i] = ((i / 16 + i) & 1) ? 1.0f : 0.0f;
                    y.data()[i] = ((i / 16 + i) & 1) ? 0.0f : 1.0f;
                    break;
                case 3: // extreme contrast against a constant
                    x.data()[i] = (i & 2) ? 1.0f : 0.0f;
                    y.data()[i] = b;
                    break;
                default: // plain random
                    x.data()[i] = static_cast<float>(uniform_unit(eng));
                    y.data()[i] = static_cast<float>(uniform_unit(eng));
            }
        }
        const LossBreakdown plain = combined_loss(x, y, params);
        Graph g;
        const auto nodes = combined_loss_nodes(g, g.input(x), g.constant(y), params);
        const float graph_total = g.scalar(nodes.total);
        if (!std::isfinite(plain.total) || !std::isfinite(graph_total) ||
            plain.ms_ssim < 0.0 || plain.ms_ssim > 1.0) {
            o.require(false, "non-finite or out-of-range loss at trial " + std::to_string(trial));
            break;
        }
        ++checked;
    }
    if (o.pass) o.detail = std::to_string(checked) + " pairs, all totals finite";
    return o;
}

} // namespace

int main() {
    struct Entry {
        int id;
        const char* name;
        Outcome (*fn)();
    };
    const std::vector<Entry> criteria = {
        {1, "metric oracle equivalence", criterion_metric_oracles},
        {2, "gradient correctness", criterion_gradients},
        {3, "scheduler state machine", criterion_scheduler},
        {4, "adamw unit contract", criterion_adamw},
        {5, "desk-scale end-to-end improvement", criterion_end_to_end},
        {6, "training determinism", criterion_determinism},
        {7, "bit-exact formats", criterion_formats},
        {8, "loss finiteness", criterion_finiteness},
    };

    int failures = 0;
    for (const Entry& entry : criteria) {
        Outcome outcome;
        try {
            outcome = entry.fn();
        } catch (const std::exception& e) {
            outcome.pass = false;
            outcome.detail = std::string("exception: ") + e.what();
        }
        if (!outcome.pass) ++failures;
        std::printf("[%s] criterion %d: %s%s%s\n", outcome.pass ? "PASS" : "FAIL", entry.id,
                    entry.name, outcome.detail.empty() ? "" : " — ",
                    outcome.detail.c_str());
        std::fflush(stdout);
    }
    return failures;
}
