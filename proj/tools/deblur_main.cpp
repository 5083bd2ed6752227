// Command-line front end: dataset synthesis, training, inference,
// evaluation. Exit codes: 0 success, 1 user/data error, 2 internal
// invariant violation.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "deblur/dataset.hpp"
#include "deblur/errors.hpp"
#include "deblur/image.hpp"
#include "deblur/metrics.hpp"
#include "deblur/report.hpp"
#include "deblur/srcnn.hpp"
#include "deblur/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------
// run configuration: JSON file with flat dotted keys, flag overrides
// ---------------------------------------------------------------------

struct RawConfig {
    std::string manifest;
    std::string out_dir = "out";
    int epochs = 50;
    int batch_size = 4;
    int patch_size = 0;
    std::uint64_t seed = 1;
    double lr = 0.001, beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.01;
    int patience = 4;
    double factor = 0.5, min_lr = 1e-6, threshold = 1e-5;
    int window = 11, scales = 3;
    double sigma = 1.5, k1 = 0.01, k2 = 0.03, dynamic_range = 1.0;
    deblur::SrcnnConfig model;

    std::set<std::string> provided;
};

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "data.manifest",      "out.dir",          "train.epochs",    "train.batch_size",
        "train.patch_size",   "train.seed",       "optim.lr",        "optim.beta1",
        "optim.beta2",        "optim.eps",        "optim.weight_decay", "sched.patience",
        "sched.factor",       "sched.min_lr",     "sched.threshold", "loss.window",
        "loss.sigma",         "loss.k1",          "loss.k2",         "loss.scales",
        "loss.dynamic_range", "model.f1",         "model.f2",        "model.f3",
        "model.n1",           "model.n2",         "model.channels"};
    return keys;
}

void apply_key(RawConfig& cfg, const std::string& key, const json& value) {
    auto as_int = [&](int& slot) {
        if (!value.is_number_integer())
            throw std::runtime_error("config key '" + key + "' expects an integer");
        slot = value.get<int>();
    };
    auto as_u64 = [&](std::uint64_t& slot) {
        if (!value.is_number_integer())
            throw std::runtime_error("config key '" + key + "' expects an integer");
        slot = value.get<std::uint64_t>();
    };
    auto as_double = [&](double& slot) {
        if (!value.is_number())
            throw std::runtime_error("config key '" + key + "' expects a number");
        slot = value.get<double>();
    };
    auto as_string = [&](std::string& slot) {
        if (!value.is_string())
            throw std::runtime_error("config key '" + key + "' expects a string");
        slot = value.get<std::string>();
    };

    if (key == "data.manifest") as_string(cfg.manifest);
    else if (key == "out.dir") as_string(cfg.out_dir);
    else if (key == "train.epochs") as_int(cfg.epochs);
    else if (key == "train.batch_size") as_int(cfg.batch_size);
    else if (key == "train.patch_size") as_int(cfg.patch_size);
    else if (key == "train.seed") as_u64(cfg.seed);
    else if (key == "optim.lr") as_double(cfg.lr);
    else if (key == "optim.beta1") as_double(cfg.beta1);
    else if (key == "optim.beta2") as_double(cfg.beta2);
    else if (key == "optim.eps") as_double(cfg.eps);
    else if (key == "optim.weight_decay") as_double(cfg.weight_decay);
    else if (key == "sched.patience") as_int(cfg.patience);
    else if (key == "sched.factor") as_double(cfg.factor);
    else if (key == "sched.min_lr") as_double(cfg.min_lr);
    else if (key == "sched.threshold") as_double(cfg.threshold);
    else if (key == "loss.window") as_int(cfg.window);
    else if (key == "loss.sigma") as_double(cfg.sigma);
    else if (key == "loss.k1") as_double(cfg.k1);
    else if (key == "loss.k2") as_double(cfg.k2);
    else if (key == "loss.scales") as_int(cfg.scales);
    else if (key == "loss.dynamic_range") as_double(cfg.dynamic_range);
    else if (key == "model.f1") as_int(cfg.model.f1);
    else if (key == "model.f2") as_int(cfg.model.f2);
    else if (key == "model.f3") as_int(cfg.model.f3);
    else if (key == "model.n1") as_int(cfg.model.n1);
    else if (key == "model.n2") as_int(cfg.model.n2);
    else if (key == "model.channels") as_int(cfg.model.channels);
    else
        throw std::runtime_error("unknown config key '" + key + "'");
    cfg.provided.insert(key);
}

RawConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("config " + path.string() + ": " + e.what());
    }
    if (!doc.is_object()) throw std::runtime_error("config must be a JSON object");

    RawConfig cfg;
    for (const auto& [key, value] : doc.items()) apply_key(cfg, key, value);

    std::string defaulted;
    for (const std::string& key : known_keys())
        if (!cfg.provided.count(key)) defaulted += defaulted.empty() ? key : ", " + key;
    if (!defaulted.empty()) std::cerr << "notice: using defaults for: " << defaulted << "\n";
    return cfg;
}

void apply_set_overrides(RawConfig& cfg, const std::vector<std::string>& pairs) {
    for (const std::string& kv : pairs) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("--set expects key=value, got '" + kv + "'");
        const std::string key = kv.substr(0, eq);
        const std::string raw = kv.substr(eq + 1);
        json value;
        try {
            value = json::parse(raw);
        } catch (const json::parse_error&) {
            value = raw; // unquoted strings (paths) are fine
        }
        apply_key(cfg, key, value);
    }
}

deblur::TrainConfig to_train_config(const RawConfig& raw) {
    deblur::TrainConfig tc;
    tc.model = raw.model;
    tc.loss = deblur::MsSsimParams::with_canonical_weights(
        deblur::SsimParams{raw.window, raw.sigma, raw.k1, raw.k2, raw.dynamic_range}, raw.scales);
    tc.optimizer.lr = static_cast<float>(raw.lr);
    tc.optimizer.beta1 = static_cast<float>(raw.beta1);
    tc.optimizer.beta2 = static_cast<float>(raw.beta2);
    tc.optimizer.eps = static_cast<float>(raw.eps);
    tc.optimizer.weight_decay = static_cast<float>(raw.weight_decay);
    tc.scheduler.patience = raw.patience;
    tc.scheduler.factor = raw.factor;
    tc.scheduler.min_lr = raw.min_lr;
    tc.scheduler.threshold = raw.threshold;
    tc.epochs = raw.epochs;
    tc.batch_size = raw.batch_size;
    tc.seed = raw.seed;
    tc.patch_size = raw.patch_size;
    return tc;
}

// ---------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------

std::vector<fs::path> list_images(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".ppm" || ext == ".pgm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

int cmd_synth(const std::string& clean_dir, const std::string& out_dir, double sigma, int kernel,
              double noise_std, std::uint64_t seed, const std::string& splits) {
    deblur::SplitFractions fractions;
    if (std::sscanf(splits.c_str(), "%lf,%lf,%lf", &fractions.train, &fractions.val,
                    &fractions.test) != 3)
        throw std::runtime_error("--splits expects three comma-separated fractions, got '" +
                                 splits + "'");

    deblur::BlurSpec spec;
    spec.sigma = sigma;
    spec.kernel_size = kernel;
    spec.noise_std = noise_std;
    spec.seed = seed;

    std::cout << "seed=" << seed << "\n";
    const deblur::PairManifest manifest =
        deblur::build_synthetic_dataset(clean_dir, out_dir, spec, fractions, seed);

    std::cout << "manifest=" << (fs::path(out_dir) / "manifest.csv").string() << "\n"
              << "rows=" << manifest.rows.size() << " train=" << manifest.count(deblur::Split::Train)
              << " val=" << manifest.count(deblur::Split::Val)
              << " test=" << manifest.count(deblur::Split::Test) << "\n";
    return 0;
}

int cmd_train(const RawConfig& raw) {
    const deblur::TrainConfig config = to_train_config(raw);
    if (raw.manifest.empty())
        throw std::runtime_error("data.manifest is required (config key or --manifest)");

    std::cout << "seed=" << config.seed << "\n";
    const deblur::PairManifest manifest = deblur::read_manifest(raw.manifest);
    const auto train_rows = manifest.rows_for(deblur::Split::Train);
    const auto val_rows = manifest.rows_for(deblur::Split::Val);

    const deblur::TrainResult result = deblur::train(config, train_rows, val_rows);

    fs::create_directories(raw.out_dir);
    const fs::path checkpoint_path = fs::path(raw.out_dir) / "best.srcn";
    const fs::path history_path = fs::path(raw.out_dir) / "history.csv";
    deblur::save_checkpoint(result.best, checkpoint_path);
    deblur::write_history_csv(result.history, history_path);

    std::cout << "checkpoint=" << checkpoint_path.string() << "\n"
              << "history=" << history_path.string() << "\n"
              << "best_val_ssim=" << deblur::format_fixed6(result.best.best_val_ssim)
              << " epochs=" << result.history.rows.size() << "\n";
    return 0;
}

int cmd_infer(const std::string& checkpoint_path, const std::string& input_dir,
              const std::string& output_dir) {
    const deblur::Checkpoint checkpoint = deblur::load_checkpoint(checkpoint_path);
    const std::vector<fs::path> inputs = list_images(input_dir);
    if (inputs.empty()) {
        std::cerr << "error: no .ppm/.pgm images in " << input_dir << "\n";
        return 1;
    }
    fs::create_directories(output_dir);

    std::size_t ok = 0;
    for (const fs::path& path : inputs) {
        try {
            const deblur::Tensor degraded = deblur::to_tensor(deblur::read_image(path));
            const deblur::Tensor restored = deblur::infer_image(checkpoint.weights, degraded);
            deblur::write_image(deblur::to_image(restored), fs::path(output_dir) / path.filename());
            ++ok;
        } catch (const std::exception& e) {
            std::cerr << "error: " << path.string() << ": " << e.what() << "\n";
        }
    }
    std::cout << "deblurred=" << ok << "/" << inputs.size() << "\n";
    return ok > 0 ? 0 : 1;
}

int cmd_eval(const std::string& manifest_path, const std::string& split_name,
             const std::string& checkpoint_path, const std::string& report_path, int threads,
             double dynamic_range) {
    const deblur::PairManifest manifest = deblur::read_manifest(manifest_path);
    const deblur::Split split = deblur::parse_split(split_name);
    const std::vector<deblur::PairRow> rows = manifest.rows_for(split);

    deblur::Predictor predictor;
    if (checkpoint_path.empty()) {
        predictor = [](const deblur::Tensor& t) { return t; }; // degraded-vs-clean baseline
    } else {
        auto checkpoint = std::make_shared<deblur::Checkpoint>(
            deblur::load_checkpoint(checkpoint_path));
        predictor = [checkpoint](const deblur::Tensor& t) {
            return deblur::infer_image(checkpoint->weights, t);
        };
    }

    deblur::SsimParams params;
    params.dynamic_range = dynamic_range;
    const deblur::MetricReport report = deblur::evaluate_pairs(rows, predictor, params, threads);
    deblur::write_metric_csv(report, report_path);

    if (!report.errors.empty()) {
        for (const deblur::RowError& e : report.errors)
            std::cerr << "error: row '" << e.id << "': " << e.message << "\n";
        std::cerr << "errors=" << report.errors.size() << "\n";
    }
    std::cout << "report=" << report_path << "\n"
              << "ssim=" << deblur::format_fixed6(report.mean_ssim())
              << " psnr=" << deblur::format_fixed6(report.mean_psnr()) << "\n";
    if (!rows.empty() && report.rows.empty()) return 1; // every row failed
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"face deblurring toolkit: 3-layer SRCNN trained with an "
                 "MSE + L1 + MS-SSIM objective"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "blur a directory of clean images into "
                                              "(degraded, clean) training pairs");
    std::string clean_dir, synth_out;
    double sigma = 1.5, noise_std = 0.0;
    int kernel = 9;
    std::uint64_t synth_seed = 1;
    std::string splits = "0.8,0.2,0.0";
    synth->add_option("clean_dir", clean_dir, "directory of clean .ppm/.pgm images")->required();
    synth->add_option("out_dir", synth_out, "output directory for degraded images + manifest")
        ->required();
    synth->add_option("--sigma", sigma, "Gaussian blur sigma in pixels");
    synth->add_option("--kernel", kernel, "blur kernel size (odd, >= 3)");
    synth->add_option("--noise-std", noise_std, "additive Gaussian noise std");
    synth->add_option("--seed", synth_seed, "top-level seed");
    synth->add_option("--splits", splits, "train,val,test fractions summing to 1");

    // train
    auto* train_cmd = app.add_subcommand("train", "train the network on a pair manifest");
    std::string config_path, manifest_flag, out_flag;
    std::vector<std::string> set_pairs;
    int epochs_flag = 0, batch_flag = 0;
    double lr_flag = 0.0;
    std::uint64_t seed_flag = 0;
    train_cmd->add_option("--config", config_path, "JSON config with flat dotted keys")
        ->required();
    train_cmd->add_option("--set", set_pairs, "override a config key, e.g. --set optim.lr=0.002");
    train_cmd->add_option("--manifest", manifest_flag, "override data.manifest");
    train_cmd->add_option("--out", out_flag, "override out.dir");
    train_cmd->add_option("--epochs", epochs_flag, "override train.epochs");
    train_cmd->add_option("--batch-size", batch_flag, "override train.batch_size");
    train_cmd->add_option("--lr", lr_flag, "override optim.lr");
    auto* seed_opt = train_cmd->add_option("--seed", seed_flag, "override train.seed");

    // infer
    auto* infer = app.add_subcommand("infer", "deblur every image in a directory");
    std::string infer_checkpoint, infer_in, infer_out;
    infer->add_option("--checkpoint", infer_checkpoint, "trained checkpoint (.srcn)")->required();
    infer->add_option("--input", infer_in, "directory of degraded images")->required();
    infer->add_option("--output", infer_out, "directory for deblurred images")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "score a predictor over one manifest split");
    std::string eval_manifest, eval_split = "val", eval_checkpoint, eval_report = "report.csv";
    int eval_threads = 1;
    double eval_range = 1.0;
    eval->add_option("--manifest", eval_manifest, "pair manifest CSV")->required();
    eval->add_option("--split", eval_split, "train|val|test");
    eval->add_option("--checkpoint", eval_checkpoint,
                     "checkpoint to evaluate; omit for the identity baseline");
    eval->add_option("--out", eval_report, "metric report CSV path");
    eval->add_option("--threads", eval_threads, "parallel row evaluation");
    eval->add_option("--dynamic-range", eval_range, "PSNR/SSIM dynamic range");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (synth->parsed())
            return cmd_synth(clean_dir, synth_out, sigma, kernel, noise_std, synth_seed, splits);
        if (train_cmd->parsed()) {
            RawConfig raw = load_config(config_path);
            apply_set_overrides(raw, set_pairs);
            if (!manifest_flag.empty()) raw.manifest = manifest_flag;
            if (!out_flag.empty()) raw.out_dir = out_flag;
            if (epochs_flag > 0) raw.epochs = epochs_flag;
            if (batch_flag > 0) raw.batch_size = batch_flag;
            if (lr_flag > 0.0) raw.lr = lr_flag;
            if (seed_opt->count() > 0) raw.seed = seed_flag;
            return cmd_train(raw);
        }
        if (infer->parsed()) return cmd_infer(infer_checkpoint, infer_in, infer_out);
        if (eval->parsed())
            return cmd_eval(eval_manifest, eval_split, eval_checkpoint, eval_report, eval_threads,
                            eval_range);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::logic_error& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
